// Command-line front end: synth, train, score, threshold, evaluate, diagnose.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "mtad/commands.hpp"

namespace {

using mtad::Index;
using mtad::RunConfig;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

// Named flags are stored as "section.key=value" overrides and applied after --config.
void flag(CLI::App* cmd, std::vector<std::string>& overrides, const std::string& name, const std::string& key,
          const std::string& help) {
  cmd->add_option_function<std::string>(
      name, [&overrides, key](const std::string& v) { overrides.push_back(key + "=" + v); }, help);
}

RunConfig resolve(const Options& opt) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig{} : mtad::load_run_config(opt.config_path);
  for (const std::string& o : opt.overrides) mtad::apply_override(cfg, o);
  if (opt.seed) cfg.train.seed = *opt.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate time-series anomaly detection with graph attention"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, "JSON run configuration");
  app.add_option("--seed", opt.seed, "Random seed (train.seed; synth seed)");
  app.add_option("--set", opt.overrides, "Override a config value: section.key=value")->take_all();

  mtad::SynthConfig synth;
  std::string synth_out = "data";
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic benchmark");
  synth_cmd->add_option("--out", synth_out, "Output directory")->capture_default_str();
  synth_cmd->add_option("--length", synth.length, "Total rows (train + test)")->capture_default_str();
  synth_cmd->add_option("--features", synth.features, "Feature count k")->capture_default_str();
  synth_cmd->add_option("--events", synth.events, "Injected test events")->capture_default_str();
  synth_cmd->add_option("--train-fraction", synth.train_fraction, "Leading share used for training")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "Gaussian noise level")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Normalize, clean and train; writes a checkpoint");
  flag(train_cmd, opt.overrides, "--train", "paths.train", "Training values CSV");
  flag(train_cmd, opt.overrides, "--checkpoint", "paths.checkpoint", "Checkpoint output");
  flag(train_cmd, opt.overrides, "--losses", "paths.losses", "Loss curve CSV");
  flag(train_cmd, opt.overrides, "--k", "model.k", "Feature count");
  flag(train_cmd, opt.overrides, "--n", "model.n", "Window length");
  flag(train_cmd, opt.overrides, "--epochs", "train.epochs", "Epochs");
  flag(train_cmd, opt.overrides, "--batch-size", "train.batch_size", "Mini-batch size");
  flag(train_cmd, opt.overrides, "--lr", "train.learning_rate", "Adam learning rate");

  auto* score_cmd = app.add_subcommand("score", "Score a test stream with a checkpoint");
  flag(score_cmd, opt.overrides, "--checkpoint", "paths.checkpoint", "Checkpoint");
  flag(score_cmd, opt.overrides, "--test", "paths.test", "Test values CSV");
  flag(score_cmd, opt.overrides, "--train", "paths.train", "Training values CSV (validation calibration)");
  flag(score_cmd, opt.overrides, "--scores", "paths.scores", "Scores CSV output");
  flag(score_cmd, opt.overrides, "--validation-scores", "paths.validation_scores", "Validation scores CSV output");
  flag(score_cmd, opt.overrides, "--gamma", "model.gamma", "Forecast / reconstruction weight");
  flag(score_cmd, opt.overrides, "--calibration", "scoring.calibration", "test | validation");
  flag(score_cmd, opt.overrides, "--attention-samples", "scoring.attention_samples", "Exported attention matrices");
  flag(score_cmd, opt.overrides, "--attention-dir", "paths.attention_dir", "Attention CSV directory");

  auto* threshold_cmd = app.add_subcommand("threshold", "Peaks-over-threshold alarm threshold");
  flag(threshold_cmd, opt.overrides, "--scores", "paths.scores", "Scores CSV");
  flag(threshold_cmd, opt.overrides, "--validation-scores", "paths.validation_scores", "Validation scores CSV");
  flag(threshold_cmd, opt.overrides, "--alarms", "paths.alarms", "Alarms CSV output");
  flag(threshold_cmd, opt.overrides, "--pot", "paths.pot", "Threshold audit JSON output");
  flag(threshold_cmd, opt.overrides, "--q", "scoring.q", "Risk level");
  flag(threshold_cmd, opt.overrides, "--init-quantile", "scoring.init_quantile", "Initial threshold quantile");
  flag(threshold_cmd, opt.overrides, "--calibration", "scoring.calibration", "test | validation");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Precision / recall / F1 of alarms against labels");
  flag(evaluate_cmd, opt.overrides, "--alarms", "paths.alarms", "Alarms CSV");
  flag(evaluate_cmd, opt.overrides, "--labels", "paths.labels", "Labels CSV");
  flag(evaluate_cmd, opt.overrides, "--protocol", "evaluation.protocol", "point-adjust | delay | raw-point");
  flag(evaluate_cmd, opt.overrides, "--delay", "evaluation.delay", "Delay for the delay protocol");
  flag(evaluate_cmd, opt.overrides, "--report", "paths.report", "Report JSON output");

  auto* diagnose_cmd = app.add_subcommand("diagnose", "Rank root-cause features per labeled event");
  flag(diagnose_cmd, opt.overrides, "--scores", "paths.scores", "Scores CSV");
  flag(diagnose_cmd, opt.overrides, "--root-causes", "paths.root_causes", "Root-cause CSV");
  flag(diagnose_cmd, opt.overrides, "--labels", "paths.labels", "Labels CSV");
  flag(diagnose_cmd, opt.overrides, "--top", "evaluation.top", "Candidates per event");
  flag(diagnose_cmd, opt.overrides, "--out", "paths.diagnosis", "Diagnosis CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : mtad::exit_code(mtad::ErrorKind::config);
  }

  try {
    if (synth_cmd->parsed()) {
      if (opt.seed) synth.seed = *opt.seed;
      mtad::cmd_synth(synth, synth_out, std::cout);
      return 0;
    }
    const RunConfig cfg = resolve(opt);
    if (train_cmd->parsed()) mtad::cmd_train(cfg, std::cout);
    if (score_cmd->parsed()) mtad::cmd_score(cfg, std::cout);
    if (threshold_cmd->parsed()) mtad::cmd_threshold(cfg, std::cout);
    if (evaluate_cmd->parsed()) mtad::cmd_evaluate(cfg, std::cout);
    if (diagnose_cmd->parsed()) mtad::cmd_diagnose(cfg, std::cout);
  } catch (const mtad::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mtad::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
