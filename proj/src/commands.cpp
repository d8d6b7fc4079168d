#include "mtad/commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace mtad {

using nlohmann::json;

namespace {

const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("paths.") + key + " is required for this command");
  return value;
}

void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<std::string> stripped_score_names(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) throw DataError("cannot read " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> names = split_csv_line(line);
  names.erase(names.begin(), names.begin() + std::min<std::ptrdiff_t>(2, static_cast<std::ptrdiff_t>(names.size())));
  for (auto& n : names)
    if (n.starts_with("s_")) n = n.substr(2);
  return names;
}

json pot_json(const PotModel& m) {
  return {{"init_quantile", m.init_quantile}, {"init_threshold", m.init_threshold},
          {"excess_count", m.excess_count},   {"sample_size", m.sample_size},
          {"xi", m.xi},                       {"sigma", m.sigma},
          {"q", m.q},                         {"threshold", m.threshold}};
}

}  // namespace

SynthDataset cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
  cfg.validate();
  SynthDataset d = synthesize(cfg);
  for (const std::string& w : d.warnings) log << "warning: " << w << '\n';
  std::filesystem::create_directories(out_dir);
  write_values_csv(out_dir / "train.csv", d.train);
  write_values_csv(out_dir / "test.csv", d.test);
  write_labels_csv(out_dir / "test_labels.csv", d.labels);
  write_root_causes_csv(out_dir / "root_causes.csv", d.causes, d.test.names);
  log << "synth: " << d.train.values.rows() << " train rows, " << d.test.values.rows() << " test rows, "
      << d.causes.size() << " events -> " << out_dir.string() << '\n';
  return d;
}

Matrix prepare_training_matrix(const Matrix& raw, const NormStats& norm, const RunConfig& cfg,
                               std::vector<std::vector<bool>>* masks) {
  Matrix x = normalize(raw, norm);
  if (!cfg.sr_enabled) return x;
  std::vector<std::vector<bool>> flags;
  for (Index j = 0; j < x.cols(); ++j) flags.push_back(sr_detect(x.col(j), cfg.sr));
  Matrix cleaned = clean_with_masks(x, flags, cfg.sr.replacement_window);
  if (masks) *masks = std::move(flags);
  return cleaned;
}

TrainSummary cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::filesystem::path train_path = require_path(cfg.paths.train, "train");
  const std::filesystem::path ckpt_path = require_path(cfg.paths.checkpoint, "checkpoint");

  const Table data = read_values_csv(train_path);
  ModelConfig model = cfg.model;
  if (data.values.cols() != model.k)
    throw ConfigError("train: " + train_path.string() + " has " + std::to_string(data.values.cols()) +
                      " features but model.k = " + std::to_string(model.k));

  TrainSummary s;
  const NormStats norm = fit_norm(data.values);
  const Matrix series = prepare_training_matrix(data.values, norm, cfg, &s.cleaned);
  for (std::size_t j = 0; j < s.cleaned.size(); ++j) {
    const auto replaced = std::count(s.cleaned[j].begin(), s.cleaned[j].end(), true);
    if (replaced > 0) log << "clean: feature " << data.names[j] << ": replaced " << replaced << " rows\n";
  }

  s.result = train(series, model, cfg.train, [&](const EpochLoss& e) {
    log << "epoch " << e.epoch << " train " << format_double(e.train) << " val " << format_double(e.validation)
        << std::endl;
  });

  s.checkpoint.model = model;
  s.checkpoint.norm = norm;
  s.checkpoint.params = s.result.params;
  s.checkpoint.meta = {cfg.train.epochs, s.result.curve.back().train, cfg.train.seed};
  save_checkpoint(s.checkpoint, ckpt_path);
  log << "train: checkpoint -> " << ckpt_path.string() << '\n';

  if (!cfg.paths.losses.empty()) {
    Matrix curve(static_cast<Index>(s.result.curve.size()), 3);
    for (std::size_t i = 0; i < s.result.curve.size(); ++i)
      curve.row(static_cast<Index>(i)) << static_cast<double>(s.result.curve[i].epoch), s.result.curve[i].train,
          s.result.curve[i].validation;
    write_matrix_csv(cfg.paths.losses, curve, {"epoch", "train_loss", "val_loss"});
  }
  return s;
}

ScoreSummary cmd_score(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::filesystem::path test_path = require_path(cfg.paths.test, "test");
  const std::filesystem::path out_path = require_path(cfg.paths.scores, "scores");
  const bool validation = cfg.scoring.calibration == "validation";
  if (validation) {
    require_path(cfg.paths.train, "train");
    require_path(cfg.paths.validation_scores, "validation_scores");
  }
  if (cfg.scoring.attention_samples > 0) require_path(cfg.paths.attention_dir, "attention_dir");

  const Checkpoint ckpt = load_checkpoint(require_path(cfg.paths.checkpoint, "checkpoint"));
  const Table test = read_values_csv(test_path);
  require_compatible(ckpt, test.values.cols());
  const double gamma = cfg.model.gamma;
  const Matrix stream = normalize(test.values, ckpt.norm);

  ScoreSummary s;
  s.test = score_stream(stream, ckpt.params, ckpt.model, gamma, cfg.train.seed, cfg.scoring.batch_size);
  write_scores_csv(out_path, s.test, test.names);
  log << "score: " << s.test.size() << " timestamps -> " << out_path.string() << '\n';

  if (validation) {
    const Table train = read_values_csv(cfg.paths.train);
    require_compatible(ckpt, train.values.cols());
    const Matrix series = prepare_training_matrix(train.values, ckpt.norm, cfg);
    const Index windows = window_count(series.rows(), ckpt.model.n, cfg.train.stride);
    const auto held_out =
        static_cast<Index>(std::floor(cfg.train.validation_fraction * static_cast<double>(windows)));
    if (held_out < 1) throw ConfigError("score: validation calibration needs train.validation_fraction > 0");
    const Index first = (windows - held_out) * cfg.train.stride;
    ScoreSeries v = score_stream(series.bottomRows(series.rows() - first), ckpt.params, ckpt.model, gamma,
                                 cfg.train.seed, cfg.scoring.batch_size);
    v.offset += first;
    write_scores_csv(cfg.paths.validation_scores, v, train.names);
    log << "score: " << v.size() << " validation timestamps -> " << cfg.paths.validation_scores << '\n';
    s.validation = std::move(v);
  }

  if (cfg.scoring.attention_samples > 0) {
    const std::filesystem::path dir = cfg.paths.attention_dir;
    const Index count = std::min(cfg.scoring.attention_samples, s.test.size());
    for (Index i = 0; i < count; ++i) {
      const Index u = s.test.offset + (count > 1 ? i * (s.test.size() - 1) / (count - 1) : 0);
      const ForwardOutput f =
          forward(stream.middleRows(u - ckpt.model.n, ckpt.model.n), ckpt.params, ckpt.model, Vector::Zero(ckpt.model.d3));
      if (ckpt.model.use_feature_gat)
        write_matrix_csv(dir / ("feature_attention_" + std::to_string(u) + ".csv"), f.feature_attention, test.names);
      if (ckpt.model.use_time_gat) {
        std::vector<std::string> header;
        for (Index c = 0; c < ckpt.model.n; ++c) header.push_back("t" + std::to_string(u - ckpt.model.n + c));
        write_matrix_csv(dir / ("time_attention_" + std::to_string(u) + ".csv"), f.time_attention, header);
      }
    }
    log << "score: attention matrices for " << count << " timestamps -> " << dir.string() << '\n';
  }
  return s;
}

ThresholdSummary cmd_threshold(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::filesystem::path scores_path = require_path(cfg.paths.scores, "scores");
  const std::filesystem::path alarms_path = require_path(cfg.paths.alarms, "alarms");
  const bool validation = cfg.scoring.calibration == "validation";
  if (validation) require_path(cfg.paths.validation_scores, "validation_scores");

  const ScoreSeries scores = read_scores_csv(scores_path);
  const Vector calibration = validation ? read_scores_csv(cfg.paths.validation_scores).total : scores.total;

  ThresholdSummary s;
  s.pot = pot_fit(calibration, cfg.scoring.q, cfg.scoring.init_quantile, cfg.scoring.min_excesses);
  s.alarms = detect(scores, s.pot.threshold);
  write_alarms_csv(alarms_path, s.alarms);
  if (!cfg.paths.pot.empty()) {
    json j = pot_json(s.pot);
    j["calibration"] = cfg.scoring.calibration;
    write_json(cfg.paths.pot, j);
  }
  log << "threshold: t = " << format_double(s.pot.init_threshold) << ", xi = " << format_double(s.pot.xi)
      << ", sigma = " << format_double(s.pot.sigma) << ", z_q = " << format_double(s.pot.threshold) << ", "
      << std::count(s.alarms.begin(), s.alarms.end(), true) << " alarms -> " << alarms_path.string() << '\n';
  return s;
}

EvalReport cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Flags alarms = read_alarms_csv(require_path(cfg.paths.alarms, "alarms"));
  const Flags labels = read_labels_csv(require_path(cfg.paths.labels, "labels"));
  const EvalReport r = evaluate(alarms, labels, cfg.evaluation);
  if (!cfg.paths.report.empty())
    write_json(cfg.paths.report, {{"protocol", r.protocol},
                                  {"precision", r.precision},
                                  {"recall", r.recall},
                                  {"f1", r.f1},
                                  {"tp", r.tp},
                                  {"fp", r.fp},
                                  {"fn", r.fn}});
  log << "evaluate (" << r.protocol << "): precision " << format_double(r.precision) << ", recall "
      << format_double(r.recall) << ", f1 " << format_double(r.f1) << " (tp " << r.tp << ", fp " << r.fp << ", fn "
      << r.fn << ")\n";
  return r;
}

DiagnosisSummary cmd_diagnose(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::filesystem::path scores_path = require_path(cfg.paths.scores, "scores");
  const ScoreSeries scores = read_scores_csv(scores_path);
  const std::vector<std::string> names = stripped_score_names(scores_path);
  if (cfg.evaluation.top > scores.k())
    throw ConfigError("diagnose: evaluation.top = " + std::to_string(cfg.evaluation.top) + " exceeds k = " +
                      std::to_string(scores.k()));
  const std::vector<RootCause> causes = read_root_causes_csv(require_path(cfg.paths.root_causes, "root_causes"), names);
  if (!cfg.paths.labels.empty()) {
    const Flags labels = read_labels_csv(cfg.paths.labels);
    for (std::size_t e = 0; e < causes.size(); ++e)
      for (Index u = causes[e].begin; u <= causes[e].end; ++u)
        if (u >= static_cast<Index>(labels.size()) || !labels[static_cast<std::size_t>(u)])
          throw DataError("diagnose: event " + std::to_string(e) + " covers unlabeled timestamp " + std::to_string(u));
  }

  const DiagnosisSummary d = diagnose_events(scores, causes, cfg.evaluation.top, cfg.evaluation.ndcg_cutoff);
  if (!cfg.paths.diagnosis.empty()) {
    const std::filesystem::path out_path = cfg.paths.diagnosis;
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + out_path.string());
    out << "event,rank,feature,s_i\n";
    for (const EventDiagnosis& e : d.events)
      for (std::size_t r = 0; r < e.ranking.size(); ++r)
        out << e.event << ',' << r + 1 << ',' << names[static_cast<std::size_t>(e.ranking[r])] << ','
            << format_double(e.peak_scores(e.ranking[r])) << '\n';
  }
  for (const EventDiagnosis& e : d.events) {
    log << "event " << e.event << " [" << e.begin << ", " << e.end << "] peak " << e.peak << ":";
    for (Index f : e.ranking) log << ' ' << names[static_cast<std::size_t>(f)];
    log << '\n';
  }
  log << "diagnose: HitRate@100% " << format_double(d.hitrate_100) << ", HitRate@150% "
      << format_double(d.hitrate_150) << ", NDCG@" << cfg.evaluation.ndcg_cutoff << ' ' << format_double(d.ndcg)
      << '\n';
  return d;
}

}  // namespace mtad
