#include "mtad/config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

namespace mtad {

using nlohmann::json;

namespace {

// Reads fields of one section, rejecting keys no field claimed.
class SectionReader {
 public:
  SectionReader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError("config: section \"" + section_ + "\" must be an object");
  }

  template <typename T>
  void field(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    const bool integral_ok = !std::is_integral_v<T> || std::is_same_v<T, bool> || it->is_number_integer();
    const bool bool_ok = !std::is_same_v<T, bool> || it->is_boolean();
    if (!integral_ok || !bool_ok)
      throw ConfigError("config: " + section_ + "." + key + " has the wrong type (" + it->dump() + ")");
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: " + section_ + "." + key + " has the wrong type (" + it->dump() + ")");
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError("config: unknown key \"" + section_ + "." + key + "\"");
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

template <typename Visit>
void visit_model(ModelConfig& c, Visit&& v) {
  v("n", c.n);
  v("k", c.k);
  v("d1", c.d1);
  v("d2", c.d2);
  v("d3", c.d3);
  v("conv_width", c.conv_width);
  v("gamma", c.gamma);
  v("use_feature_gat", c.use_feature_gat);
  v("use_time_gat", c.use_time_gat);
  v("use_forecast", c.use_forecast);
  v("use_reconstruction", c.use_reconstruction);
  v("vae_samples_train", c.vae_samples_train);
  v("vae_samples_infer", c.vae_samples_infer);
  v("recon_sigma_floor", c.recon_sigma_floor);
}

template <typename Visit>
void visit_train(TrainConfig& c, Visit&& v) {
  v("epochs", c.epochs);
  v("learning_rate", c.learning_rate);
  v("batch_size", c.batch_size);
  v("adam_beta1", c.adam_beta1);
  v("adam_beta2", c.adam_beta2);
  v("adam_eps", c.adam_eps);
  v("seed", c.seed);
  v("stride", c.stride);
  v("validation_fraction", c.validation_fraction);
}

template <typename Visit>
void visit_sr(RunConfig& c, Visit&& v) {
  v("enabled", c.sr_enabled);
  v("score_threshold", c.sr.score_threshold);
  v("avg_window", c.sr.avg_window);
  v("estimation_points", c.sr.estimation_points);
  v("replacement_window", c.sr.replacement_window);
}

template <typename Visit>
void visit_scoring(ScoringConfig& c, Visit&& v) {
  v("q", c.q);
  v("init_quantile", c.init_quantile);
  v("min_excesses", c.min_excesses);
  v("calibration", c.calibration);
  v("attention_samples", c.attention_samples);
  v("batch_size", c.batch_size);
}

template <typename Visit>
void visit_evaluation(EvaluationConfig& c, Visit&& v) {
  v("protocol", c.protocol);
  v("delay", c.delay);
  v("top", c.top);
  v("ndcg_cutoff", c.ndcg_cutoff);
}

template <typename Visit>
void visit_paths(PathsConfig& c, Visit&& v) {
  v("train", c.train);
  v("test", c.test);
  v("labels", c.labels);
  v("root_causes", c.root_causes);
  v("checkpoint", c.checkpoint);
  v("losses", c.losses);
  v("scores", c.scores);
  v("validation_scores", c.validation_scores);
  v("pot", c.pot);
  v("alarms", c.alarms);
  v("report", c.report);
  v("diagnosis", c.diagnosis);
  v("attention_dir", c.attention_dir);
}

template <typename Self, typename Fn>
void visit_sections(Self& cfg, Fn&& fn) {
  fn("model", [&](auto&& v) { visit_model(cfg.model, v); });
  fn("train", [&](auto&& v) { visit_train(cfg.train, v); });
  fn("sr", [&](auto&& v) { visit_sr(cfg, v); });
  fn("scoring", [&](auto&& v) { visit_scoring(cfg.scoring, v); });
  fn("evaluation", [&](auto&& v) { visit_evaluation(cfg.evaluation, v); });
  fn("paths", [&](auto&& v) { visit_paths(cfg.paths, v); });
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  sr.validate();
  scoring.validate();
  evaluation.validate();
}

json to_json(const ModelConfig& cfg) {
  json j = json::object();
  ModelConfig copy = cfg;
  visit_model(copy, [&](const char* key, const auto& value) { j[key] = value; });
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  SectionReader r(j, "model");
  visit_model(cfg, [&](const char* key, auto& value) { r.field(key, value); });
  r.finish();
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json j = json::object();
  RunConfig copy = cfg;
  visit_sections(copy, [&](const char* section, auto&& visit) {
    json s = json::object();
    visit([&](const char* key, const auto& value) { s[key] = value; });
    j[section] = s;
  });
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  RunConfig cfg;
  std::set<std::string> known;
  visit_sections(cfg, [&](const char* section, auto&& visit) {
    known.insert(section);
    auto it = j.find(section);
    if (it == j.end()) return;
    SectionReader r(*it, section);
    visit([&](const char* key, auto& value) { r.field(key, value); });
    r.finish();
  });
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("config: unknown section \"" + key + "\"");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  RunConfig cfg = run_config_from_json(j);
  cfg.validate();
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override \"" + assignment + "\" must look like section.key=value");
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json j = to_json(cfg);
  if (!j.contains(section)) throw ConfigError("config: unknown section \"" + section + "\"");
  if (!j[section].contains(key)) throw ConfigError("config: unknown key \"" + section + "." + key + "\"");
  j[section][key] = value;
  cfg = run_config_from_json(j);
}

}  // namespace mtad
