#pragma once

// JSON run configuration. Every section and key is optional; unknown keys are rejected.
//
//   {
//     "model":      { "n": 100, "k": 4, "gamma": 0.8, "use_time_gat": false, ... },
//     "train":      { "epochs": 30, "batch_size": 64, "seed": 7, ... },
//     "sr":         { "enabled": true, "score_threshold": 3.0, ... },
//     "scoring":    { "q": 0.001, "init_quantile": 0.98, "calibration": "test", ... },
//     "evaluation": { "protocol": "point-adjust", "delay": 7, "top": 8, ... },
//     "paths":      { "train": "data/train.csv", "checkpoint": "run/model.ckpt", ... }
//   }

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mtad/evaluation.hpp"
#include "mtad/network.hpp"
#include "mtad/preprocess.hpp"
#include "mtad/scoring.hpp"
#include "mtad/trainer.hpp"

namespace mtad {

struct PathsConfig {
  std::string train;
  std::string test;
  std::string labels;
  std::string root_causes;
  std::string checkpoint;
  std::string losses;
  std::string scores;
  std::string validation_scores;
  std::string pot;
  std::string alarms;
  std::string report;
  std::string diagnosis;
  std::string attention_dir;

  bool operator==(const PathsConfig&) const = default;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SrConfig sr;
  bool sr_enabled = true;
  ScoringConfig scoring;
  EvaluationConfig evaluation;
  PathsConfig paths;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

// Reads and validates; a missing or malformed file is a ConfigError naming the path.
RunConfig load_run_config(const std::filesystem::path& path);

// Applies "section.key=value"; the value is parsed as JSON, falling back to a plain string.
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace mtad
