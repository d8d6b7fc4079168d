#pragma once

// The six pipeline stages behind the command-line tool. Each validates its
// whole configuration before writing anything.

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "mtad/checkpoint.hpp"
#include "mtad/config.hpp"
#include "mtad/synth.hpp"

namespace mtad {

// Writes train.csv, test.csv, test_labels.csv and root_causes.csv into out_dir.
SynthDataset cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

struct TrainSummary {
  TrainResult result;
  Checkpoint checkpoint;
  std::vector<std::vector<bool>> cleaned;  // per feature, rows replaced by cleaning
};

// fit_norm -> normalize -> clean -> make_windows -> train -> save checkpoint (+ loss CSV).
TrainSummary cmd_train(const RunConfig& cfg, std::ostream& log);

struct ScoreSummary {
  ScoreSeries test;
  std::optional<ScoreSeries> validation;
};

// Scores paths.test with the checkpoint; with scoring.calibration == "validation"
// also scores the held-out tail of paths.train into paths.validation_scores.
ScoreSummary cmd_score(const RunConfig& cfg, std::ostream& log);

struct ThresholdSummary {
  PotModel pot;
  Flags alarms;
};

ThresholdSummary cmd_threshold(const RunConfig& cfg, std::ostream& log);

EvalReport cmd_evaluate(const RunConfig& cfg, std::ostream& log);

DiagnosisSummary cmd_diagnose(const RunConfig& cfg, std::ostream& log);

// Training rows after normalization and (optional) cleaning, as the trainer sees them.
Matrix prepare_training_matrix(const Matrix& raw, const NormStats& norm, const RunConfig& cfg,
                               std::vector<std::vector<bool>>* masks = nullptr);

}  // namespace mtad
