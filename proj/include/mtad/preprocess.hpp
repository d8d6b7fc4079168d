#pragma once

// Per-feature min-max normalization and Spectral Residual training-set cleaning.

#include <vector>

#include "mtad/tensor.hpp"

namespace mtad {

struct NormStats {
  Vector min;
  Vector max;

  Index k() const { return min.size(); }
  bool operator==(const NormStats&) const = default;
};

// Column-wise extrema of the training matrix (T x k).
NormStats fit_norm(const Matrix& train);

// (x - min) / (max - min) per column, unclipped; constant training columns map to 0.
Matrix normalize(const Matrix& x, const NormStats& stats);

struct SrConfig {
  double score_threshold = 3.0;
  Index avg_window = 3;         // q: width of the log-spectrum moving average
  Index estimation_points = 21; // kappa: preceding points in the local saliency mean
  Index replacement_window = 5; // unflagged neighbours whose median replaces a flagged value

  void validate() const;
};

// Spectral Residual saliency map, same length as series.
Vector sr_saliency(const Vector& series, const SrConfig& cfg);

// (S(t) - mean(S[t-kappa, t))) / mean(S[t-kappa, t)); 0 where the local mean vanishes.
Vector sr_scores(const Vector& saliency, const SrConfig& cfg);

// true where the local saliency score exceeds the threshold.
std::vector<bool> sr_detect(const Vector& series, const SrConfig& cfg);

// Replaces flagged entries of each column by the median of its nearest
// unflagged neighbours, searching outward (left before right at equal distance).
Matrix clean_with_masks(const Matrix& train, const std::vector<std::vector<bool>>& masks, Index replacement_window);

// Detect with SR per column, then clean_with_masks.
Matrix clean(const Matrix& train, const SrConfig& cfg);

}  // namespace mtad
