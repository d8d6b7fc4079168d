#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtad/network.hpp"

namespace mtad {

struct ScoringConfig {
  double q = 1e-3;
  double init_quantile = 0.98;
  Index min_excesses = 20;
  std::string calibration = "test";  // "test" | "validation"
  Index attention_samples = 0;       // timestamps whose attention matrices are exported
  Index batch_size = 64;

  void validate() const;
  bool operator==(const ScoringConfig&) const = default;
};

// Per-timestamp scores for rows offset .. offset + size() - 1 of a stream.
struct ScoreSeries {
  Index offset = 0;
  Matrix feature_scores;  // rows x k, s_i
  Vector total;           // rows, sum of s_i
  Matrix forecast_sq;     // rows x k, (forecast - x)^2
  Matrix recon_prob;      // rows x k, p_i

  Index size() const { return total.size(); }
  Index k() const { return feature_scores.cols(); }
};

// s_i = ((xhat_i - x_i)^2 + gamma (1 - p_i)) / (1 + gamma).
Vector combine_scores(const Vector& forecast_sq, const Vector& recon_prob, double gamma);

// Same, honouring the ablation flags: without the forecasting head s_i = 1 - p_i,
// without the reconstruction head s_i = (xhat_i - x_i)^2.
Vector combine_scores(const Vector& forecast_sq, const Vector& recon_prob, double gamma, const ModelConfig& cfg);

// Timestamp u >= n is scored from the forecast of rows [u-n, u) and from the
// reconstruction of row u as the last row of the window [u-n+1, u+1).
// p_i averages vae_samples_infer latent draws seeded by noise_seed.
ScoreSeries score_stream(const Matrix& stream, const ModelParams& params, const ModelConfig& cfg, double gamma,
                         std::uint64_t noise_seed, Index batch_size = 64);

// ---- Peaks-Over-Threshold -----------------------------------------------------------

struct GpdFit {
  double sigma = 0;
  double xi = 0;
  double log_likelihood = 0;
};

// Log-likelihood of excesses y >= 0 under GPD(sigma, xi); -inf outside the support.
double gpd_log_likelihood(const Vector& excesses, double sigma, double xi);

// Maximum-likelihood GPD fit via Grimshaw's one-dimensional root search.
GpdFit fit_gpd(const Vector& excesses);

struct PotModel {
  double init_quantile = 0;
  double init_threshold = 0;  // t
  Index excess_count = 0;     // N_t
  Index sample_size = 0;      // N
  double xi = 0;
  double sigma = 0;
  double q = 0;
  double threshold = 0;  // z_q
};

// Linear-interpolation empirical quantile of an unsorted sample.
double empirical_quantile(const Vector& values, double p);

PotModel pot_fit(const Vector& scores, double q = 1e-3, double init_quantile = 0.98, Index min_excesses = 20);

// Alarm per stream row: strict total > threshold, false for the unscored head.
std::vector<bool> detect(const ScoreSeries& scores, double threshold);
std::vector<bool> detect(const Vector& totals, Index offset, double threshold);

}  // namespace mtad
