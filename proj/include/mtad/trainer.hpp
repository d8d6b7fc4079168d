#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "mtad/network.hpp"

namespace mtad {

struct TrainConfig {
  Index epochs = 100;
  double learning_rate = 0.001;
  Index batch_size = 64;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  Index stride = 1;
  double validation_fraction = 0.1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct WindowSample {
  Matrix window;  // n x k
  Vector target;  // k, the row right after the window
};

// Windows start at 0, `stride` apart; the window at s pairs with target row s + n.
std::vector<WindowSample> make_windows(const Matrix& series, Index n, Index stride = 1);

// Number of windows make_windows produces; throws DataError when T <= n.
Index window_count(Index rows, Index n, Index stride);

// ---- Adam -------------------------------------------------------------------------

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  Index step = 0;
};

AdamState adam_init(const std::vector<Tensor*>& params);

// One bias-corrected Adam update from the gradients stored on each tensor.
void adam_step(const std::vector<Tensor*>& params, AdamState& state, const TrainConfig& cfg);

std::vector<Tensor*> parameter_list(ModelParams& params);

// ---- training -----------------------------------------------------------------------

struct EpochLoss {
  Index epoch = 0;  // 1-based
  double train = 0;
  double validation = std::numeric_limits<double>::quiet_NaN();  // NaN without a validation split
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLoss> curve;
  Index train_windows = 0;
  Index validation_windows = 0;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

// Mini-batch Adam on the mean joint loss. series must already be cleaned and
// normalized. The last floor(validation_fraction * count) windows are held out
// and evaluated each epoch with zero latent noise.
TrainResult train(const Matrix& series, const ModelConfig& model, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Mean joint loss over samples without touching gradients; eps = 0 for the latent.
double evaluate_loss(const std::vector<WindowSample>& samples, const ModelParams& params, const ModelConfig& model,
                     Index batch_size);

}  // namespace mtad
