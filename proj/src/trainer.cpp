#include "mtad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mtad {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (epochs < 1) fail("epochs must be >= 1, got " + std::to_string(epochs));
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) fail("learning_rate must be finite and > 0");
  if (batch_size < 1) fail("batch_size must be >= 1, got " + std::to_string(batch_size));
  if (!(adam_beta1 >= 0 && adam_beta1 < 1)) fail("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0 && adam_beta2 < 1)) fail("adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0)) fail("adam_eps must be > 0");
  if (stride < 1) fail("stride must be >= 1, got " + std::to_string(stride));
  if (!(validation_fraction >= 0 && validation_fraction < 1)) fail("validation_fraction must lie in [0, 1)");
}

Index window_count(Index rows, Index n, Index stride) {
  if (n < 1 || stride < 1) throw ConfigError("windows: n and stride must be >= 1");
  if (rows <= n)
    throw DataError("windows: series has " + std::to_string(rows) + " rows but a window of " + std::to_string(n) +
                    " plus one target row needs at least " + std::to_string(n + 1));
  return (rows - n - 1) / stride + 1;
}

std::vector<WindowSample> make_windows(const Matrix& series, Index n, Index stride) {
  const Index count = window_count(series.rows(), n, stride);
  std::vector<WindowSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const Index s = i * stride;
    out.push_back({series.middleRows(s, n), series.row(s + n).transpose()});
  }
  return out;
}

// ---- Adam ---------------------------------------------------------------------------

AdamState adam_init(const std::vector<Tensor*>& params) {
  AdamState state;
  for (const Tensor* p : params) {
    state.m.push_back(Matrix::Zero(p->data().rows(), p->data().cols()));
    state.v.push_back(Matrix::Zero(p->data().rows(), p->data().cols()));
  }
  return state;
}

void adam_step(const std::vector<Tensor*>& params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw StateError("adam: optimizer state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                     std::to_string(params.size()));
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Matrix& g = p.grad();
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    if (g.rows() != m.rows() || g.cols() != m.cols())
      throw StateError("adam: tensor " + std::to_string(i) + " changed shape from " + shape_string(m.rows(), m.cols()) +
                       " to " + shape_string(g.rows(), g.cols()));
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    p.data().array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
  }
}

std::vector<Tensor*> parameter_list(ModelParams& params) {
  std::vector<Tensor*> out;
  params.for_each([&](const char*, Tensor& t) { out.push_back(&t); });
  return out;
}

// ---- training -------------------------------------------------------------------------

namespace {

struct Batch {
  std::vector<Matrix> windows;
  Matrix flat;     // B x (n*k)
  Matrix targets;  // B x k
};

Batch gather_batch(const std::vector<WindowSample>& samples, std::span<const std::size_t> idx, Index repeats) {
  Batch b;
  const Index rows = static_cast<Index>(idx.size()) * repeats;
  const Index n = samples[idx[0]].window.rows(), k = samples[idx[0]].window.cols();
  b.windows.reserve(static_cast<std::size_t>(rows));
  b.flat.resize(rows, n * k);
  b.targets.resize(rows, k);
  Index r = 0;
  for (std::size_t i : idx)
    for (Index s = 0; s < repeats; ++s, ++r) {
      const WindowSample& w = samples[i];
      b.windows.push_back(w.window);
      b.flat.row(r) = w.window.reshaped<Eigen::RowMajor>(1, n * k);
      b.targets.row(r) = w.target.transpose();
    }
  return b;
}

Matrix standard_normal(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = dist(rng);
  return out;
}

}  // namespace

double evaluate_loss(const std::vector<WindowSample>& samples, const ModelParams& params, const ModelConfig& model,
                     Index batch_size) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t len = std::min(static_cast<std::size_t>(batch_size), order.size() - start);
    const Batch b = gather_batch(samples, std::span(order).subspan(start, len), 1);
    Tape tape;
    const ParamVars p = bind_constants(tape, params);
    const BatchForward out =
        forward_batch(tape, p, model, b.windows, Matrix::Zero(static_cast<Index>(len), model.d3));
    total += sum(loss_joint(out, tape.constant(b.flat), tape.constant(b.targets), model)).scalar();
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train(const Matrix& series, const ModelConfig& model, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  model.validate();
  cfg.validate();
  if (series.cols() != model.k)
    throw ConfigError("train: data has " + std::to_string(series.cols()) + " features but the model expects k = " +
                      std::to_string(model.k));
  if (!series.allFinite()) throw DataError("train: training matrix contains non-finite values");

  std::vector<WindowSample> samples = make_windows(series, model.n, cfg.stride);
  const auto total = static_cast<Index>(samples.size());
  const auto held_out = static_cast<Index>(std::floor(cfg.validation_fraction * static_cast<double>(total)));
  if (total - held_out < 1) throw DataError("train: no training windows remain after the validation split");
  std::vector<WindowSample> validation(std::make_move_iterator(samples.end() - held_out),
                                       std::make_move_iterator(samples.end()));
  samples.resize(static_cast<std::size_t>(total - held_out));

  TrainResult result;
  result.train_windows = total - held_out;
  result.validation_windows = held_out;
  result.params = init_params(model, cfg.seed);
  result.params.set_requires_grad(true);
  const std::vector<Tensor*> tensors = parameter_list(result.params);
  AdamState adam = adam_init(tensors);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5348554646ULL);
  std::mt19937_64 noise_rng(cfg.seed ^ 0x4e4f495345ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_total = 0.0;
    Index batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_no) {
      const std::size_t len = std::min(batch, order.size() - start);
      const Batch b = gather_batch(samples, std::span(order).subspan(start, len), model.vae_samples_train);
      const Index rows = static_cast<Index>(b.windows.size());
      double loss_value = 0.0;
      try {
        result.params.zero_grad();
        Tape tape;
        const ParamVars p = bind_params(tape, result.params);
        const BatchForward out = forward_batch(tape, p, model, b.windows, standard_normal(noise_rng, rows, model.d3));
        Var loss = mean(loss_joint(out, tape.constant(b.flat), tape.constant(b.targets), model));
        loss_value = loss.scalar();
        tape.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError("train: non-finite value at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no) + ": " + e.what());
      }
      if (!std::isfinite(loss_value))
        throw NumericError("train: loss is not finite at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      adam_step(tensors, adam, cfg);
      epoch_total += loss_value * static_cast<double>(len);
    }
    EpochLoss row;
    row.epoch = epoch;
    row.train = epoch_total / static_cast<double>(samples.size());
    if (!validation.empty()) row.validation = evaluate_loss(validation, result.params, model, cfg.batch_size);
    result.curve.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.params.set_requires_grad(false);
  return result;
}

}  // namespace mtad
