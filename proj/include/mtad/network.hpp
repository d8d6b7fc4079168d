#pragma once

// Forecasting + reconstruction network over a sliding window:
//
//   conv1d(x) -> c                       n x k
//   feature attention(c)^T -> f          n x k
//   time attention(c) -> t               n x k
//   [c | f | t] -> GRU -> last hidden    d1
//   last hidden -> 3-layer MLP           forecast of the next row (k)
//   last hidden -> VAE                   Gaussian reconstruction of the window (n x k)

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mtad/gat.hpp"
#include "mtad/tensor.hpp"

namespace mtad {

inline constexpr Index kConvWidth = 7;

struct ModelConfig {
  Index n = 100;
  Index k = 1;
  Index d1 = 300;
  Index d2 = 300;
  Index d3 = 300;
  Index conv_width = kConvWidth;
  double gamma = 0.8;
  bool use_feature_gat = true;
  bool use_time_gat = true;
  bool use_forecast = true;
  bool use_reconstruction = true;
  Index vae_samples_train = 1;
  Index vae_samples_infer = 16;
  double recon_sigma_floor = 1e-3;

  // Throws ConfigError on the first violated invariant.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
  Tensor conv_kernel;  // {7, k, k}
  Tensor conv_bias;    // {k}
  Tensor feature_w;    // {2n}
  Tensor time_w;       // {2k}

  Tensor gru_wz, gru_uz, gru_bz;  // {3k, d1}, {d1, d1}, {d1}
  Tensor gru_wr, gru_ur, gru_br;
  Tensor gru_wc, gru_uc, gru_bc;

  Tensor fc1_w, fc1_b;  // {d1, d2}
  Tensor fc2_w, fc2_b;  // {d2, d2}
  Tensor fc3_w, fc3_b;  // {d2, k}

  Tensor enc_mu_w, enc_mu_b;                // {d1, d3}
  Tensor enc_log_sigma_w, enc_log_sigma_b;  // {d1, d3}
  Tensor dec_hidden_w, dec_hidden_b;        // {d3, d2}
  Tensor dec_mu_w, dec_mu_b;                // {d2, n*k}
  Tensor dec_log_sigma_w, dec_log_sigma_b;  // {d2, n*k}

  // Visits every tensor in a fixed order with its stable name.
  template <typename F>
  void for_each(F&& f) {
    for_each_impl(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    for_each_impl(*this, f);
  }

  void zero_grad();
  void set_requires_grad(bool on);
  Index parameter_count() const;

 private:
  template <typename Self, typename F>
  static void for_each_impl(Self& p, F& f) {
    f("conv_kernel", p.conv_kernel);
    f("conv_bias", p.conv_bias);
    f("feature_w", p.feature_w);
    f("time_w", p.time_w);
    f("gru_wz", p.gru_wz);
    f("gru_uz", p.gru_uz);
    f("gru_bz", p.gru_bz);
    f("gru_wr", p.gru_wr);
    f("gru_ur", p.gru_ur);
    f("gru_br", p.gru_br);
    f("gru_wc", p.gru_wc);
    f("gru_uc", p.gru_uc);
    f("gru_bc", p.gru_bc);
    f("fc1_w", p.fc1_w);
    f("fc1_b", p.fc1_b);
    f("fc2_w", p.fc2_w);
    f("fc2_b", p.fc2_b);
    f("fc3_w", p.fc3_w);
    f("fc3_b", p.fc3_b);
    f("enc_mu_w", p.enc_mu_w);
    f("enc_mu_b", p.enc_mu_b);
    f("enc_log_sigma_w", p.enc_log_sigma_w);
    f("enc_log_sigma_b", p.enc_log_sigma_b);
    f("dec_hidden_w", p.dec_hidden_w);
    f("dec_hidden_b", p.dec_hidden_b);
    f("dec_mu_w", p.dec_mu_w);
    f("dec_mu_b", p.dec_mu_b);
    f("dec_log_sigma_w", p.dec_log_sigma_w);
    f("dec_log_sigma_b", p.dec_log_sigma_b);
  }
};

struct ParamShape {
  std::string name;
  Shape shape;
};

// Shapes of every parameter tensor, in for_each order.
std::vector<ParamShape> param_shapes(const ModelConfig& cfg);

// Zero-valued parameters with the shapes implied by cfg.
ModelParams make_params(const ModelConfig& cfg);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor; fan_in is the input
// width of the owning layer (2m for attention weights, 7k for the convolution).
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Throws ConfigError if params do not have the shapes cfg implies.
void check_params(const ModelParams& params, const ModelConfig& cfg);

// ---- tape-level building blocks -------------------------------------------

struct GruVars {
  Var wz, uz, bz;
  Var wr, ur, br;
  Var wc, uc, bc;
};

// One GRU step over a batch: x is B x in, h is B x d1.
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   c = tanh(x Wc + (r * h) Uc + bc)
//   h' = (1 - z) * h + z * c
Var gru_cell(Var x, Var h, const GruVars& p);

struct ParamVars {
  Var conv_kernel, conv_bias, feature_w, time_w;
  GruVars gru;
  Var fc1_w, fc1_b, fc2_w, fc2_b, fc3_w, fc3_b;
  Var enc_mu_w, enc_mu_b, enc_log_sigma_w, enc_log_sigma_b;
  Var dec_hidden_w, dec_hidden_b, dec_mu_w, dec_mu_b, dec_log_sigma_w, dec_log_sigma_b;
};

// Leaves whose gradients accumulate into params.
ParamVars bind_params(Tape& tape, ModelParams& params);
// Same values recorded as constants; nothing flows back.
ParamVars bind_constants(Tape& tape, const ModelParams& params);

struct Decoded {
  Var mu_x;     // B x (n*k), row-major window layout
  Var sigma_x;  // B x (n*k), >= recon_sigma_floor
};

struct BatchForward {
  Var fused;        // (B*n) x 3k, window-major
  Var hidden;       // B x d1, last GRU state
  Var forecast;     // B x k
  Var mu_z;         // B x d3
  Var log_sigma_z;  // B x d3
  Var z;            // B x d3
  Decoded recon;
  std::vector<Matrix> feature_attention;  // per window k x k, if requested
  std::vector<Matrix> time_attention;     // per window n x n, if requested
};

// eps: B x d3 standard-normal noise for the reparameterized latent sample.
BatchForward forward_batch(Tape& tape, const ParamVars& p, const ModelConfig& cfg, std::span<const Matrix> windows,
                           const Matrix& eps, bool keep_attention = false);

Decoded decode(const ParamVars& p, const ModelConfig& cfg, Var z);

// Per-window losses, B x 1.
Var loss_forecast(Var forecast, Var target);
Var loss_kl(Var mu_z, Var log_sigma_z);
Var loss_nll(const Decoded& recon, Var x_flat);
Var loss_reconstruction(const BatchForward& out, Var x_flat);
Var loss_joint(const BatchForward& out, Var x_flat, Var target, const ModelConfig& cfg);

// ---- value-level API --------------------------------------------------------

struct ForwardOutput {
  Vector forecast;        // k
  Matrix mu_x;            // n x k
  Matrix sigma_x;         // n x k
  Vector mu_z;            // d3
  Vector sigma_z;         // d3
  Matrix feature_attention;  // k x k
  Matrix time_attention;     // n x n
  Matrix fused;              // n x 3k
};

// eps has length d3; zero noise gives the decoder's response at the latent mean.
ForwardOutput forward(const Matrix& window, const ModelParams& params, const ModelConfig& cfg, const Vector& eps);

double loss_forecast(const Vector& forecast, const Vector& target);
double loss_kl(const Vector& mu_z, const Vector& sigma_z);
double loss_nll(const Matrix& mu_x, const Matrix& sigma_x, const Matrix& window);

struct ReconstructionLoss {
  double nll = 0;
  double kl = 0;
  double total = 0;
};

ReconstructionLoss loss_reconstruction(const ForwardOutput& out, const Matrix& window);
double loss_joint(const ForwardOutput& out, const Matrix& window, const Vector& target, const ModelConfig& cfg);

// p_i = mean over samples of exp(-(x_i - mu_i)^2 / (2 sigma_i^2)); one entry of
// mu/sigma rows per decoder sample.
Vector reconstruction_probability(const Matrix& mu_rows, const Matrix& sigma_rows, const Vector& observed);
Vector reconstruction_probability(const ForwardOutput& out, const Vector& observed_last);

}  // namespace mtad
