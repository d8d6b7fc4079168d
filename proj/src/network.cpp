#include "mtad/network.hpp"

#include <cmath>
#include <numbers>

namespace mtad {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (n < 2) fail("window length n must be >= 2, got " + std::to_string(n));
  if (k < 1) fail("feature count k must be >= 1, got " + std::to_string(k));
  if (d1 < 1 || d2 < 1 || d3 < 1) fail("hidden sizes d1, d2, d3 must be >= 1");
  if (conv_width != kConvWidth) fail("convolution kernel width must be 7, got " + std::to_string(conv_width));
  if (!(gamma >= 0) || !std::isfinite(gamma)) fail("gamma must be finite and >= 0");
  if (!use_forecast && !use_reconstruction) fail("at least one of use_forecast / use_reconstruction must be true");
  if (vae_samples_train < 1) fail("vae_samples_train must be >= 1");
  if (vae_samples_infer < 1) fail("vae_samples_infer must be >= 1");
  if (!(recon_sigma_floor > 0)) fail("recon_sigma_floor must be > 0");
}

std::vector<ParamShape> param_shapes(const ModelConfig& cfg) {
  const Index n = cfg.n, k = cfg.k, d1 = cfg.d1, d2 = cfg.d2, d3 = cfg.d3;
  return {
      {"conv_kernel", {cfg.conv_width, k, k}},
      {"conv_bias", {k}},
      {"feature_w", {2 * n}},
      {"time_w", {2 * k}},
      {"gru_wz", {3 * k, d1}},
      {"gru_uz", {d1, d1}},
      {"gru_bz", {d1}},
      {"gru_wr", {3 * k, d1}},
      {"gru_ur", {d1, d1}},
      {"gru_br", {d1}},
      {"gru_wc", {3 * k, d1}},
      {"gru_uc", {d1, d1}},
      {"gru_bc", {d1}},
      {"fc1_w", {d1, d2}},
      {"fc1_b", {d2}},
      {"fc2_w", {d2, d2}},
      {"fc2_b", {d2}},
      {"fc3_w", {d2, k}},
      {"fc3_b", {k}},
      {"enc_mu_w", {d1, d3}},
      {"enc_mu_b", {d3}},
      {"enc_log_sigma_w", {d1, d3}},
      {"enc_log_sigma_b", {d3}},
      {"dec_hidden_w", {d3, d2}},
      {"dec_hidden_b", {d2}},
      {"dec_mu_w", {d2, n * k}},
      {"dec_mu_b", {n * k}},
      {"dec_log_sigma_w", {d2, n * k}},
      {"dec_log_sigma_b", {n * k}},
  };
}

ModelParams make_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  const auto shapes = param_shapes(cfg);
  std::size_t i = 0;
  p.for_each([&](const char*, Tensor& t) { t = Tensor(shapes[i++].shape); });
  return p;
}

namespace {

// Input width of the layer each tensor belongs to.
Index fan_in(const std::string& name, const ModelConfig& cfg) {
  if (name.starts_with("conv")) return cfg.conv_width * cfg.k;
  if (name == "feature_w") return 2 * cfg.n;
  if (name == "time_w") return 2 * cfg.k;
  if (name.starts_with("gru_w")) return 3 * cfg.k;
  if (name.starts_with("gru")) return cfg.d1;
  if (name.starts_with("fc1") || name.starts_with("enc")) return cfg.d1;
  if (name.starts_with("dec_hidden")) return cfg.d3;
  return cfg.d2;  // fc2, fc3, dec_mu, dec_log_sigma
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = make_params(cfg);
  std::mt19937_64 rng(seed);
  p.for_each([&](const char* name, Tensor& t) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(name, cfg)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < t.size(); ++i) t.data().data()[i] = dist(rng);
  });
  return p;
}

void check_params(const ModelParams& params, const ModelConfig& cfg) {
  const auto shapes = param_shapes(cfg);
  std::size_t i = 0;
  params.for_each([&](const char* name, const Tensor& t) {
    if (t.shape() != shapes[i].shape)
      throw ConfigError(std::string("parameter ") + name + " has shape " + shape_string(t.shape()) +
                        " but the model config implies " + shape_string(shapes[i].shape));
    ++i;
  });
}

void ModelParams::zero_grad() {
  for_each([](const char*, Tensor& t) { t.zero_grad(); });
}

void ModelParams::set_requires_grad(bool on) {
  for_each([on](const char*, Tensor& t) { t.set_requires_grad(on); });
}

Index ModelParams::parameter_count() const {
  Index total = 0;
  for_each([&](const char*, const Tensor& t) { total += t.size(); });
  return total;
}

// ---- GRU ------------------------------------------------------------------

Var gru_cell(Var x, Var h, const GruVars& p) {
  Tape& t = *x.tape;
  const Index batch = x.rows();
  const Index d1 = p.uz.rows();
  if (h.rows() != batch || h.cols() != d1)
    throw DimensionError("gru_cell: hidden state " + shape_string(h.rows(), h.cols()) + " does not match " +
                         shape_string(batch, d1));
  if (p.wz.rows() != x.cols())
    throw DimensionError("gru_cell: input " + shape_string(x.rows(), x.cols()) + " does not match weight " +
                         shape_string(p.wz.rows(), p.wz.cols()));

  const Matrix& xv = x.value();
  const Matrix& hv = h.value();

  Matrix z(batch, d1), r(batch, d1), c(batch, d1);
  z.noalias() = xv * p.wz.value();
  z.noalias() += hv * p.uz.value();
  z.rowwise() += p.bz.value().row(0);
  z = (1.0 / (1.0 + (-z.array()).exp())).matrix();

  r.noalias() = xv * p.wr.value();
  r.noalias() += hv * p.ur.value();
  r.rowwise() += p.br.value().row(0);
  r = (1.0 / (1.0 + (-r.array()).exp())).matrix();

  Matrix rh = r.cwiseProduct(hv);
  c.noalias() = xv * p.wc.value();
  c.noalias() += rh * p.uc.value();
  c.rowwise() += p.bc.value().row(0);
  // tanh(a) = 1 - 2 / (exp(2a) + 1), vectorized and saturating cleanly at +-1
  c = (1.0 - 2.0 / ((2.0 * c.array()).exp() + 1.0)).matrix();

  Matrix out = hv + z.cwiseProduct(c - hv);

  const std::size_t xi = x.id, hi = h.id;
  const GruVars ids = p;
  return t.record("gru_cell", std::move(out), {x, h, p.wz, p.uz, p.bz, p.wr, p.ur, p.br, p.wc, p.uc, p.bc},
                  [xi, hi, ids, z = std::move(z), r = std::move(r), c = std::move(c), rh = std::move(rh)](
                      Tape& tp, const Matrix& g) {
                    const Matrix& xv = tp.value(xi);
                    const Matrix& hv = tp.value(hi);

                    const Matrix dz = g.cwiseProduct(c - hv);
                    const Matrix dc = g.cwiseProduct(z);
                    Matrix dh = g - g.cwiseProduct(z);

                    const Matrix da_c = (dc.array() * (1.0 - c.array().square())).matrix();
                    const Matrix drh = da_c * tp.value(ids.uc).transpose();
                    const Matrix dr = drh.cwiseProduct(hv);
                    dh += drh.cwiseProduct(r);
                    const Matrix da_r = (dr.array() * r.array() * (1.0 - r.array())).matrix();
                    const Matrix da_z = (dz.array() * z.array() * (1.0 - z.array())).matrix();

                    auto weight_grads = [&](const Var& w, const Var& u, const Var& b, const Matrix& da,
                                            const Matrix& u_input) {
                      if (tp.needs_grad(w)) tp.accumulate(w.id, xv.transpose() * da);
                      if (tp.needs_grad(u)) tp.accumulate(u.id, u_input.transpose() * da);
                      if (tp.needs_grad(b)) tp.accumulate(b.id, da.colwise().sum());
                    };
                    weight_grads(ids.wz, ids.uz, ids.bz, da_z, hv);
                    weight_grads(ids.wr, ids.ur, ids.br, da_r, hv);
                    weight_grads(ids.wc, ids.uc, ids.bc, da_c, rh);

                    if (tp.needs_grad(hi)) {
                      dh.noalias() += da_z * tp.value(ids.uz).transpose();
                      dh.noalias() += da_r * tp.value(ids.ur).transpose();
                      tp.accumulate(hi, dh);
                    }
                    if (tp.needs_grad(xi)) {
                      Matrix dx = da_z * tp.value(ids.wz).transpose();
                      dx.noalias() += da_r * tp.value(ids.wr).transpose();
                      dx.noalias() += da_c * tp.value(ids.wc).transpose();
                      tp.accumulate(xi, dx);
                    }
                  });
}

// ---- parameter binding ------------------------------------------------------

namespace {

template <typename Params, typename Bind>
ParamVars bind_with(Params& p, Bind bind) {
  ParamVars v;
  v.conv_kernel = bind(p.conv_kernel);
  v.conv_bias = bind(p.conv_bias);
  v.feature_w = bind(p.feature_w);
  v.time_w = bind(p.time_w);
  v.gru = GruVars{bind(p.gru_wz), bind(p.gru_uz), bind(p.gru_bz), bind(p.gru_wr), bind(p.gru_ur),
                  bind(p.gru_br), bind(p.gru_wc), bind(p.gru_uc), bind(p.gru_bc)};
  v.fc1_w = bind(p.fc1_w);
  v.fc1_b = bind(p.fc1_b);
  v.fc2_w = bind(p.fc2_w);
  v.fc2_b = bind(p.fc2_b);
  v.fc3_w = bind(p.fc3_w);
  v.fc3_b = bind(p.fc3_b);
  v.enc_mu_w = bind(p.enc_mu_w);
  v.enc_mu_b = bind(p.enc_mu_b);
  v.enc_log_sigma_w = bind(p.enc_log_sigma_w);
  v.enc_log_sigma_b = bind(p.enc_log_sigma_b);
  v.dec_hidden_w = bind(p.dec_hidden_w);
  v.dec_hidden_b = bind(p.dec_hidden_b);
  v.dec_mu_w = bind(p.dec_mu_w);
  v.dec_mu_b = bind(p.dec_mu_b);
  v.dec_log_sigma_w = bind(p.dec_log_sigma_w);
  v.dec_log_sigma_b = bind(p.dec_log_sigma_b);
  return v;
}

// Tensors are stored with shape[0] rows; the tape wants weight matrices as
// in x out and biases as 1 x out, which is exactly that storage for rank <= 2.
// The convolution kernel {7, k, k} is stored 7 x (k*k) as conv1d expects.
Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

}  // namespace

ParamVars bind_params(Tape& tape, ModelParams& params) {
  return bind_with(params, [&](Tensor& t) { return tape.leaf(t); });
}

ParamVars bind_constants(Tape& tape, const ModelParams& params) {
  return bind_with(params, [&](const Tensor& t) { return tape.constant(t.data()); });
}

// ---- forward ------------------------------------------------------------------

Decoded decode(const ParamVars& p, const ModelConfig& cfg, Var z) {
  Var hidden = relu(linear(z, p.dec_hidden_w, p.dec_hidden_b));
  Var mu_x = linear(hidden, p.dec_mu_w, p.dec_mu_b);
  Var sigma_x = clamp_min(exp(linear(hidden, p.dec_log_sigma_w, p.dec_log_sigma_b)), cfg.recon_sigma_floor);
  return {mu_x, sigma_x};
}

BatchForward forward_batch(Tape& tape, const ParamVars& p, const ModelConfig& cfg, std::span<const Matrix> windows,
                           const Matrix& eps, bool keep_attention) {
  const Index batch = static_cast<Index>(windows.size());
  if (batch == 0) throw DimensionError("forward: empty batch");
  if (eps.rows() != batch || eps.cols() != cfg.d3)
    throw DimensionError("forward: noise " + shape_string(eps.rows(), eps.cols()) + " does not match " +
                         shape_string(batch, cfg.d3));
  if (p.feature_w.cols() != 2 * cfg.n || p.time_w.cols() != 2 * cfg.k || p.conv_bias.cols() != cfg.k)
    throw ConfigError("forward: parameters do not match the model config");

  BatchForward out;
  std::vector<Var> fused_windows;
  fused_windows.reserve(windows.size());
  for (const Matrix& w : windows) {
    if (w.rows() != cfg.n || w.cols() != cfg.k)
      throw DimensionError("forward: window " + shape_string(w.rows(), w.cols()) + " does not match n x k = " +
                           shape_string(cfg.n, cfg.k));
    Var x = tape.constant(w);
    Var c = conv1d(x, p.conv_kernel, p.conv_bias);
    Var f = c;
    Var tv = c;
    if (cfg.use_feature_gat) {
      GatVars g = feature_gat(c, p.feature_w);
      f = transpose(g.h);
      if (keep_attention) out.feature_attention.push_back(g.alpha.value());
    }
    if (cfg.use_time_gat) {
      GatVars g = time_gat(c, p.time_w);
      tv = g.h;
      if (keep_attention) out.time_attention.push_back(g.alpha.value());
    }
    const Var parts[] = {c, f, tv};
    fused_windows.push_back(concat_cols(parts));
  }
  out.fused = concat_rows(fused_windows);

  // Reorder to time-major so each GRU step reads one contiguous block of B rows.
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(batch * cfg.n));
  for (Index step = 0; step < cfg.n; ++step)
    for (Index b = 0; b < batch; ++b) order.push_back(b * cfg.n + step);
  Var time_major = gather_rows(out.fused, std::move(order));

  Var h = tape.constant(Matrix::Zero(batch, cfg.d1));
  for (Index step = 0; step < cfg.n; ++step) h = gru_cell(slice_rows(time_major, step * batch, batch), h, p.gru);
  out.hidden = h;

  Var f1 = relu(linear(h, p.fc1_w, p.fc1_b));
  Var f2 = relu(linear(f1, p.fc2_w, p.fc2_b));
  out.forecast = linear(f2, p.fc3_w, p.fc3_b);

  out.mu_z = linear(h, p.enc_mu_w, p.enc_mu_b);
  out.log_sigma_z = linear(h, p.enc_log_sigma_w, p.enc_log_sigma_b);
  out.z = out.mu_z + mul(exp(out.log_sigma_z), tape.constant(eps));
  out.recon = decode(p, cfg, out.z);
  return out;
}

// ---- losses -------------------------------------------------------------------

Var loss_forecast(Var forecast, Var target) {
  Var err = forecast - target;
  return sqrt(row_sum(mul(err, err)));
}

Var loss_kl(Var mu_z, Var log_sigma_z) {
  // 0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma)
  Var sigma_sq = exp(mul(log_sigma_z, 2.0));
  Var terms = mul(mu_z, mu_z) + sigma_sq - mul(log_sigma_z, 2.0);
  return mul(add(row_sum(terms), -static_cast<double>(mu_z.cols())), 0.5);
}

Var loss_nll(const Decoded& recon, Var x_flat) {
  // sum(0.5 log 2pi + log sigma + (x - mu)^2 / (2 sigma^2))
  Var log_sigma = log(recon.sigma_x);
  Var inv_var = exp(mul(log_sigma, -2.0));
  Var diff = x_flat - recon.mu_x;
  Var terms = log_sigma + mul(mul(mul(diff, diff), inv_var), 0.5);
  const double constant = 0.5 * std::log(2.0 * std::numbers::pi) * static_cast<double>(x_flat.cols());
  return add(row_sum(terms), constant);
}

Var loss_reconstruction(const BatchForward& out, Var x_flat) {
  return loss_nll(out.recon, x_flat) + loss_kl(out.mu_z, out.log_sigma_z);
}

Var loss_joint(const BatchForward& out, Var x_flat, Var target, const ModelConfig& cfg) {
  if (!cfg.use_forecast && !cfg.use_reconstruction)
    throw ConfigError("joint loss needs at least one of the forecasting / reconstruction terms");
  if (!cfg.use_reconstruction) return loss_forecast(out.forecast, target);
  if (!cfg.use_forecast) return loss_reconstruction(out, x_flat);
  return loss_forecast(out.forecast, target) + loss_reconstruction(out, x_flat);
}

// ---- value-level API ----------------------------------------------------------

ForwardOutput forward(const Matrix& window, const ModelParams& params, const ModelConfig& cfg, const Vector& eps) {
  cfg.validate();
  check_params(params, cfg);
  Tape tape;
  ParamVars p = bind_constants(tape, params);
  const Matrix windows[] = {window};
  BatchForward b = forward_batch(tape, p, cfg, windows, eps.transpose(), true);

  ForwardOutput out;
  out.forecast = b.forecast.value().row(0).transpose();
  out.mu_x = b.recon.mu_x.value().reshaped<Eigen::RowMajor>(cfg.n, cfg.k);
  out.sigma_x = b.recon.sigma_x.value().reshaped<Eigen::RowMajor>(cfg.n, cfg.k);
  out.mu_z = b.mu_z.value().row(0).transpose();
  out.sigma_z = b.log_sigma_z.value().row(0).transpose().array().exp();
  out.feature_attention = cfg.use_feature_gat ? b.feature_attention.front() : Matrix();
  out.time_attention = cfg.use_time_gat ? b.time_attention.front() : Matrix();
  out.fused = b.fused.value();
  return out;
}

double loss_forecast(const Vector& forecast, const Vector& target) {
  if (forecast.size() != target.size())
    throw DimensionError("loss_forecast: length " + std::to_string(forecast.size()) + " vs " +
                         std::to_string(target.size()));
  return (forecast - target).norm();
}

double loss_kl(const Vector& mu_z, const Vector& sigma_z) {
  if (mu_z.size() != sigma_z.size()) throw DimensionError("loss_kl: mean and scale lengths differ");
  if ((sigma_z.array() <= 0).any()) throw DomainError("loss_kl: scales must be positive");
  return 0.5 * (mu_z.array().square() + sigma_z.array().square() - 1.0 - 2.0 * sigma_z.array().log()).sum();
}

double loss_nll(const Matrix& mu_x, const Matrix& sigma_x, const Matrix& window) {
  if (mu_x.rows() != window.rows() || mu_x.cols() != window.cols() || sigma_x.rows() != window.rows() ||
      sigma_x.cols() != window.cols())
    throw DimensionError("loss_nll: reconstruction " + shape_string(mu_x.rows(), mu_x.cols()) +
                         " does not match window " + shape_string(window.rows(), window.cols()));
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const auto diff = (window - mu_x).array();
  return (half_log_2pi + sigma_x.array().log() + diff.square() / (2.0 * sigma_x.array().square())).sum();
}

ReconstructionLoss loss_reconstruction(const ForwardOutput& out, const Matrix& window) {
  ReconstructionLoss l;
  l.nll = loss_nll(out.mu_x, out.sigma_x, window);
  l.kl = loss_kl(out.mu_z, out.sigma_z);
  l.total = l.nll + l.kl;
  return l;
}

double loss_joint(const ForwardOutput& out, const Matrix& window, const Vector& target, const ModelConfig& cfg) {
  if (!cfg.use_forecast && !cfg.use_reconstruction)
    throw ConfigError("joint loss needs at least one of the forecasting / reconstruction terms");
  double total = 0.0;
  if (cfg.use_forecast) total += loss_forecast(out.forecast, target);
  if (cfg.use_reconstruction) total += loss_reconstruction(out, window).total;
  return total;
}

Vector reconstruction_probability(const Matrix& mu_rows, const Matrix& sigma_rows, const Vector& observed) {
  if (mu_rows.cols() != observed.size() || sigma_rows.cols() != observed.size() ||
      mu_rows.rows() != sigma_rows.rows() || mu_rows.rows() == 0)
    throw DimensionError("reconstruction_probability: decoder rows " + shape_string(mu_rows.rows(), mu_rows.cols()) +
                         " do not match " + std::to_string(observed.size()) + " observed features");
  Vector p = Vector::Zero(observed.size());
  for (Index s = 0; s < mu_rows.rows(); ++s) {
    const auto diff = observed.transpose().array() - mu_rows.row(s).array();
    p += (-(diff.square()) / (2.0 * sigma_rows.row(s).array().square())).exp().matrix().transpose();
  }
  return p / static_cast<double>(mu_rows.rows());
}

Vector reconstruction_probability(const ForwardOutput& out, const Vector& observed_last) {
  const Index last = out.mu_x.rows() - 1;
  return reconstruction_probability(out.mu_x.row(last), out.sigma_x.row(last), observed_last);
}

}  // namespace mtad
