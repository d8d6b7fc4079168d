#include "mtad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mtad {

void ScoringConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("scoring config: " + msg); };
  if (!(q > 0 && q < 1)) fail("risk q must lie in (0, 1)");
  if (!(init_quantile > 0 && init_quantile < 1)) fail("init_quantile must lie in (0, 1)");
  if (min_excesses < 1) fail("min_excesses must be >= 1");
  if (calibration != "test" && calibration != "validation")
    fail("calibration must be \"test\" or \"validation\", got \"" + calibration + "\"");
  if (attention_samples < 0) fail("attention_samples must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
}

Vector combine_scores(const Vector& forecast_sq, const Vector& recon_prob, double gamma) {
  if (forecast_sq.size() != recon_prob.size())
    throw DimensionError("combine_scores: " + std::to_string(forecast_sq.size()) + " forecast errors vs " +
                         std::to_string(recon_prob.size()) + " probabilities");
  if (!(gamma >= 0)) throw ConfigError("gamma must be >= 0");
  return (forecast_sq.array() + gamma * (1.0 - recon_prob.array())) / (1.0 + gamma);
}

Vector combine_scores(const Vector& forecast_sq, const Vector& recon_prob, double gamma, const ModelConfig& cfg) {
  if (!cfg.use_forecast) return (1.0 - recon_prob.array()).matrix();
  if (!cfg.use_reconstruction) return forecast_sq;
  return combine_scores(forecast_sq, recon_prob, gamma);
}

ScoreSeries score_stream(const Matrix& stream, const ModelParams& params, const ModelConfig& cfg, double gamma,
                         std::uint64_t noise_seed, Index batch_size) {
  cfg.validate();
  check_params(params, cfg);
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw ConfigError("score: gamma must be finite and >= 0");
  if (batch_size < 1) throw ConfigError("score: batch_size must be >= 1");
  if (stream.cols() != cfg.k)
    throw ConfigError("score: data has " + std::to_string(stream.cols()) + " features but the checkpoint expects k = " +
                      std::to_string(cfg.k));
  const Index rows = stream.rows(), n = cfg.n, k = cfg.k;
  if (rows <= n)
    throw DataError("score: stream has " + std::to_string(rows) + " rows, needs more than the window length " +
                    std::to_string(n));

  const Index windows = rows - n + 1;
  const Index samples = cfg.vae_samples_infer;
  Matrix forecast(windows, k);
  Matrix prob(windows, k);

  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index start = 0; start < windows; start += batch_size) {
    const Index len = std::min(batch_size, windows - start);
    std::vector<Matrix> batch;
    batch.reserve(static_cast<std::size_t>(len));
    for (Index s = start; s < start + len; ++s) batch.push_back(stream.middleRows(s, n));
    // noise drawn window by window so results do not depend on the batch size
    std::vector<Matrix> eps(static_cast<std::size_t>(samples), Matrix(len, cfg.d3));
    for (Index b = 0; b < len; ++b)
      for (auto& e : eps)
        for (Index j = 0; j < cfg.d3; ++j) e(b, j) = normal(rng);

    Tape tape;
    const ParamVars p = bind_constants(tape, params);
    const BatchForward out = forward_batch(tape, p, cfg, batch, eps[0]);
    forecast.middleRows(start, len) = out.forecast.value();

    const Matrix& mu_z = out.mu_z.value();
    const Matrix sigma_z = out.log_sigma_z.value().array().exp();
    Matrix acc = Matrix::Zero(len, k);
    for (Index s = 0; s < samples; ++s) {
      Decoded d = out.recon;
      if (s > 0) d = decode(p, cfg, tape.constant(mu_z + sigma_z.cwiseProduct(eps[static_cast<std::size_t>(s)])));
      const auto mu_last = d.mu_x.value().rightCols(k).array();
      const auto sigma_last = d.sigma_x.value().rightCols(k).array();
      for (Index b = 0; b < len; ++b) {
        const auto observed = stream.row(start + b + n - 1).array();
        acc.row(b).array() += (-(observed - mu_last.row(b)).square() / (2.0 * sigma_last.row(b).square())).exp();
      }
    }
    prob.middleRows(start, len) = acc / static_cast<double>(samples);
  }

  ScoreSeries out;
  out.offset = n;
  const Index scored = rows - n;
  out.forecast_sq = (forecast.topRows(scored) - stream.bottomRows(scored)).cwiseAbs2();
  out.recon_prob = prob.bottomRows(scored);
  out.feature_scores.resize(scored, k);
  for (Index r = 0; r < scored; ++r)
    out.feature_scores.row(r) =
        combine_scores(out.forecast_sq.row(r).transpose(), out.recon_prob.row(r).transpose(), gamma, cfg).transpose();
  out.total = out.feature_scores.rowwise().sum();
  return out;
}

// ---- POT ----------------------------------------------------------------------------------

double gpd_log_likelihood(const Vector& y, double sigma, double xi) {
  const double inf = std::numeric_limits<double>::infinity();
  if (!(sigma > 0)) return -inf;
  const auto count = static_cast<double>(y.size());
  if (std::abs(xi) < 1e-12) return -count * std::log(sigma) - y.sum() / sigma;
  const Eigen::ArrayXd s = 1.0 + (xi / sigma) * y.array();
  if ((s <= 0).any()) return -inf;
  return -count * std::log(sigma) - (1.0 + 1.0 / xi) * s.log().sum();
}

namespace {

// Grimshaw's reduction: for x = xi / sigma, with s = 1 + x y,
// u(x) = mean(1/s), v(x) = 1 + mean(log s); ML estimates solve u(x) v(x) = 1.
double grimshaw_w(const Vector& y, double x) {
  const Eigen::ArrayXd s = 1.0 + x * y.array();
  return s.inverse().mean() * (1.0 + s.log().mean()) - 1.0;
}

std::vector<double> roots_in(const Vector& y, double lo, double hi, int grid) {
  std::vector<double> roots;
  if (!(lo < hi)) return roots;
  const bool positive = lo > 0;
  auto point = [&](int i) {
    const double f = static_cast<double>(i) / grid;
    // geometric spacing resolves roots near zero on the positive branch
    return positive ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f;
  };
  double xa = point(0);
  double wa = grimshaw_w(y, xa);
  for (int i = 1; i <= grid; ++i) {
    const double xb = point(i);
    const double wb = grimshaw_w(y, xb);
    if (std::isfinite(wa) && std::isfinite(wb) && (wa == 0 || wa * wb < 0)) {
      double a = xa, b = xb, fa = wa;
      for (int it = 0; it < 100 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = grimshaw_w(y, mid);
        if ((fm < 0) == (fa < 0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    xa = xb;
    wa = wb;
  }
  return roots;
}

}  // namespace

GpdFit fit_gpd(const Vector& y) {
  if (y.size() < 2) throw DataError("gpd fit: need at least 2 excesses, got " + std::to_string(y.size()));
  if ((y.array() < 0).any() || !y.allFinite()) throw DomainError("gpd fit: excesses must be finite and >= 0");
  const double mean = y.mean();
  const double ymax = y.maxCoeff();
  if (!(ymax > 0)) throw DataError("gpd fit: all excesses are zero");
  const double ymin = std::max(y.minCoeff(), 1e-12 * ymax);

  constexpr double kEps = 1e-8;
  constexpr int kGrid = 400;
  std::vector<double> candidates = roots_in(y, -1.0 / ymax + kEps / ymax, -kEps / ymax, kGrid);
  // the classical lower bracket 2(mean - ymin) / (mean ymin) explodes when ymin is near zero,
  // so the positive branch is scanned geometrically from just above zero
  const double hi = 2.0 * (mean - ymin) / (ymin * ymin);
  for (double r : roots_in(y, kEps / ymax, hi, kGrid)) candidates.push_back(r);

  // exponential limit
  GpdFit best{mean, 0.0, gpd_log_likelihood(y, mean, 0.0)};
  for (double x : candidates) {
    const double xi = (1.0 + (1.0 + x * y.array()).log().mean()) - 1.0;
    const double sigma = xi / x;
    const double ll = gpd_log_likelihood(y, sigma, xi);
    if (std::isfinite(ll) && ll > best.log_likelihood) best = {sigma, xi, ll};
  }
  return best;
}

double empirical_quantile(const Vector& values, double p) {
  if (values.size() == 0) throw DataError("quantile of an empty sample");
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

PotModel pot_fit(const Vector& scores, double q, double init_quantile, Index min_excesses) {
  if (!(q > 0 && q < 1)) throw ConfigError("pot: risk q must lie in (0, 1)");
  if (!(init_quantile > 0 && init_quantile < 1)) throw ConfigError("pot: init_quantile must lie in (0, 1)");
  if (!scores.allFinite()) throw DataError("pot: scores contain non-finite values");
  PotModel m;
  m.q = q;
  m.init_quantile = init_quantile;
  m.sample_size = scores.size();
  m.init_threshold = empirical_quantile(scores, init_quantile);

  std::vector<double> excess;
  for (Index i = 0; i < scores.size(); ++i)
    if (scores(i) > m.init_threshold) excess.push_back(scores(i) - m.init_threshold);
  m.excess_count = static_cast<Index>(excess.size());
  if (m.excess_count < min_excesses)
    throw DataError("pot: only " + std::to_string(m.excess_count) + " scores exceed the initial threshold (need " +
                    std::to_string(min_excesses) + "); lower init_quantile or provide more scores");

  const double ratio = q * static_cast<double>(m.sample_size) / static_cast<double>(m.excess_count);
  if (ratio >= 1.0)
    throw ConfigError("pot: risk q = " + std::to_string(q) + " is not below the excess fraction " +
                      std::to_string(static_cast<double>(m.excess_count) / static_cast<double>(m.sample_size)));

  const GpdFit fit = fit_gpd(Eigen::Map<const Vector>(excess.data(), static_cast<Index>(excess.size())));
  m.xi = fit.xi;
  m.sigma = fit.sigma;
  if (std::abs(m.xi) < 1e-8)
    m.threshold = m.init_threshold - m.sigma * std::log(ratio);
  else
    m.threshold = m.init_threshold + m.sigma / m.xi * (std::pow(ratio, -m.xi) - 1.0);
  return m;
}

std::vector<bool> detect(const Vector& totals, Index offset, double threshold) {
  if (offset < 0) throw DimensionError("detect: negative offset");
  std::vector<bool> out(static_cast<std::size_t>(offset + totals.size()), false);
  for (Index i = 0; i < totals.size(); ++i) out[static_cast<std::size_t>(offset + i)] = totals(i) > threshold;
  return out;
}

std::vector<bool> detect(const ScoreSeries& scores, double threshold) {
  return detect(scores.total, scores.offset, threshold);
}

}  // namespace mtad
