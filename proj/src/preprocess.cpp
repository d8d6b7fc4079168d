#include "mtad/preprocess.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

namespace mtad {

NormStats fit_norm(const Matrix& train) {
  if (train.rows() == 0 || train.cols() == 0) throw DataError("cannot fit normalization on an empty training set");
  return {train.colwise().minCoeff().transpose(), train.colwise().maxCoeff().transpose()};
}

Matrix normalize(const Matrix& x, const NormStats& stats) {
  if (x.cols() != stats.k())
    throw DataError("normalize: data has " + std::to_string(x.cols()) + " features but the statistics cover " +
                    std::to_string(stats.k()));
  Matrix out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double range = stats.max(j) - stats.min(j);
    if (range > 0)
      out.col(j) = (x.col(j).array() - stats.min(j)) / range;
    else
      out.col(j).setZero();
  }
  return out;
}

void SrConfig::validate() const {
  if (!(score_threshold > 0)) throw ConfigError("sr: score_threshold must be > 0");
  if (avg_window < 1) throw ConfigError("sr: avg_window must be >= 1");
  if (estimation_points < 1) throw ConfigError("sr: estimation_points must be >= 1");
  if (replacement_window < 1) throw ConfigError("sr: replacement_window must be >= 1");
}

namespace {

constexpr double kSpectrumEps = 1e-8;

// Trailing mean over the last `window` entries (fewer at the start).
std::vector<double> trailing_mean(const std::vector<double>& v, Index window) {
  std::vector<double> out(v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc += v[i];
    if (i >= static_cast<std::size_t>(window)) acc -= v[i - static_cast<std::size_t>(window)];
    out[i] = acc / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
  }
  return out;
}

}  // namespace

Vector sr_saliency(const Vector& series, const SrConfig& cfg) {
  cfg.validate();
  const Index len = series.size();
  if (len < cfg.avg_window)
    throw DataError("sr: series of length " + std::to_string(len) + " is shorter than the averaging window " +
                    std::to_string(cfg.avg_window));

  // Pad to a power of two by repeating the last value so the padding adds no artificial edge.
  const std::size_t padded = std::bit_ceil(static_cast<std::size_t>(len));
  std::vector<double> signal(padded, series(len - 1));
  for (Index i = 0; i < len; ++i) signal[static_cast<std::size_t>(i)] = series(i);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, signal);

  std::vector<double> mag(padded), log_mag(padded);
  std::vector<bool> vanishing(padded, false);
  for (std::size_t f = 0; f < padded; ++f) {
    mag[f] = std::abs(spectrum[f]);
    if (mag[f] <= kSpectrumEps) {
      vanishing[f] = true;
      mag[f] = kSpectrumEps;
      log_mag[f] = 0.0;
    } else {
      log_mag[f] = std::log(mag[f]);
    }
  }
  const std::vector<double> avg = trailing_mean(log_mag, cfg.avg_window);
  for (std::size_t f = 0; f < padded; ++f) {
    if (vanishing[f]) {
      spectrum[f] = 0.0;
      continue;
    }
    // keep the phase, replace the amplitude by exp(spectral residual)
    spectrum[f] *= std::exp(log_mag[f] - avg[f]) / mag[f];
  }
  std::vector<std::complex<double>> restored;
  fft.inv(restored, spectrum);

  Vector saliency(len);
  for (Index i = 0; i < len; ++i) saliency(i) = std::abs(restored[static_cast<std::size_t>(i)]);
  return saliency;
}

Vector sr_scores(const Vector& saliency, const SrConfig& cfg) {
  const Index len = saliency.size();
  const Index window = cfg.estimation_points;
  Vector scores = Vector::Zero(len);
  double acc = 0.0;
  for (Index t = 0; t < len; ++t) {
    const Index count = std::min(t, window);
    if (count > 0) {
      const double local = acc / static_cast<double>(count);
      if (local > std::numeric_limits<double>::min() * 1e3) scores(t) = (saliency(t) - local) / local;
    }
    acc += saliency(t);
    if (t >= window) acc -= saliency(t - window);
  }
  return scores;
}

std::vector<bool> sr_detect(const Vector& series, const SrConfig& cfg) {
  const Vector scores = sr_scores(sr_saliency(series, cfg), cfg);
  std::vector<bool> flags(static_cast<std::size_t>(scores.size()));
  for (Index t = 0; t < scores.size(); ++t) flags[static_cast<std::size_t>(t)] = scores(t) > cfg.score_threshold;
  return flags;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

Matrix clean_with_masks(const Matrix& train, const std::vector<std::vector<bool>>& masks, Index replacement_window) {
  if (static_cast<Index>(masks.size()) != train.cols())
    throw DimensionError("clean: " + std::to_string(masks.size()) + " masks for " + std::to_string(train.cols()) +
                         " features");
  if (replacement_window < 1) throw ConfigError("clean: replacement_window must be >= 1");
  Matrix out = train;
  const Index len = train.rows();
  for (Index j = 0; j < train.cols(); ++j) {
    const auto& mask = masks[static_cast<std::size_t>(j)];
    if (static_cast<Index>(mask.size()) != len)
      throw DimensionError("clean: mask length " + std::to_string(mask.size()) + " vs " + std::to_string(len) +
                           " rows");
    if (len > 0 && std::all_of(mask.begin(), mask.end(), [](bool b) { return b; }))
      throw DataError("clean: every timestamp of feature " + std::to_string(j) + " is flagged as anomalous");
    for (Index t = 0; t < len; ++t) {
      if (!mask[static_cast<std::size_t>(t)]) continue;
      std::vector<double> neighbours;
      for (Index d = 1; d < len && static_cast<Index>(neighbours.size()) < replacement_window; ++d) {
        for (Index at : {t - d, t + d}) {
          if (at < 0 || at >= len || mask[static_cast<std::size_t>(at)]) continue;
          if (static_cast<Index>(neighbours.size()) < replacement_window) neighbours.push_back(train(at, j));
        }
      }
      out(t, j) = median(std::move(neighbours));
    }
  }
  return out;
}

Matrix clean(const Matrix& train, const SrConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<bool>> masks;
  masks.reserve(static_cast<std::size_t>(train.cols()));
  for (Index j = 0; j < train.cols(); ++j) masks.push_back(sr_detect(train.col(j), cfg));
  return clean_with_masks(train, masks, cfg.replacement_window);
}

}  // namespace mtad
