#include "mtad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mtad {

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::spike:
      return "spike";
    case EventKind::level_shift:
      return "level_shift";
    case EventKind::correlation_break:
      return "correlation_break";
  }
  return "unknown";
}

EventKind event_kind_from_string(const std::string& name) {
  if (name == "spike") return EventKind::spike;
  if (name == "level_shift") return EventKind::level_shift;
  if (name == "correlation_break") return EventKind::correlation_break;
  throw ConfigError("unknown event kind \"" + name + "\" (spike, level_shift, correlation_break)");
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("synth: " + msg); };
  if (features < 1) fail("features must be >= 1");
  if (!(train_fraction > 0 && train_fraction < 1)) fail("train_fraction must lie in (0, 1)");
  if (events < 0) fail("events must be >= 0");
  if (warmup < 0) fail("warmup must be >= 0");
  if (!(noise >= 0)) fail("noise must be >= 0");
  if (length <= 2 * warmup) fail("length " + std::to_string(length) + " must exceed twice the warm-up " +
                                 std::to_string(warmup));
  const auto test_rows = length - static_cast<Index>(std::floor(train_fraction * static_cast<double>(length)));
  if (specs.empty() && events > 0 && test_rows - warmup < 40 * events)
    fail("test stream too short for " + std::to_string(events) + " events");
  for (const EventSpec& s : specs)
    for (Index f : s.features)
      if (f < 0 || f >= features) fail("event feature index " + std::to_string(f) + " out of range");
}

std::vector<EventKind> default_event_kinds(Index events) {
  std::vector<EventKind> kinds;
  for (Index i = 0; i < events; ++i) kinds.push_back(i % 2 == 0 ? EventKind::spike : EventKind::level_shift);
  if (events >= 3) kinds[static_cast<std::size_t>(events / 2)] = EventKind::correlation_break;
  return kinds;
}

namespace {

constexpr double kFastPeriod = 40.0;
constexpr double kSlowPeriod = 97.0;

Index default_length(EventKind kind) {
  switch (kind) {
    case EventKind::spike:
      return 6;
    case EventKind::level_shift:
      return 50;
    case EventKind::correlation_break:
      return 100;
  }
  return 1;
}

struct Mixture {
  Vector fast, slow, offset;
};

}  // namespace

SynthDataset synthesize(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index k = cfg.features;
  const Index train_rows = static_cast<Index>(std::floor(cfg.train_fraction * static_cast<double>(cfg.length)));
  const Index test_rows = cfg.length - train_rows;

  Mixture mix{Vector(k), Vector(k), Vector(k)};
  for (Index j = 0; j < k; ++j) {
    mix.fast(j) = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + 0.5 * unit(rng));
    mix.slow(j) = 0.2 + 0.4 * unit(rng);
    mix.offset(j) = unit(rng) - 0.5;
  }
  auto driven = [&](Index t, Index j) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(t);
    return mix.fast(j) * std::sin(phase / kFastPeriod) + mix.slow(j) * std::sin(phase / kSlowPeriod + 1.0);
  };

  Matrix all(cfg.length, k);
  for (Index t = 0; t < cfg.length; ++t)
    for (Index j = 0; j < k; ++j) all(t, j) = mix.offset(j) + driven(t, j) + cfg.noise * normal(rng);

  auto pick_features = [&](Index count) {
    std::vector<Index> all_idx(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) all_idx[static_cast<std::size_t>(j)] = j;
    std::shuffle(all_idx.begin(), all_idx.end(), rng);
    all_idx.resize(static_cast<std::size_t>(std::min(count, k)));
    std::sort(all_idx.begin(), all_idx.end());
    return all_idx;
  };
  auto sign = [&] { return unit(rng) < 0.5 ? -1.0 : 1.0; };

  // unlabeled contamination of the training stream
  for (Index c = 0; c < cfg.train_contaminations && train_rows > 100; ++c) {
    const Index at = 50 + static_cast<Index>(unit(rng) * static_cast<double>(train_rows - 100));
    const Index len = 1 + static_cast<Index>(unit(rng) * 3.0);
    const Index j = pick_features(1)[0];
    const double jump = sign() * (2.5 + unit(rng));
    for (Index t = at; t < std::min(at + len, train_rows); ++t) all(t, j) += jump;
  }

  SynthDataset out;
  std::vector<EventSpec> specs = cfg.specs;
  if (specs.empty()) {
    const std::vector<EventKind> kinds = default_event_kinds(cfg.events);
    const Index region = test_rows - cfg.warmup - 20;
    const Index slot = cfg.events > 0 ? region / cfg.events : 0;
    for (Index e = 0; e < cfg.events; ++e) {
      EventSpec s;
      s.kind = kinds[static_cast<std::size_t>(e)];
      s.length = std::min(default_length(s.kind), slot - 20);
      const Index slack = std::max<Index>(slot - s.length - 20, 0);
      s.start = cfg.warmup + 10 + e * slot + static_cast<Index>(unit(rng) * static_cast<double>(slack));
      specs.push_back(s);
    }
  }

  Flags labels(static_cast<std::size_t>(test_rows), false);
  for (std::size_t e = 0; e < specs.size(); ++e) {
    EventSpec s = specs[e];
    if (s.length <= 0) s.length = default_length(s.kind);
    if (s.start < 0) s.start = cfg.warmup + static_cast<Index>(unit(rng) * static_cast<double>(test_rows - cfg.warmup));
    if (s.start < cfg.warmup) {
      out.warnings.push_back("event " + std::to_string(e) + " at row " + std::to_string(s.start) +
                             " overlaps the window warm-up; moved to row " + std::to_string(cfg.warmup));
      s.start = cfg.warmup;
    }
    if (s.start >= test_rows) throw ConfigError("synth: event " + std::to_string(e) + " starts past the test stream");
    const Index end = std::min(s.start + s.length, test_rows);
    if (s.features.empty()) s.features = pick_features(s.kind == EventKind::correlation_break ? 1 : 1 + (unit(rng) < 0.5));

    for (Index j : s.features) {
      const double jump = sign();
      const double size = s.kind == EventKind::spike ? 2.5 + unit(rng) : 1.0 + 0.5 * unit(rng);
      for (Index r = s.start; r < end; ++r) {
        const Index t = train_rows + r;
        if (s.kind == EventKind::correlation_break)
          all(t, j) -= 2.0 * driven(t, j);  // anti-phase: the feature stops following the shared drivers
        else
          all(t, j) += jump * size;
      }
    }
    for (Index r = s.start; r < end; ++r) labels[static_cast<std::size_t>(r)] = true;
    out.causes.push_back({s.start, end - 1, s.features});
    out.kinds.push_back(s.kind);
  }

  std::vector<std::string> names;
  for (Index j = 0; j < k; ++j) names.push_back("f" + std::to_string(j));
  out.train = {names, all.topRows(train_rows)};
  out.test = {names, all.bottomRows(test_rows)};
  out.labels = std::move(labels);
  return out;
}

}  // namespace mtad
