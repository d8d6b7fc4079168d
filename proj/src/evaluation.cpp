#include "mtad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mtad {

namespace {

void check_lengths(const Flags& pred, const Flags& labels) {
  if (pred.size() != labels.size())
    throw DataError("predictions have length " + std::to_string(pred.size()) + " but labels have length " +
                    std::to_string(labels.size()));
}

void check_truth(const std::vector<Index>& truth) {
  if (truth.empty()) throw DataError("diagnosis: ground-truth feature set is empty");
}

}  // namespace

std::vector<Segment> segments(const Flags& labels) {
  std::vector<Segment> out;
  const auto len = static_cast<Index>(labels.size());
  for (Index i = 0; i < len; ++i) {
    if (!labels[static_cast<std::size_t>(i)]) continue;
    Index j = i;
    while (j + 1 < len && labels[static_cast<std::size_t>(j + 1)]) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

Flags delay_adjust(const Flags& pred, const Flags& labels, Index delay) {
  check_lengths(pred, labels);
  if (delay < 0) throw ConfigError("delay must be >= 0, got " + std::to_string(delay));
  Flags out = pred;
  for (const Segment& s : segments(labels)) {
    const Index last = std::min(s.end, s.begin + delay);
    bool hit = false;
    for (Index i = s.begin; i <= last && !hit; ++i) hit = pred[static_cast<std::size_t>(i)];
    if (hit) std::fill(out.begin() + s.begin, out.begin() + s.end + 1, true);
  }
  return out;
}

Flags point_adjust(const Flags& pred, const Flags& labels) {
  check_lengths(pred, labels);
  return delay_adjust(pred, labels, static_cast<Index>(labels.size()));
}

EvalReport prf1(const Flags& pred, const Flags& labels) {
  check_lengths(pred, labels);
  EvalReport r;
  r.protocol = "raw-point";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && labels[i]) ++r.tp;
    if (pred[i] && !labels[i]) ++r.fp;
    if (!pred[i] && labels[i]) ++r.fn;
  }
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

void EvaluationConfig::validate() const {
  if (protocol != "point-adjust" && protocol != "delay" && protocol != "raw-point")
    throw ConfigError("evaluation protocol must be point-adjust, delay or raw-point, got \"" + protocol + "\"");
  if (delay < 0) throw ConfigError("evaluation delay must be >= 0");
  if (top < 1) throw ConfigError("diagnosis top must be >= 1");
  if (ndcg_cutoff < 1) throw ConfigError("ndcg cutoff must be >= 1");
}

EvalReport evaluate(const Flags& pred, const Flags& labels, const EvaluationConfig& cfg) {
  cfg.validate();
  if (cfg.protocol == "raw-point") return prf1(pred, labels);
  if (cfg.protocol == "point-adjust") {
    EvalReport r = prf1(point_adjust(pred, labels), labels);
    r.protocol = "point-adjust";
    return r;
  }
  EvalReport r = prf1(delay_adjust(pred, labels, cfg.delay), labels);
  r.protocol = "delay(" + std::to_string(cfg.delay) + ")";
  return r;
}

std::vector<Index> diagnose(const Vector& scores, Index m) {
  const Index k = scores.size();
  if (k < 1) throw DataError("diagnose: empty score vector");
  if (m < 1 || m > k)
    throw ConfigError("diagnose: candidate count " + std::to_string(m) + " must lie in [1, " + std::to_string(k) +
                      "]");
  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
  order.resize(static_cast<std::size_t>(m));
  return order;
}

double hitrate_at(const std::vector<Index>& candidates, const std::vector<Index>& truth, double percent) {
  check_truth(truth);
  const auto examined = static_cast<std::size_t>(std::floor(percent / 100.0 * static_cast<double>(truth.size())));
  const std::size_t upto = std::min(examined, candidates.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < upto; ++r)
    if (std::find(truth.begin(), truth.end(), candidates[r]) != truth.end()) ++hits;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double ndcg_at(const std::vector<Index>& candidates, const std::vector<Index>& truth, Index cutoff) {
  check_truth(truth);
  if (cutoff < 1) throw ConfigError("ndcg cutoff must be >= 1");
  double dcg = 0.0, ideal = 0.0;
  const std::size_t upto = std::min(static_cast<std::size_t>(cutoff), candidates.size());
  for (std::size_t r = 0; r < upto; ++r)
    if (std::find(truth.begin(), truth.end(), candidates[r]) != truth.end())
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  const std::size_t ideal_hits = std::min(static_cast<std::size_t>(cutoff), truth.size());
  for (std::size_t r = 0; r < ideal_hits; ++r) ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / ideal;
}

DiagnosisSummary diagnose_events(const ScoreSeries& scores, const std::vector<RootCause>& causes, Index top,
                                 Index ndcg_cutoff) {
  if (top < 1 || top > scores.k())
    throw ConfigError("diagnose: top " + std::to_string(top) + " exceeds the feature count " +
                      std::to_string(scores.k()));
  DiagnosisSummary out;
  for (std::size_t e = 0; e < causes.size(); ++e) {
    const RootCause& c = causes[e];
    check_truth(c.features);
    const Index lo = std::max(c.begin, scores.offset);
    const Index hi = std::min(c.end, scores.offset + scores.size() - 1);
    if (lo > hi)
      throw DataError("diagnose: event " + std::to_string(e) + " [" + std::to_string(c.begin) + ", " +
                      std::to_string(c.end) + "] has no scored timestamps");
    Index peak = lo;
    for (Index u = lo; u <= hi; ++u)
      if (scores.total(u - scores.offset) > scores.total(peak - scores.offset)) peak = u;

    EventDiagnosis d;
    d.event = static_cast<Index>(e);
    d.begin = c.begin;
    d.end = c.end;
    d.peak = peak;
    d.truth = c.features;
    d.peak_scores = scores.feature_scores.row(peak - scores.offset).transpose();
    d.ranking = diagnose(d.peak_scores, top);
    d.hitrate_100 = hitrate_at(d.ranking, d.truth, 100.0);
    d.hitrate_150 = hitrate_at(d.ranking, d.truth, 150.0);
    d.ndcg = ndcg_at(d.ranking, d.truth, ndcg_cutoff);
    out.hitrate_100 += d.hitrate_100;
    out.hitrate_150 += d.hitrate_150;
    out.ndcg += d.ndcg;
    out.events.push_back(std::move(d));
  }
  if (!out.events.empty()) {
    const auto count = static_cast<double>(out.events.size());
    out.hitrate_100 /= count;
    out.hitrate_150 /= count;
    out.ndcg /= count;
  }
  return out;
}

}  // namespace mtad
