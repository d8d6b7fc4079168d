#pragma once

#include <string>
#include <vector>

#include "mtad/scoring.hpp"

namespace mtad {

using Flags = std::vector<bool>;

struct Segment {
  Index begin = 0;  // first labeled index
  Index end = 0;    // last labeled index, inclusive
  bool operator==(const Segment&) const = default;
};

// Maximal runs of true labels.
std::vector<Segment> segments(const Flags& labels);

// Any detection inside a labeled segment marks the whole segment detected.
Flags point_adjust(const Flags& pred, const Flags& labels);

// A segment starting at f is credited iff a detection lies in [f, min(f + delay, end)].
Flags delay_adjust(const Flags& pred, const Flags& labels, Index delay);

struct EvalReport {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  Index tp = 0;
  Index fp = 0;
  Index fn = 0;
  std::string protocol;  // "point-adjust" | "delay(<d>)" | "raw-point"
};

EvalReport prf1(const Flags& pred, const Flags& labels);

struct EvaluationConfig {
  std::string protocol = "point-adjust";  // "point-adjust" | "delay" | "raw-point"
  Index delay = 7;
  Index top = 8;  // diagnosis candidates per event
  Index ndcg_cutoff = 5;

  void validate() const;
  bool operator==(const EvaluationConfig&) const = default;
};

// Applies cfg.protocol, then prf1.
EvalReport evaluate(const Flags& pred, const Flags& labels, const EvaluationConfig& cfg);

// Feature indices by descending score, ties by ascending index; first m.
std::vector<Index> diagnose(const Vector& scores, Index m);

double hitrate_at(const std::vector<Index>& candidates, const std::vector<Index>& truth, double percent);
double ndcg_at(const std::vector<Index>& candidates, const std::vector<Index>& truth, Index cutoff = 5);

struct RootCause {
  Index begin = 0;
  Index end = 0;  // inclusive
  std::vector<Index> features;
};

struct EventDiagnosis {
  Index event = 0;
  Index begin = 0;
  Index end = 0;
  Index peak = 0;  // stream row of the highest total score inside the event
  std::vector<Index> truth;
  std::vector<Index> ranking;
  Vector peak_scores;  // s_i at the peak
  double hitrate_100 = 0;
  double hitrate_150 = 0;
  double ndcg = 0;
};

struct DiagnosisSummary {
  std::vector<EventDiagnosis> events;
  double hitrate_100 = 0;
  double hitrate_150 = 0;
  double ndcg = 0;
};

// Ranks features at each event's peak-score timestamp and averages the metrics.
DiagnosisSummary diagnose_events(const ScoreSeries& scores, const std::vector<RootCause>& causes, Index top,
                                 Index ndcg_cutoff = 5);

}  // namespace mtad
