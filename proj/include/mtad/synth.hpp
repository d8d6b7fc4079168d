#pragma once

// Synthetic multivariate benchmark: k noisy mixtures of two shared periodic
// drivers. The first part is the (unlabeled) training stream; labeled events
// are injected into the remaining test stream.

#include <cstdint>
#include <string>
#include <vector>

#include "mtad/evaluation.hpp"
#include "mtad/io.hpp"

namespace mtad {

enum class EventKind { spike, level_shift, correlation_break };

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);

struct EventSpec {
  EventKind kind = EventKind::spike;
  Index start = -1;  // test-stream row; -1 places the event automatically
  Index length = 0;  // 0 picks a kind-specific default
  std::vector<Index> features;  // empty picks at random
};

struct SynthConfig {
  Index length = 5000;  // total rows, train + test
  Index features = 4;
  double train_fraction = 0.5;
  Index events = 8;     // automatically placed events when `specs` is empty
  std::vector<EventSpec> specs;
  Index warmup = 100;   // leading test rows kept free of events
  Index train_contaminations = 2;  // unlabeled spikes in the training stream
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthDataset {
  Table train;
  Table test;
  Flags labels;
  std::vector<RootCause> causes;
  std::vector<EventKind> kinds;
  std::vector<std::string> warnings;
};

// Event kinds for automatic placement: one correlation break (when events >= 3),
// the rest alternating spike / level shift.
std::vector<EventKind> default_event_kinds(Index events);

SynthDataset synthesize(const SynthConfig& cfg);

}  // namespace mtad
