#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mtad/evaluation.hpp"

using namespace mtad;

namespace {

Flags bits(std::initializer_list<int> v) {
  Flags out;
  for (int b : v) out.push_back(b != 0);
  return out;
}

Flags random_flags(std::mt19937_64& rng, std::size_t len, double p) {
  std::bernoulli_distribution d(p);
  Flags out(len);
  for (std::size_t i = 0; i < len; ++i) out[i] = d(rng);
  return out;
}

// Scans segment by segment with explicit start/stop indices.
Flags brute_delay(const Flags& pred, const Flags& labels, std::size_t delay) {
  Flags out = pred;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (!labels[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < labels.size() && labels[j]) ++j;  // segment [i, j)
    bool credited = false;
    for (std::size_t t = i; t < j; ++t)
      if (pred[t] && t - i <= delay) credited = true;
    if (credited)
      for (std::size_t t = i; t < j; ++t) out[t] = true;
    i = j;
  }
  return out;
}

}  // namespace

TEST_CASE("point adjustment") {
  CHECK(point_adjust(bits({0, 1, 0}), bits({1, 1, 0})) == bits({1, 1, 0}));
  CHECK(point_adjust(bits({0, 0, 0, 0}), bits({1, 1, 0, 1})) == bits({0, 0, 0, 0}));
  CHECK(point_adjust(bits({1, 0, 0, 1}), bits({0, 0, 1, 1})) == bits({1, 0, 1, 1}));
  CHECK_THROWS_AS(point_adjust(bits({1}), bits({1, 0})), DataError);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 1 + rng() % 30;
    const Flags labels = random_flags(rng, len, 0.4), pred = random_flags(rng, len, 0.3);
    const Flags adjusted = point_adjust(pred, labels);
    CHECK(adjusted == brute_delay(pred, labels, len));
    for (std::size_t i = 0; i < len; ++i) {
      CHECK((!pred[i] || adjusted[i]));
      if (!labels[i]) CHECK(adjusted[i] == pred[i]);
    }
  }
}

TEST_CASE("delay adjustment") {
  Flags labels(30, false), pred(30, false);
  for (int i = 10; i <= 20; ++i) labels[static_cast<std::size_t>(i)] = true;
  pred[25] = true;
  CHECK(delay_adjust(pred, labels, 10) == pred);
  pred[25] = false;
  pred[15] = true;
  const Flags credited = delay_adjust(pred, labels, 10);
  CHECK(std::count(credited.begin() + 10, credited.begin() + 21, true) == 11);
  CHECK(delay_adjust(pred, labels, 4) == pred);
  CHECK_THROWS_AS(delay_adjust(pred, labels, -1), ConfigError);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 1 + rng() % 30;
    const Flags l = random_flags(rng, len, 0.5), p = random_flags(rng, len, 0.2);
    const std::size_t delay = rng() % 6;
    CHECK(delay_adjust(p, l, static_cast<Index>(delay)) == brute_delay(p, l, delay));
    CHECK(delay_adjust(p, l, static_cast<Index>(len)) == point_adjust(p, l));
  }
}

TEST_CASE("precision, recall, f1") {
  const EvalReport perfect = prf1(bits({1, 0, 1}), bits({1, 0, 1}));
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  const EvalReport silent = prf1(bits({0, 0, 0}), bits({1, 0, 1}));
  CHECK(silent.recall == 0.0);
  CHECK(silent.f1 == 0.0);
  CHECK(silent.precision == 0.0);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 1 + rng() % 40;
    const Flags l = random_flags(rng, len, 0.3), p = random_flags(rng, len, 0.3);
    Index tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < len; ++i) {
      tp += p[i] && l[i];
      fp += p[i] && !l[i];
      fn += !p[i] && l[i];
    }
    const EvalReport r = prf1(p, l);
    CHECK(r.tp == tp);
    CHECK(r.fp == fp);
    CHECK(r.fn == fn);
    const double precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    CHECK(r.precision == precision);
    CHECK(r.recall == recall);
    if (precision + recall > 0) CHECK(r.f1 == doctest::Approx(2 * precision * recall / (precision + recall)));
  }
}

TEST_CASE("protocols") {
  const Flags labels = bits({0, 1, 1, 1, 1, 0, 0});
  const Flags pred = bits({0, 0, 0, 1, 0, 0, 1});
  EvaluationConfig cfg;
  CHECK(evaluate(pred, labels, cfg).protocol == "point-adjust");
  CHECK(evaluate(pred, labels, cfg).tp == 4);
  cfg.protocol = "raw-point";
  CHECK(evaluate(pred, labels, cfg).tp == 1);
  cfg.protocol = "delay";
  cfg.delay = 0;
  const EvalReport d0 = evaluate(pred, labels, cfg);
  CHECK(d0.protocol == "delay(0)");
  CHECK(d0.tp == 1);
  cfg.protocol = "point-adjust";
  CHECK(d0.f1 <= evaluate(pred, labels, cfg).f1);
  cfg.protocol = "best";
  CHECK_THROWS_AS(evaluate(pred, labels, cfg), ConfigError);
}

TEST_CASE("diagnosis ranking") {
  Vector s(3);
  s << 0.1, 0.9, 0.5;
  CHECK(diagnose(s, 2) == std::vector<Index>{1, 2});
  CHECK(diagnose(Vector::Constant(3, 0.4), 3) == std::vector<Index>{0, 1, 2});
  CHECK_THROWS_AS(diagnose(s, 4), ConfigError);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Vector r(8);
    for (Index i = 0; i < 8; ++i) r(i) = u(rng);
    const std::vector<Index> ranking = diagnose(r, 8);
    std::vector<Index> sorted = ranking;
    std::sort(sorted.begin(), sorted.end());
    for (Index i = 0; i < 8; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
    for (std::size_t i = 1; i < ranking.size(); ++i) CHECK(r(ranking[i - 1]) >= r(ranking[i]));
  }
}

TEST_CASE("hit rate and ndcg") {
  CHECK(hitrate_at({0, 5}, {0, 1}, 100) == 0.5);
  CHECK(hitrate_at({5, 6, 1}, {0, 1}, 150) == 0.5);  // examines the top 3
  CHECK(hitrate_at({5, 6, 1}, {0, 1}, 100) == 0.0);
  CHECK(hitrate_at({1, 0, 3}, {0, 1}, 100) == 1.0);
  CHECK(hitrate_at({2, 0, 1, 3}, {0, 1}, 100) <= hitrate_at({2, 0, 1, 3}, {0, 1}, 150));
  CHECK_THROWS_AS(hitrate_at({0}, {}, 100), DataError);

  CHECK(ndcg_at({3, 1, 2}, {3}) == 1.0);
  CHECK(ndcg_at({1, 3, 2}, {3}) == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-15));
  CHECK(ndcg_at({4, 2, 7}, {2, 4}) == 1.0);
  CHECK(ndcg_at({0, 1, 2, 3, 4, 5}, {5}) == 0.0);
  CHECK(ndcg_at({0, 4}, {4, 7}) < 1.0);
  CHECK_THROWS_AS(ndcg_at({0}, {}), DataError);
}

TEST_CASE("event diagnosis at the peak score") {
  ScoreSeries s;
  s.offset = 2;
  s.feature_scores = Matrix::Zero(6, 3);
  s.feature_scores.row(3) << 0.1, 0.2, 0.9;  // stream row 5
  s.feature_scores.row(4) << 0.5, 0.0, 0.0;
  s.total = s.feature_scores.rowwise().sum();
  const std::vector<RootCause> causes{{4, 6, {2}}, {6, 7, {0, 1}}};
  const DiagnosisSummary d = diagnose_events(s, causes, 3);
  REQUIRE(d.events.size() == 2);
  CHECK(d.events[0].peak == 5);
  CHECK(d.events[0].ranking.front() == 2);
  CHECK(d.events[0].ndcg == 1.0);
  CHECK(d.events[1].peak == 6);
  CHECK(d.events[1].ranking == std::vector<Index>{0, 1, 2});
  CHECK(d.hitrate_100 == 1.0);
  CHECK_THROWS_AS(diagnose_events(s, causes, 4), ConfigError);
  CHECK_THROWS_AS(diagnose_events(s, {{0, 1, {0}}}, 2), DataError);
}
