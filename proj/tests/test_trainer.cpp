#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "mtad/checkpoint.hpp"
#include "mtad/trainer.hpp"
#include "test_util.hpp"

using namespace mtad;
using mtad::test::random_matrix;

namespace {

ModelConfig tiny_model(Index k) {
  ModelConfig cfg;
  cfg.n = 10;
  cfg.k = k;
  cfg.d1 = 8;
  cfg.d2 = 8;
  cfg.d3 = 4;
  return cfg;
}

Matrix sinusoids(Index rows, Index k) {
  Matrix x(rows, k);
  for (Index t = 0; t < rows; ++t)
    for (Index j = 0; j < k; ++j)
      x(t, j) = 0.5 + 0.4 * std::sin(2 * std::numbers::pi * static_cast<double>(t) / (20.0 + 7.0 * j));
  return x;
}

Checkpoint random_checkpoint(Index k, std::uint64_t seed) {
  Checkpoint c;
  c.model = tiny_model(k);
  c.params = init_params(c.model, seed);
  std::mt19937_64 rng(seed);
  c.norm.min = test::random_vector(rng, k);
  c.norm.max = c.norm.min.array() + 1.0;
  c.meta = {3, 0.125, seed};
  return c;
}

}  // namespace

TEST_CASE("sliding windows") {
  Matrix x(5, 2);
  for (Index i = 0; i < 10; ++i) x.data()[i] = static_cast<double>(i);
  const auto w = make_windows(x, 3);
  REQUIRE(w.size() == 2);
  CHECK(w[0].window == x.topRows(3));
  CHECK(w[0].target == x.row(3).transpose());
  CHECK(w[1].window == x.middleRows(1, 3));
  CHECK(w[1].target == x.row(4).transpose());

  CHECK(make_windows(Matrix::Zero(4, 1), 3).size() == 1);
  CHECK(window_count(1000, 100, 1) == 900);
  CHECK(window_count(1000, 100, 7) == (1000 - 100 - 1) / 7 + 1);
  CHECK_THROWS_AS(make_windows(Matrix::Zero(3, 1), 3), DataError);

  SUBCASE("stride 1 covers every row") {
    std::mt19937_64 rng(1);
    const Matrix series = random_matrix(rng, 40, 1);
    std::vector<bool> seen(40, false);
    for (std::size_t s = 0; s < make_windows(series, 8).size(); ++s)
      for (Index r = 0; r <= 8; ++r) seen[s + static_cast<std::size_t>(r)] = true;
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  }
}

TEST_CASE("adam") {
  TrainConfig cfg;
  Tensor theta({1}, Matrix::Constant(1, 1, 0.0), true);
  std::vector<Tensor*> params{&theta};

  SUBCASE("first step moves by the learning rate") {
    AdamState s = adam_init(params);
    theta.grad()(0, 0) = 1.0;
    adam_step(params, s, cfg);
    CHECK(theta.data()(0, 0) == doctest::Approx(-0.001 / (1 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("zero gradient is a no-op") {
    AdamState s = adam_init(params);
    for (int i = 0; i < 5; ++i) adam_step(params, s, cfg);
    CHECK(theta.data()(0, 0) == 0.0);
  }
  SUBCASE("minimizes a parabola") {
    theta.data()(0, 0) = 1.0;
    TrainConfig fast = cfg;
    fast.learning_rate = 0.01;
    AdamState s = adam_init(params);
    double previous = 1.0;
    bool monotone = true;
    for (int i = 0; i < 100; ++i) {
      theta.grad()(0, 0) = 2.0 * theta.data()(0, 0);
      adam_step(params, s, fast);
      const double now = std::abs(theta.data()(0, 0));
      monotone = monotone && now <= previous;
      previous = now;
    }
    CHECK(monotone);
    CHECK(previous < 0.5);
  }
  SUBCASE("state shape drift") {
    AdamState s = adam_init(params);
    Tensor other({2}, true);
    std::vector<Tensor*> more{&theta, &other};
    CHECK_THROWS_AS(adam_step(more, s, cfg), StateError);
  }
}

TEST_CASE("training reduces the loss and is reproducible") {
  const Matrix series = sinusoids(300, 2);
  const ModelConfig model = tiny_model(2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.seed = 5;
  const TrainResult a = train(series, model, cfg);
  REQUIRE(a.curve.size() == 2);
  CHECK(a.curve[1].train < a.curve[0].train);
  CHECK(std::isfinite(a.curve[1].validation));
  CHECK(a.train_windows + a.validation_windows == 290);
  CHECK(a.validation_windows == 29);

  const TrainResult b = train(series, model, cfg);
  CHECK(a.curve[0].train == b.curve[0].train);
  CHECK(a.curve[1].validation == b.curve[1].validation);
  CHECK(parameter_blob(a.params) == parameter_blob(b.params));
}

TEST_CASE("one batch covering every window equals a full-batch step") {
  const Matrix series = sinusoids(40, 1);
  const ModelConfig model = tiny_model(1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.validation_fraction = 0;
  cfg.batch_size = 1000;
  const TrainResult a = train(series, model, cfg);
  cfg.batch_size = 30;  // exactly the window count
  const TrainResult b = train(series, model, cfg);
  CHECK(parameter_blob(a.params) == parameter_blob(b.params));
}

TEST_CASE("training input checks") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(train(sinusoids(50, 3), tiny_model(2), TrainConfig{}), ConfigError);
  CHECK_THROWS_AS(train(sinusoids(10, 2), tiny_model(2), TrainConfig{}), DataError);
}

TEST_CASE("checkpoint roundtrip") {
  const Checkpoint c = random_checkpoint(3, 7);
  const std::string bytes = serialize_checkpoint(c);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.model == c.model);
  CHECK(back.norm == c.norm);
  CHECK(back.meta == c.meta);
  CHECK(parameter_blob(back.params) == parameter_blob(c.params));
  CHECK(serialize_checkpoint(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "mtad_test_roundtrip.ckpt";
  save_checkpoint(c, path);
  CHECK(serialize_checkpoint(load_checkpoint(path)) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint load errors") {
  const std::string bytes = serialize_checkpoint(random_checkpoint(3, 8));
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 5)), CorruptCheckpointError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, 40)), CorruptCheckpointError);
  CHECK_THROWS_AS(deserialize_checkpoint("garbage"), CorruptCheckpointError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), CorruptCheckpointError);

  std::string versioned = bytes;
  const auto at = versioned.find("\"version\":1");
  REQUIRE(at != std::string::npos);
  versioned[at + 10] = '9';
  CHECK_THROWS_AS(deserialize_checkpoint(versioned), CheckpointVersionError);

  // same-length edit of the model config: the stored tensors no longer fit
  std::string reshaped = bytes;
  const auto k_at = reshaped.find("\"k\":3");
  REQUIRE(k_at != std::string::npos);
  reshaped[k_at + 4] = '4';
  CHECK_THROWS_AS(deserialize_checkpoint(reshaped), ConfigError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), DataError);
  CHECK_THROWS_AS(require_compatible(random_checkpoint(3, 1), 4), ConfigError);
}
