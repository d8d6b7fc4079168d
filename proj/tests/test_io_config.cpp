#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "mtad/config.hpp"
#include "mtad/io.hpp"
#include "mtad/synth.hpp"
#include "test_util.hpp"

using namespace mtad;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("mtad_io_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("values csv keeps every double exactly") {
  TempDir dir;
  std::mt19937_64 rng(1);
  Table t{{"a", "b", "c"}, test::random_matrix(rng, 50, 3, -1e6, 1e6)};
  t.values(0, 0) = 1e-300;
  t.values(1, 1) = std::numeric_limits<double>::denorm_min();
  t.values(2, 2) = -0.0;
  t.values(3, 0) = 0.1;
  write_values_csv(dir / "v.csv", t);
  const Table back = read_values_csv(dir / "v.csv");
  CHECK(back.names == t.names);
  CHECK(back.values == t.values);
}

TEST_CASE("values csv errors") {
  TempDir dir;
  write_text(dir / "ragged.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_values_csv(dir / "ragged.csv"), DataError);
  write_text(dir / "text.csv", "a,b\n1,x\n");
  CHECK_THROWS_AS(read_values_csv(dir / "text.csv"), DataError);
  write_text(dir / "empty.csv", "");
  CHECK_THROWS_AS(read_values_csv(dir / "empty.csv"), DataError);
  CHECK_THROWS_AS(read_values_csv(dir / "missing.csv"), DataError);
}

TEST_CASE("labels, alarms and root causes") {
  TempDir dir;
  const Flags labels{false, true, true, false, true};
  write_labels_csv(dir / "l.csv", labels);
  CHECK(read_labels_csv(dir / "l.csv") == labels);
  write_alarms_csv(dir / "a.csv", labels);
  CHECK(read_alarms_csv(dir / "a.csv") == labels);
  write_text(dir / "bad.csv", "label\n0\n2\n");
  CHECK_THROWS_AS(read_labels_csv(dir / "bad.csv"), DataError);

  const std::vector<std::string> names{"x", "y", "z"};
  const std::vector<RootCause> causes{{3, 9, {0, 2}}, {20, 20, {1}}};
  write_root_causes_csv(dir / "rc.csv", causes, names);
  const auto back = read_root_causes_csv(dir / "rc.csv", names);
  REQUIRE(back.size() == 2);
  CHECK(back[0].begin == 3);
  CHECK(back[0].end == 9);
  CHECK(back[0].features == std::vector<Index>{0, 2});
  CHECK(back[1].features == std::vector<Index>{1});
  CHECK_THROWS_AS(read_root_causes_csv(dir / "rc.csv", {"x", "y"}), DataError);
}

TEST_CASE("scores csv") {
  TempDir dir;
  std::mt19937_64 rng(2);
  ScoreSeries s;
  s.offset = 7;
  s.feature_scores = test::random_matrix(rng, 12, 2, 0, 1);
  s.total = s.feature_scores.rowwise().sum();
  write_scores_csv(dir / "s.csv", s, {"u", "v"});
  const ScoreSeries back = read_scores_csv(dir / "s.csv");
  CHECK(back.offset == 7);
  CHECK(back.total == s.total);
  CHECK(back.feature_scores == s.feature_scores);
  write_text(dir / "gap.csv", "timestamp,total,s_u\n3,1,1\n5,1,1\n");
  CHECK_THROWS_AS(read_scores_csv(dir / "gap.csv"), DataError);
}

TEST_CASE("csv field splitting") {
  CHECK(split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split_csv_line("1,2,\"f0,f3\"") == std::vector<std::string>{"1", "2", "f0,f3"});
  CHECK(split_csv_line("\"say \"\"hi\"\"\"") == std::vector<std::string>{"say \"hi\""});
}

TEST_CASE("run config json") {
  RunConfig cfg;
  cfg.model.k = 6;
  cfg.model.gamma = 0.5;
  cfg.train.epochs = 3;
  cfg.scoring.calibration = "validation";
  cfg.paths.scores = "out/s.csv";
  const RunConfig back = run_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(back.model == cfg.model);
  CHECK(back.train == cfg.train);
  CHECK(back.paths == cfg.paths);

  SUBCASE("partial sections keep defaults") {
    const RunConfig partial = run_config_from_json(nlohmann::json::parse(R"({"train": {"epochs": 5}})"));
    CHECK(partial.train.epochs == 5);
    CHECK(partial.train.batch_size == TrainConfig{}.batch_size);
    CHECK(partial.model == ModelConfig{});
  }
  SUBCASE("unknown keys, sections and wrong types are rejected") {
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"train": {"epoch": 5}})")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"optimizer": {}})")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"train": {"epochs": "many"}})")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"model": {"n": 1.5}})")), ConfigError);
  }
  SUBCASE("files") {
    TempDir dir;
    write_text(dir / "c.json", R"({"model": {"k": 3}, "scoring": {"q": 0.01}})");
    const RunConfig loaded = load_run_config(dir / "c.json");
    CHECK(loaded.model.k == 3);
    CHECK(loaded.scoring.q == 0.01);
    write_text(dir / "broken.json", "{ not json");
    CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
    CHECK_THROWS_AS(load_run_config(dir / "absent.json"), ConfigError);
    write_text(dir / "invalid.json", R"({"train": {"epochs": 0}})");
    CHECK_THROWS_AS(load_run_config(dir / "invalid.json"), ConfigError);
  }
}

TEST_CASE("overrides") {
  RunConfig cfg;
  apply_override(cfg, "model.gamma=0.25");
  CHECK(cfg.model.gamma == 0.25);
  apply_override(cfg, "paths.scores=out/scores.csv");
  CHECK(cfg.paths.scores == "out/scores.csv");
  apply_override(cfg, "model.use_time_gat=false");
  CHECK_FALSE(cfg.model.use_time_gat);
  apply_override(cfg, "sr.enabled=false");
  CHECK_FALSE(cfg.sr_enabled);
  CHECK_THROWS_AS(apply_override(cfg, "model.gamma"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "gamma=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "model.nope=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "train.epochs=abc"), ConfigError);
}

TEST_CASE("synthetic benchmark") {
  SynthConfig cfg;
  cfg.length = 2000;
  cfg.seed = 3;
  const SynthDataset a = synthesize(cfg);
  const SynthDataset b = synthesize(cfg);
  CHECK(a.train.values == b.train.values);
  CHECK(a.test.values == b.test.values);
  CHECK(a.labels == b.labels);
  CHECK(a.train.values.rows() == 1000);
  CHECK(a.test.values.rows() == 1000);
  CHECK(a.train.names == std::vector<std::string>{"f0", "f1", "f2", "f3"});
  CHECK(a.causes.size() == 8);
  CHECK(std::count(a.kinds.begin(), a.kinds.end(), EventKind::correlation_break) == 1);

  // labels are exactly the union of the event ranges
  Flags expected(a.labels.size(), false);
  for (const RootCause& c : a.causes) {
    CHECK(c.begin >= cfg.warmup);
    CHECK_FALSE(c.features.empty());
    for (Index t = c.begin; t <= c.end; ++t) expected[static_cast<std::size_t>(t)] = true;
  }
  CHECK(a.labels == expected);

  cfg.seed = 4;
  CHECK(synthesize(cfg).test.values != a.test.values);

  SUBCASE("explicit events") {
    SynthConfig explicit_cfg = cfg;
    explicit_cfg.specs = {{EventKind::spike, 200, 0, {1}},
                          {EventKind::level_shift, 400, 30, {0, 2}},
                          {EventKind::correlation_break, 600, 0, {3}}};
    const SynthDataset d = synthesize(explicit_cfg);
    REQUIRE(d.causes.size() == 3);
    CHECK(d.causes[0].features == std::vector<Index>{1});
    CHECK(d.causes[1].begin == 400);
    CHECK(d.causes[1].end == 429);
    CHECK(d.kinds[2] == EventKind::correlation_break);
    CHECK(d.warnings.empty());
  }
  SUBCASE("no events") {
    SynthConfig quiet = cfg;
    quiet.events = 0;
    const SynthDataset d = synthesize(quiet);
    CHECK(d.causes.empty());
    CHECK(std::count(d.labels.begin(), d.labels.end(), true) == 0);
  }
  SUBCASE("events inside the warmup are moved with a warning") {
    SynthConfig early = cfg;
    early.specs = {{EventKind::spike, 10, 0, {0}}};
    const SynthDataset d = synthesize(early);
    CHECK(d.causes[0].begin == early.warmup);
    CHECK(d.warnings.size() == 1);
  }
  SUBCASE("kind names") {
    for (EventKind k : {EventKind::spike, EventKind::level_shift, EventKind::correlation_break})
      CHECK(event_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(event_kind_from_string("wobble"), ConfigError);
  }
}
