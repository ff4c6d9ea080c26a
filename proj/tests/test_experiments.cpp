#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <doctest.h>

#include "dwellrec/errors.hpp"
#include "dwellrec/experiments.hpp"
#include "dwellrec/rng.hpp"

using namespace dwellrec;
namespace fs = std::filesystem;

namespace {

SynthSpec tiny_spec(std::uint64_t seed = 5, double signal = 0.9) {
  SynthSpec spec;
  spec.num_items = 30;
  spec.num_sessions = 600;
  spec.days = 9;
  spec.signal = signal;
  spec.branching = 3;
  spec.min_session_len = 2;
  spec.max_session_len = 8;
  spec.seed = seed;
  return spec;
}

StudyConfig tiny_study(std::uint64_t seed = 1) {
  StudyConfig cfg;
  cfg.item_em_size = 8;
  cfg.it_rnn_size = 8;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 128;
  cfg.train.seed = seed;
  return cfg;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool is_ring_transition(std::int64_t from_id, std::int64_t to_id, std::size_t num_items) {
  return to_id == (from_id % static_cast<std::int64_t>(num_items)) + 1;
}

}  // namespace

TEST_CASE("synth_generate is deterministic per seed") {
  const auto a = synth_generate(tiny_spec(7));
  const auto b = synth_generate(tiny_spec(7));
  const auto c = synth_generate(tiny_spec(8));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("synth_generate validates its spec") {
  SynthSpec overlap = tiny_spec();
  overlap.dwell_short_hi = 35;  // overlaps the long range
  CHECK_THROWS_AS(synth_generate(overlap), ConfigError);

  SynthSpec narrow = tiny_spec();
  narrow.branching = 1;
  CHECK_THROWS_AS(synth_generate(narrow), ConfigError);

  SynthSpec bad_days = tiny_spec();
  bad_days.signal_by_day = {0.5};  // wrong length
  CHECK_THROWS_AS(synth_generate(bad_days), ConfigError);
}

TEST_CASE("synthetic corpora pass preprocessing without loss") {
  const auto clicks = synth_generate(tiny_spec(11));
  const auto sessions = build_sessions(clicks);
  const auto filtered = filter_dataset(sessions);
  CHECK(filtered.size() == sessions.size());
  std::size_t clicks_before = 0, clicks_after = 0;
  for (const Session& s : sessions) clicks_before += s.length();
  for (const Session& s : filtered) clicks_after += s.length();
  CHECK(clicks_before == clicks_after);
  CHECK(clicks_before == clicks.size());
}

TEST_CASE("dwell class is uninformative when signal is zero") {
  SynthSpec spec = tiny_spec(13, /*signal=*/0.0);
  const auto clicks = synth_generate(spec);
  const auto sessions = build_sessions(clicks);

  // joint counts over (dwell class, transition type)
  double n = 0, short_ring = 0, short_skip = 0, long_ring = 0, long_skip = 0;
  for (const Session& s : sessions) {
    const auto dwell = compute_dwell(s);
    for (std::size_t i = 0; i + 1 < s.length(); ++i) {
      const bool is_short = dwell[i] <= spec.dwell_short_hi;
      const bool ring =
          is_ring_transition(s.clicks[i].item_id, s.clicks[i + 1].item_id, spec.num_items);
      n += 1;
      if (is_short && ring) short_ring += 1;
      if (is_short && !ring) short_skip += 1;
      if (!is_short && ring) long_ring += 1;
      if (!is_short && !ring) long_skip += 1;
    }
  }
  REQUIRE(n > 0);
  // mutual information of the empirical joint
  double mi = 0.0;
  const double joint[2][2] = {{short_ring / n, short_skip / n}, {long_ring / n, long_skip / n}};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const double pxy = joint[x][y];
      if (pxy == 0.0) continue;
      const double px = joint[x][0] + joint[x][1];
      const double py = joint[0][y] + joint[1][y];
      mi += pxy * std::log(pxy / (px * py));
    }
  }
  CHECK(std::fabs(mi) < 1e-9);  // single dwell class, zero by construction

  SUBCASE("signal 0.9 makes the dwell class perfectly informative") {
    const auto informative = synth_generate(tiny_spec(13, 0.9));
    for (const Session& s : build_sessions(informative)) {
      const auto dwell = compute_dwell(s);
      for (std::size_t i = 0; i + 1 < s.length(); ++i) {
        const bool is_short = dwell[i] <= tiny_spec().dwell_short_hi;
        const bool ring =
            is_ring_transition(s.clicks[i].item_id, s.clicks[i + 1].item_id, 30);
        CHECK(is_short == !ring);
      }
    }
  }
}

TEST_CASE("Bayes-optimal recall@1 from enumerating the generative process") {
  const double signal = 0.9;
  const std::size_t branching = 4;
  // enumerate transitions: ring w.p. signal (long dwell), each skip-pool item
  // w.p. (1-signal)/branching (short dwell)
  struct Outcome {
    bool ring;
    bool long_dwell;
    double p;
  };
  std::vector<Outcome> outcomes;
  outcomes.push_back({true, true, signal});
  for (std::size_t i = 0; i < branching; ++i) {
    outcomes.push_back({false, false, (1.0 - signal) / static_cast<double>(branching)});
  }

  // dwell-aware: within each dwell class pick the most likely single target
  double aware = 0.0;
  for (const bool dwell_long : {false, true}) {
    double best = 0.0;
    double ring_mass = 0.0, skip_item_mass = 0.0;
    for (const Outcome& o : outcomes) {
      if (o.long_dwell != dwell_long) continue;
      if (o.ring) {
        ring_mass += o.p;
      } else {
        skip_item_mass = std::max(skip_item_mass, o.p);
      }
    }
    best = std::max(ring_mass, skip_item_mass);
    aware += best;
  }
  CHECK(aware == doctest::Approx(0.925).epsilon(1e-12));

  // dwell-blind: one guess regardless of dwell; the ring successor dominates
  double ring_total = 0.0, best_skip = 0.0;
  for (const Outcome& o : outcomes) {
    if (o.ring) {
      ring_total += o.p;
    } else {
      best_skip = std::max(best_skip, o.p);
    }
  }
  CHECK(std::max(ring_total, best_skip) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("grid_search returns sorted rows and reproducible winners") {
  const auto clicks = synth_generate(tiny_spec(17));
  const auto sessions = filter_dataset(build_sessions(clicks));
  const SplitSpec split = temporal_split(sessions);
  const SplitSpec val_split = temporal_split(split.train);

  GridSpec grid;
  grid.dt_em_sizes = {4, 8};
  grid.dt_rnn_sizes = {4, 8};
  const StudyConfig cfg = tiny_study(3);
  const auto rows = grid_search(grid, val_split.train, val_split.heldout, cfg);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i - 1].recall >= rows[i].recall);
  }

  SUBCASE("winner metrics equal a standalone re-run") {
    const GridRow& winner = rows[0];
    GridSpec single;
    single.dt_em_sizes = {winner.sizes.dt_em_size};
    single.dt_rnn_sizes = {winner.sizes.dt_rnn_size};
    const auto rerun = grid_search(single, val_split.train, val_split.heldout, cfg);
    REQUIRE(rerun.size() == 1);
    CHECK(rerun[0].recall == winner.recall);
    CHECK(rerun[0].mrr == winner.mrr);
    CHECK(rerun[0].seed == winner.seed);
  }

  SUBCASE("ranking is independent of grid enumeration order") {
    GridSpec flipped;
    flipped.dt_em_sizes = {8, 4};
    flipped.dt_rnn_sizes = {8, 4};
    const auto rows2 = grid_search(flipped, val_split.train, val_split.heldout, cfg);
    REQUIRE(rows2.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(rows2[i].sizes.dt_em_size == rows[i].sizes.dt_em_size);
      CHECK(rows2[i].sizes.dt_rnn_size == rows[i].sizes.dt_rnn_size);
      CHECK(rows2[i].recall == rows[i].recall);
    }
  }
}

TEST_CASE("fold_study averages equal hand-computed means of its own matrix") {
  const auto clicks = synth_generate(tiny_spec(19));
  const auto sessions = filter_dataset(build_sessions(clicks));
  const std::vector<DtSizes> configs{{4, 4}, {8, 4}};
  const auto folds = make_folds(sessions, 3);
  const auto result = fold_study(configs, folds, tiny_study(7));
  REQUIRE(result.recall.size() == 3);
  REQUIRE(result.averages.size() == 2);
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (std::size_t f = 0; f < 3; ++f) sum += result.recall[f][c];
    CHECK(result.averages[c] == doctest::Approx(sum / 3.0).epsilon(1e-15));
  }
  CHECK(result.winner < 2);
  CHECK(result.fold_winners.size() == 3);
}

TEST_CASE("last_prefix_only keeps one longest example per session") {
  const auto clicks = synth_generate(tiny_spec(23));
  const auto sessions = filter_dataset(build_sessions(clicks));
  const Vocab vocab = build_vocab(sessions, 3600);
  const auto examples = augment_all(sessions, vocab);
  const auto last = last_prefix_only(examples);
  CHECK(last.size() == sessions.size());
  std::map<std::int64_t, std::size_t> length_by_session;
  for (const Session& s : sessions) length_by_session[s.session_id] = s.length();
  for (const Example& ex : last) {
    CHECK(ex.length() == length_by_session[ex.session_id] - 1);
  }
}

TEST_CASE("run_experiment writes byte-identical aggregates for identical configs") {
  const fs::path base = fs::temp_directory_path() / "dwellrec_runexp_test";
  fs::remove_all(base);
  fs::create_directories(base);

  const fs::path config_path = base / "config.json";
  {
    std::ofstream cfg(config_path);
    cfg << R"({
      "pipeline": "full",
      "seed": 11,
      "synth": {"num_items": 30, "num_sessions": 400, "days": 6, "signal": 0.9,
                 "branching": 3, "session_len": [2, 8]},
      "model": {"kind": "both", "item_em_size": 8, "it_rnn_size": 8,
                 "dt_em_size": 4, "dt_rnn_size": 4},
      "train": {"epochs": 2, "batch_size": 128}
    })";
  }

  const std::string out1 = run_experiment(config_path.string(), (base / "run1").string(), {});
  const std::string out2 = run_experiment(config_path.string(), (base / "run2").string(), {});

  for (const char* rel : {"it_rnn/aggregate.json", "dt_rnn/aggregate.json", "compare.json"}) {
    CHECK(slurp(fs::path(out1) / rel) == slurp(fs::path(out2) / rel));
  }

  SUBCASE("manifest records input digests") {
    const std::string manifest = slurp(fs::path(out1) / "manifest.json");
    CHECK(manifest.find("\"inputs\"") != std::string::npos);
    CHECK(manifest.find("0x") != std::string::npos);
  }
  SUBCASE("expected artifacts exist") {
    for (const char* rel : {"vocab.tsv", "train.examples", "test.examples",
                            "it_rnn/trainlog.csv", "it_rnn/report.csv",
                            "dt_rnn/epoch_2.ckpt"}) {
      CHECK(fs::exists(fs::path(out1) / rel));
    }
  }
  fs::remove_all(base);
}

TEST_CASE("run_experiment rejects malformed configs with the config path") {
  const fs::path base = fs::temp_directory_path() / "dwellrec_badcfg_test";
  fs::create_directories(base);
  const fs::path config_path = base / "bad.json";
  {
    std::ofstream cfg(config_path);
    cfg << R"({"pipeline": "full", "clicks": "/nonexistent/clicks.csv"})";
  }
  CHECK_THROWS_WITH_AS(run_experiment(config_path.string(), (base / "out").string(), {}),
                       doctest::Contains("bad.json"), ConfigError);
  CHECK_THROWS_AS(run_experiment((base / "missing.json").string()), ConfigError);
  fs::remove_all(base);
}

TEST_CASE("end-to-end smoke on the bundled fixture completes within a minute") {
  const fs::path fixture = fs::path(DWELLREC_TEST_DATA_DIR) / "fixture_200.csv";
  REQUIRE_MESSAGE(fs::exists(fixture), "bundled fixture missing: ", fixture.string());

  const fs::path base = fs::temp_directory_path() / "dwellrec_fixture_smoke";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path config_path = base / "config.json";
  {
    std::ofstream cfg(config_path);
    cfg << R"({
      "pipeline": "full",
      "seed": 3,
      "clicks": ")" << fixture.string() << R"(",
      "model": {"kind": "both", "item_em_size": 16, "it_rnn_size": 16,
                 "dt_em_size": 4, "dt_rnn_size": 4},
      "train": {"epochs": 6, "batch_size": 128}
    })";
  }

  const auto t0 = std::chrono::steady_clock::now();
  const std::string out = run_experiment(config_path.string(), (base / "out").string(), {});
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(seconds < 60.0);
  CHECK(fs::exists(fs::path(out) / "compare.json"));
  CHECK(fs::exists(fs::path(out) / "manifest.json"));
  fs::remove_all(base);
}
