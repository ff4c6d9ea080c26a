#include <algorithm>
#include <numeric>
#include <set>

#include <doctest.h>

#include "dwellrec/errors.hpp"
#include "dwellrec/preprocess.hpp"
#include "dwellrec/rng.hpp"
#include "fixtures.hpp"

using namespace dwellrec;
using namespace dwellrec::test;

namespace {

constexpr std::int64_t kDayMs = 86'400'000;
constexpr std::int64_t kBase = 1'396'310'400'000;  // 2014-04-01T00:00:00Z

Session make_session(std::int64_t id, std::vector<std::int64_t> items, std::int64_t start_ms,
                     std::int64_t gap_ms = 10'000) {
  Session s;
  s.session_id = id;
  std::int64_t t = start_ms;
  for (std::int64_t item : items) {
    s.clicks.push_back({id, t, item, "0"});
    t += gap_ms;
  }
  return s;
}

std::vector<std::int64_t> items_of(const Session& s) {
  std::vector<std::int64_t> out;
  for (const Click& c : s.clicks) out.push_back(c.item_id);
  return out;
}

}  // namespace

TEST_CASE("filter_dataset drops short and overlong sessions") {
  std::vector<Session> sessions;
  sessions.push_back(make_session(1, {5}, kBase));                       // len 1
  sessions.push_back(make_session(2, std::vector<std::int64_t>(17, 5), kBase));  // len 17
  sessions.push_back(make_session(3, std::vector<std::int64_t>(6, 5), kBase));   // len 6
  const auto kept = filter_dataset(sessions);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].session_id == 3);
}

TEST_CASE("filter_dataset matches the hand-enumerated 20-session fixture") {
  const auto kept = filter_dataset(filter_fixture_sessions());
  const auto expected = filter_fixture_expected();
  REQUIRE(kept.size() == expected.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    CHECK(kept[i].session_id == expected[i].first);
    CHECK(items_of(kept[i]) == expected[i].second);
  }
  std::size_t clicks = 0;
  for (const Session& s : kept) clicks += s.length();
  CHECK(clicks == 59);
}

TEST_CASE("filter_dataset is idempotent") {
  const auto once = filter_dataset(filter_fixture_sessions());
  const auto twice = filter_dataset(once);
  REQUIRE(once.size() == twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(once[i].session_id == twice[i].session_id);
    CHECK(once[i].clicks == twice[i].clicks);
  }
}

TEST_CASE("temporal_split holds out the last day by last click") {
  std::vector<Session> sessions;
  sessions.push_back(make_session(1, {5, 6}, kBase));             // day 0
  sessions.push_back(make_session(2, {5, 6}, kBase + kDayMs));    // day 1
  sessions.push_back(make_session(3, {6, 5}, kBase + kDayMs / 2));  // day 0
  const SplitSpec split = temporal_split(sessions);
  CHECK(split.train.size() == 2);
  REQUIRE(split.heldout.size() == 1);
  CHECK(split.heldout[0].session_id == 2);
  CHECK(split.boundary_day == utc_day(kBase) + 1);
}

TEST_CASE("a session crossing midnight belongs to the day of its last click") {
  std::vector<Session> sessions;
  sessions.push_back(make_session(1, {5, 6}, kBase));  // day 0, train
  // starts 23:59, ends 00:01 next day
  sessions.push_back(make_session(2, {5, 6}, kBase + kDayMs - 60'000, 120'000));
  const SplitSpec split = temporal_split(sessions);
  REQUIRE(split.heldout.size() == 1);
  CHECK(split.heldout[0].session_id == 2);
}

TEST_CASE("temporal_split rejects single-day corpora") {
  std::vector<Session> sessions{make_session(1, {5, 6}, kBase),
                                make_session(2, {6, 5}, kBase + 1000)};
  CHECK_THROWS_AS(temporal_split(sessions), SplitError);
}

TEST_CASE("temporal_split sizes match generator bookkeeping on an 8-day corpus") {
  DetRng rng(211);
  std::vector<Session> sessions;
  std::vector<std::size_t> per_day(8, 0);
  std::int64_t id = 1;
  for (int day = 0; day < 8; ++day) {
    const std::size_t n = 3 + rng.below(10);
    per_day[static_cast<std::size_t>(day)] = n;
    for (std::size_t i = 0; i < n; ++i) {
      sessions.push_back(make_session(id++, {5, 6, 7}, kBase + day * kDayMs + 1000 * id));
    }
  }
  const SplitSpec split = temporal_split(sessions);
  CHECK(split.heldout.size() == per_day[7]);
  CHECK(split.train.size() ==
        std::accumulate(per_day.begin(), per_day.end() - 1, std::size_t{0}));
}

TEST_CASE("make_folds validates on the last six days and trains strictly before") {
  std::vector<Session> sessions;
  std::int64_t id = 1;
  std::vector<std::size_t> per_day(10, 0);
  DetRng rng(223);
  for (int day = 0; day < 10; ++day) {
    const std::size_t n = 2 + rng.below(4);
    per_day[static_cast<std::size_t>(day)] = n;
    for (std::size_t i = 0; i < n; ++i) {
      sessions.push_back(make_session(id++, {5, 6}, kBase + day * kDayMs + 1000 * id));
    }
  }
  const auto folds = make_folds(sessions, 6);
  REQUIRE(folds.size() == 6);
  const std::int64_t day0 = utc_day(kBase);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(folds[i].val_day == day0 + 4 + static_cast<std::int64_t>(i));  // days 5..10, 1-based
    CHECK(folds[i].val.size() == per_day[4 + i]);
    std::size_t expected_train = 0;
    for (std::size_t d = 0; d < 4 + i; ++d) expected_train += per_day[d];
    CHECK(folds[i].train.size() == expected_train);
    for (const Session& s : folds[i].train) CHECK(session_day(s) < folds[i].val_day);
    for (const Session& s : folds[i].val) CHECK(session_day(s) == folds[i].val_day);
  }

  SUBCASE("validation sets partition the last six days") {
    std::set<std::int64_t> val_ids;
    std::size_t total = 0;
    for (const auto& fold : folds) {
      for (const Session& s : fold.val) {
        val_ids.insert(s.session_id);
        ++total;
      }
    }
    CHECK(val_ids.size() == total);  // pairwise disjoint
    std::size_t last6 = 0;
    for (std::size_t d = 4; d < 10; ++d) last6 += per_day[d];
    CHECK(total == last6);
  }
}

TEST_CASE("make_folds requires enough distinct days") {
  std::vector<Session> sessions;
  for (int day = 0; day < 6; ++day) {
    sessions.push_back(make_session(day + 1, {5, 6}, kBase + day * kDayMs));
  }
  CHECK_THROWS_AS(make_folds(sessions, 6), SplitError);
}

TEST_CASE("filter_unseen drops unseen clicks and undersized sessions") {
  const std::unordered_set<std::int64_t> train_items{5, 6, 7};
  std::vector<Session> eval_sessions;
  eval_sessions.push_back(make_session(1, {99, 98}, kBase));      // all unseen
  eval_sessions.push_back(make_session(2, {5, 99, 6}, kBase));    // middle click unseen
  eval_sessions.push_back(make_session(3, {5, 99}, kBase));       // falls under length 2
  const auto kept = filter_unseen(eval_sessions, train_items);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].session_id == 2);
  CHECK(items_of(kept[0]) == std::vector<std::int64_t>{5, 6});
}

TEST_CASE("compute_dwell rounds to the nearest second and clamps") {
  Session s;
  s.session_id = 1;
  s.clicks = {{1, 0, 5, "0"}, {1, 12'400, 6, "0"}, {1, 47'900, 7, "0"}};
  CHECK(compute_dwell(s) == std::vector<std::int32_t>{12, 36});

  Session long_gap;
  long_gap.session_id = 2;
  long_gap.clicks = {{2, 0, 5, "0"}, {2, 7'200'000, 6, "0"}};
  CHECK(compute_dwell(long_gap, 3600) == std::vector<std::int32_t>{3600});
}

TEST_CASE("compute_dwell rejects unsorted sessions") {
  Session s;
  s.session_id = 1;
  s.clicks = {{1, 5000, 5, "0"}, {1, 1000, 6, "0"}};
  CHECK_THROWS_AS(compute_dwell(s), OrderingError);
}

TEST_CASE("compute_dwell matches independent integer arithmetic on random sessions") {
  DetRng rng(227);
  for (int trial = 0; trial < 100; ++trial) {
    Session s;
    s.session_id = trial;
    std::int64_t t = static_cast<std::int64_t>(rng.below(1'000'000'000));
    const std::size_t len = 2 + rng.below(15);
    for (std::size_t i = 0; i < len; ++i) {
      s.clicks.push_back({s.session_id, t, 5, "0"});
      t += static_cast<std::int64_t>(rng.below(8'000'000));  // up to ~2.2 h
    }
    const std::int32_t cap = 3600;
    const auto buckets = compute_dwell(s, cap);
    REQUIRE(buckets.size() == len - 1);
    for (std::size_t i = 0; i + 1 < len; ++i) {
      const std::int64_t gap = s.clicks[i + 1].timestamp_ms - s.clicks[i].timestamp_ms;
      // independent route: decompose into whole seconds + remainder
      std::int64_t whole = gap / 1000;
      if (gap % 1000 >= 500) whole += 1;
      if (whole > cap) whole = cap;
      CHECK(buckets[i] == static_cast<std::int32_t>(whole));
    }
  }
}

TEST_CASE("augment emits one example per prefix") {
  const Session s = make_session(1, {101, 102, 103, 104, 105}, kBase);
  std::vector<Session> train{s};
  const Vocab vocab = build_vocab(train, 3600);
  const auto examples = augment(s, vocab);
  REQUIRE(examples.size() == 4);
  for (std::size_t p = 0; p < 4; ++p) {
    CHECK(examples[p].length() == p + 1);
    CHECK(examples[p].dwell.size() == p + 1);
    CHECK(examples[p].target == static_cast<std::int32_t>(p + 1));  // first-appearance indices
    CHECK(examples[p].session_id == 1);
  }
  CHECK(examples[0].items == std::vector<std::int32_t>{0});
  CHECK(examples[3].items == std::vector<std::int32_t>{0, 1, 2, 3});
  // every dwell here is the 10 s gap, including the one to the target
  for (const auto& ex : examples) {
    for (std::int32_t d : ex.dwell) CHECK(d == 10);
  }
}

TEST_CASE("augment of a length-2 session gives a single example") {
  const Session s = make_session(1, {101, 102}, kBase);
  std::vector<Session> train{s};
  const Vocab vocab = build_vocab(train, 3600);
  const auto examples = augment(s, vocab);
  REQUIRE(examples.size() == 1);
  CHECK(examples[0].items == std::vector<std::int32_t>{0});
  CHECK(examples[0].target == 1);
}

TEST_CASE("augment rejects items missing from the vocab") {
  const Session in_vocab = make_session(1, {101, 102}, kBase);
  std::vector<Session> train{in_vocab};
  const Vocab vocab = build_vocab(train, 3600);
  const Session with_unseen = make_session(2, {101, 999}, kBase);
  CHECK_THROWS_AS(augment(with_unseen, vocab), VocabError);
}

TEST_CASE("augmented example count equals sum of (session length - 1)") {
  const auto sessions = filter_dataset(filter_fixture_sessions());
  const Vocab vocab = build_vocab(sessions, 3600);
  const auto examples = augment_all(sessions, vocab);
  std::size_t expected = 0;
  for (const Session& s : sessions) expected += s.length() - 1;
  CHECK(examples.size() == expected);
  CHECK(examples.size() == 43);  // fixture bookkeeping
  for (const auto& ex : examples) {
    CHECK(ex.items.size() == ex.dwell.size());
    CHECK(ex.length() >= 1);
    CHECK(ex.length() <= 15);
    CHECK(ex.target < vocab.size());
    for (std::int32_t i : ex.items) CHECK(i < vocab.size());
  }
}

TEST_CASE("dwell_histogram counts buckets") {
  std::vector<Session> sessions;
  {
    Session a;
    a.session_id = 1;
    a.clicks = {{1, 0, 5, "0"}, {1, 3000, 6, "0"}};
    Session b;
    b.session_id = 2;
    b.clicks = {{2, 0, 5, "0"}, {2, 3000, 6, "0"}, {2, 8000, 7, "0"}};
    sessions = {a, b};
  }
  const auto hist = dwell_histogram(sessions, 3600);
  REQUIRE(hist.size() == 2);
  CHECK(hist[0] == std::pair<std::int32_t, std::uint64_t>{3, 2});
  CHECK(hist[1] == std::pair<std::int32_t, std::uint64_t>{5, 1});

  std::uint64_t total = 0;
  for (const auto& [bucket, count] : hist) total += count;
  std::size_t expected = 0;
  for (const Session& s : sessions) expected += s.length() - 1;
  CHECK(total == expected);
}

TEST_CASE("examples round-trip through the on-disk format") {
  const auto sessions = filter_dataset(filter_fixture_sessions());
  const Vocab vocab = build_vocab(sessions, 3600);
  const auto examples = augment_all(sessions, vocab);
  const std::string path = "examples_roundtrip_test.tsv";
  save_examples(examples, path);
  const auto loaded = load_examples(path);
  CHECK(loaded == examples);
  std::remove(path.c_str());
}
