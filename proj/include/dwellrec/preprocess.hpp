#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dwellrec/clicks.hpp"

namespace dwellrec {

// One training/evaluation unit: a session prefix (dense item indices), the
// aligned dwell buckets, and the next item as target.
struct Example {
  std::int64_t session_id = 0;
  std::vector<std::int32_t> items;  // dense vocab indices, length 1..max_len-1
  std::vector<std::int32_t> dwell;  // dwell buckets, same length as items
  std::int32_t target = 0;          // dense vocab index

  std::size_t length() const { return items.size(); }

  friend bool operator==(const Example&, const Example&) = default;
};

struct FilterParams {
  std::size_t min_len = 2;
  std::size_t min_support = 5;
  std::size_t max_len = 16;
};

// Applies, in order and in a single pass: drop sessions shorter than min_len;
// drop clicks on items whose click count over the remaining sessions is below
// min_support; drop sessions that fell below min_len; drop sessions longer
// than max_len. No iteration to a fixpoint.
std::vector<Session> filter_dataset(std::vector<Session> sessions, const FilterParams& params = {});

// UTC calendar day (days since epoch) of a timestamp / of a session's last click.
std::int64_t utc_day(std::int64_t timestamp_ms);
std::int64_t session_day(const Session& s);

struct SplitSpec {
  std::vector<Session> train;
  std::vector<Session> heldout;
  std::int64_t boundary_day = 0;  // UTC day of the held-out sessions
};

// Held-out set = sessions whose last click falls on the maximum day present.
// Throws SplitError when all sessions end on a single day.
SplitSpec temporal_split(std::vector<Session> sessions);

struct Fold {
  std::vector<Session> train;
  std::vector<Session> val;
  std::int64_t val_day = 0;
};

// Fold i (1-based) validates on the i-th of the last n distinct end-days in
// the training range and trains on every session ending strictly before that
// day. Requires at least n+1 distinct end-days.
std::vector<Fold> make_folds(std::span<const Session> train, std::size_t n = 6);

std::unordered_set<std::int64_t> item_set(std::span<const Session> sessions);

// Drops clicks on items outside the training item set, then drops sessions
// that fell below length 2.
std::vector<Session> filter_unseen(std::span<const Session> eval_sessions,
                                   const std::unordered_set<std::int64_t>& train_items);

// Dwell buckets for a session of length k: one per click except the last,
// round-half-away-from-zero seconds clamped to [0, cap]. Throws OrderingError
// on a negative gap.
std::vector<std::int32_t> compute_dwell(const Session& s, std::int32_t cap_seconds = 3600);

// Emits the k-1 prefix examples of a session, item ids mapped through the
// vocab. The p-th example's last dwell bucket uses the target's timestamp.
std::vector<Example> augment(const Session& s, const Vocab& vocab, std::int32_t cap_seconds = 3600);
std::vector<Example> augment_all(std::span<const Session> sessions, const Vocab& vocab,
                                 std::int32_t cap_seconds = 3600);

// (bucket, count) pairs in ascending bucket order over all computed dwells.
std::vector<std::pair<std::int32_t, std::uint64_t>> dwell_histogram(
    std::span<const Session> sessions, std::int32_t cap_seconds = 3600);
void save_histogram_csv(std::span<const std::pair<std::int32_t, std::uint64_t>> hist,
                        const std::string& path);

// Text format: `session_id<TAB>i1,i2,...<TAB>d1,d2,...<TAB>target`.
void save_examples(std::span<const Example> examples, const std::string& path);
std::vector<Example> load_examples(const std::string& path);

}  // namespace dwellrec
