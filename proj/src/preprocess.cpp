#include "dwellrec/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <unordered_map>

#include "dwellrec/errors.hpp"

namespace dwellrec {

namespace {

constexpr std::int64_t kMsPerDay = 86'400'000;

}  // namespace

std::vector<Session> filter_dataset(std::vector<Session> sessions, const FilterParams& params) {
  // (1) short sessions out
  std::erase_if(sessions, [&](const Session& s) { return s.length() < params.min_len; });

  // (2) item support = click count over the remaining sessions
  std::unordered_map<std::int64_t, std::size_t> support;
  for (const Session& s : sessions) {
    for (const Click& c : s.clicks) ++support[c.item_id];
  }
  for (Session& s : sessions) {
    std::erase_if(s.clicks,
                  [&](const Click& c) { return support[c.item_id] < params.min_support; });
  }

  // (3) re-check min length, (4) cap length
  std::erase_if(sessions, [&](const Session& s) {
    return s.length() < params.min_len || s.length() > params.max_len;
  });
  return sessions;
}

std::int64_t utc_day(std::int64_t timestamp_ms) {
  std::int64_t d = timestamp_ms / kMsPerDay;
  if (timestamp_ms % kMsPerDay < 0) d -= 1;
  return d;
}

std::int64_t session_day(const Session& s) { return utc_day(s.clicks.back().timestamp_ms); }

SplitSpec temporal_split(std::vector<Session> sessions) {
  if (sessions.empty()) throw SplitError("temporal_split: no sessions");
  std::int64_t last_day = session_day(sessions.front());
  std::int64_t first_day = last_day;
  for (const Session& s : sessions) {
    const std::int64_t d = session_day(s);
    last_day = std::max(last_day, d);
    first_day = std::min(first_day, d);
  }
  if (first_day == last_day) {
    throw SplitError("temporal_split: all sessions end on one day, nothing to hold out");
  }
  SplitSpec split;
  split.boundary_day = last_day;
  for (Session& s : sessions) {
    if (session_day(s) == last_day) {
      split.heldout.push_back(std::move(s));
    } else {
      split.train.push_back(std::move(s));
    }
  }
  return split;
}

std::vector<Fold> make_folds(std::span<const Session> train, std::size_t n) {
  std::map<std::int64_t, std::size_t> day_counts;
  for (const Session& s : train) ++day_counts[session_day(s)];
  if (day_counts.size() < n + 1) {
    throw SplitError("make_folds: need at least " + std::to_string(n + 1) +
                     " distinct end-days, have " + std::to_string(day_counts.size()));
  }
  std::vector<std::int64_t> days;
  days.reserve(day_counts.size());
  for (const auto& [day, _] : day_counts) days.push_back(day);

  std::vector<Fold> folds;
  folds.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t val_day = days[days.size() - n + i];
    Fold fold;
    fold.val_day = val_day;
    for (const Session& s : train) {
      const std::int64_t d = session_day(s);
      if (d == val_day) {
        fold.val.push_back(s);
      } else if (d < val_day) {
        fold.train.push_back(s);
      }
      // sessions ending after the validation day are excluded
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

std::unordered_set<std::int64_t> item_set(std::span<const Session> sessions) {
  std::unordered_set<std::int64_t> items;
  for (const Session& s : sessions) {
    for (const Click& c : s.clicks) items.insert(c.item_id);
  }
  return items;
}

std::vector<Session> filter_unseen(std::span<const Session> eval_sessions,
                                   const std::unordered_set<std::int64_t>& train_items) {
  std::vector<Session> out;
  for (const Session& s : eval_sessions) {
    Session kept;
    kept.session_id = s.session_id;
    for (const Click& c : s.clicks) {
      if (train_items.contains(c.item_id)) kept.clicks.push_back(c);
    }
    if (kept.length() >= 2) out.push_back(std::move(kept));
  }
  return out;
}

std::vector<std::int32_t> compute_dwell(const Session& s, std::int32_t cap_seconds) {
  if (s.length() < 2) {
    throw OrderingError("compute_dwell: session " + std::to_string(s.session_id) +
                        " has fewer than 2 clicks");
  }
  std::vector<std::int32_t> buckets;
  buckets.reserve(s.length() - 1);
  for (std::size_t j = 0; j + 1 < s.length(); ++j) {
    const std::int64_t gap_ms = s.clicks[j + 1].timestamp_ms - s.clicks[j].timestamp_ms;
    if (gap_ms < 0) {
      throw OrderingError("compute_dwell: negative gap in session " +
                          std::to_string(s.session_id));
    }
    // round to nearest second, half away from zero; gaps are nonnegative
    std::int64_t secs = (gap_ms + 500) / 1000;
    secs = std::min<std::int64_t>(secs, cap_seconds);
    buckets.push_back(static_cast<std::int32_t>(secs));
  }
  return buckets;
}

std::vector<Example> augment(const Session& s, const Vocab& vocab, std::int32_t cap_seconds) {
  const std::vector<std::int32_t> dwell = compute_dwell(s, cap_seconds);
  std::vector<std::int32_t> indices;
  indices.reserve(s.length());
  for (const Click& c : s.clicks) {
    const auto it = vocab.item_to_index.find(c.item_id);
    if (it == vocab.item_to_index.end()) {
      throw VocabError("augment: item " + std::to_string(c.item_id) +
                       " not in vocab (session " + std::to_string(s.session_id) + ")");
    }
    indices.push_back(it->second);
  }

  std::vector<Example> examples;
  examples.reserve(s.length() - 1);
  for (std::size_t p = 1; p < s.length(); ++p) {
    Example ex;
    ex.session_id = s.session_id;
    ex.items.assign(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(p));
    ex.dwell.assign(dwell.begin(), dwell.begin() + static_cast<std::ptrdiff_t>(p));
    ex.target = indices[p];
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<Example> augment_all(std::span<const Session> sessions, const Vocab& vocab,
                                 std::int32_t cap_seconds) {
  std::vector<Example> out;
  for (const Session& s : sessions) {
    auto ex = augment(s, vocab, cap_seconds);
    out.insert(out.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
  }
  return out;
}

std::vector<std::pair<std::int32_t, std::uint64_t>> dwell_histogram(
    std::span<const Session> sessions, std::int32_t cap_seconds) {
  std::map<std::int32_t, std::uint64_t> counts;
  for (const Session& s : sessions) {
    for (std::int32_t b : compute_dwell(s, cap_seconds)) ++counts[b];
  }
  return {counts.begin(), counts.end()};
}

void save_histogram_csv(std::span<const std::pair<std::int32_t, std::uint64_t>> hist,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write histogram: " + path);
  out << "bucket,count\n";
  for (const auto& [bucket, count] : hist) out << bucket << ',' << count << '\n';
}

namespace {

void write_joined(std::ostream& out, std::span<const std::int32_t> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << values[i];
  }
}

std::vector<std::int32_t> parse_joined(std::string_view s, const std::string& what) {
  std::vector<std::int32_t> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string_view::npos) comma = s.size();
    std::int32_t v = 0;
    const char* b = s.data() + pos;
    const char* e = s.data() + comma;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e) throw ParseError("bad integer list in " + what);
    out.push_back(v);
    pos = comma + 1;
    if (comma == s.size()) break;
  }
  return out;
}

}  // namespace

void save_examples(std::span<const Example> examples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write examples: " + path);
  for (const Example& ex : examples) {
    out << ex.session_id << '\t';
    write_joined(out, ex.items);
    out << '\t';
    write_joined(out, ex.dwell);
    out << '\t' << ex.target << '\n';
  }
}

std::vector<Example> load_examples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open examples: " + path);
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    std::string_view view(line);
    const auto t1 = view.find('\t');
    const auto t2 = view.find('\t', t1 == std::string_view::npos ? t1 : t1 + 1);
    const auto t3 = view.find('\t', t2 == std::string_view::npos ? t2 : t2 + 1);
    if (t3 == std::string_view::npos) throw ParseError("expected 4 tab fields at " + where);
    Example ex;
    {
      std::int64_t sid = 0;
      const char* b = view.data();
      auto [ptr, ec] = std::from_chars(b, b + t1, sid);
      if (ec != std::errc{} || ptr != b + t1) throw ParseError("bad session id at " + where);
      ex.session_id = sid;
    }
    ex.items = parse_joined(view.substr(t1 + 1, t2 - t1 - 1), where);
    ex.dwell = parse_joined(view.substr(t2 + 1, t3 - t2 - 1), where);
    {
      std::int32_t target = 0;
      const char* b = view.data() + t3 + 1;
      const char* e = view.data() + view.size();
      auto [ptr, ec] = std::from_chars(b, e, target);
      if (ec != std::errc{} || ptr != e) throw ParseError("bad target at " + where);
      ex.target = target;
    }
    if (ex.items.size() != ex.dwell.size() || ex.items.empty()) {
      throw ParseError("item/dwell length mismatch at " + where);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace dwellrec
