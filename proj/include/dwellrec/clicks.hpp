#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dwellrec {

// One click event in the RecSys-2015 schema. category is carried through for
// completeness but never used by the models.
struct Click {
  std::int64_t session_id = 0;
  std::int64_t timestamp_ms = 0;  // milliseconds since Unix epoch, UTC
  std::int64_t item_id = 0;
  std::string category;

  friend bool operator==(const Click&, const Click&) = default;
};

// Time-ordered series of clicks sharing a session id.
struct Session {
  std::int64_t session_id = 0;
  std::vector<Click> clicks;

  std::size_t length() const { return clicks.size(); }
};

// Bidirectional item-id <-> dense-index map plus the dwell bucket count
// (cap + 1 buckets, 0..cap inclusive).
struct Vocab {
  std::unordered_map<std::int64_t, std::int32_t> item_to_index;
  std::vector<std::int64_t> index_to_item;
  std::int32_t dwell_bucket_count = 0;

  std::int32_t size() const { return static_cast<std::int32_t>(index_to_item.size()); }
};

enum class ParseMode { strict, lenient };

struct ParseStats {
  std::size_t parsed = 0;
  std::size_t skipped = 0;
};

// Parses "YYYY-MM-DDTHH:MM:SS.mmmZ" to epoch milliseconds. Throws ParseError.
std::int64_t parse_iso8601_ms(std::string_view ts);
std::string format_iso8601_ms(std::int64_t ms);

// Parses headerless CSV lines `session_id,timestamp,item_id,category`.
// Strict mode throws ParseError naming the first bad line; lenient mode
// counts and skips bad lines via stats.
std::vector<Click> parse_clicks(std::istream& in, ParseMode mode = ParseMode::strict,
                                ParseStats* stats = nullptr);
std::vector<Click> parse_clicks_file(const std::string& path, ParseMode mode = ParseMode::strict,
                                     ParseStats* stats = nullptr);

void write_clicks(std::ostream& out, std::span<const Click> clicks);
void write_clicks_file(const std::string& path, std::span<const Click> clicks);

// Groups clicks by session id and sorts each group by timestamp (stable, so
// equal timestamps keep input order). Sessions come out ordered by their
// first timestamp; ties keep first-appearance order.
std::vector<Session> build_sessions(std::vector<Click> clicks);

// Dense indices assigned in first-appearance order over the given sessions.
// Throws VocabError on empty input.
Vocab build_vocab(std::span<const Session> train, std::int32_t dwell_cap_seconds);

// Text format: header line `dwell_buckets=<n>`, then `item_id<TAB>index` per
// line in index order.
void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

// FNV-1a digest of the canonical vocab serialization; stored in checkpoints.
std::uint64_t vocab_fingerprint(const Vocab& vocab);

}  // namespace dwellrec
