#include "dwellrec/clicks.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dwellrec/errors.hpp"
#include "dwellrec/rng.hpp"

namespace dwellrec {

namespace {

constexpr std::int64_t kMsPerDay = 86'400'000;

bool parse_int_field(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

// Fixed-width unsigned decimal field.
bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  out = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = s[i];
    if (c < '0' || c > '9') return false;
    out = out * 10 + (c - '0');
  }
  return true;
}

}  // namespace

std::int64_t parse_iso8601_ms(std::string_view ts) {
  // YYYY-MM-DDTHH:MM:SS.mmmZ, 24 characters.
  auto fail = [&] { throw ParseError("bad timestamp '" + std::string(ts) + "'"); };
  if (ts.size() != 24 || ts[4] != '-' || ts[7] != '-' || ts[10] != 'T' || ts[13] != ':' ||
      ts[16] != ':' || ts[19] != '.' || ts[23] != 'Z') {
    fail();
  }
  int year, month, day, hour, minute, second, milli;
  if (!parse_fixed(ts, 0, 4, year) || !parse_fixed(ts, 5, 2, month) ||
      !parse_fixed(ts, 8, 2, day) || !parse_fixed(ts, 11, 2, hour) ||
      !parse_fixed(ts, 14, 2, minute) || !parse_fixed(ts, 17, 2, second) ||
      !parse_fixed(ts, 20, 3, milli)) {
    fail();
  }
  const std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) fail();
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * kMsPerDay +
         ((hour * 60 + minute) * 60 + second) * 1000LL + milli;
}

std::string format_iso8601_ms(std::int64_t ms) {
  std::int64_t days = ms / kMsPerDay;
  std::int64_t rem = ms % kMsPerDay;
  if (rem < 0) {
    days -= 1;
    rem += kMsPerDay;
  }
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{static_cast<int>(days)}}};
  const int milli = static_cast<int>(rem % 1000);
  const int second = static_cast<int>((rem / 1000) % 60);
  const int minute = static_cast<int>((rem / 60'000) % 60);
  const int hour = static_cast<int>(rem / 3'600'000);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), hour, minute, second, milli);
  return buf;
}

std::vector<Click> parse_clicks(std::istream& in, ParseMode mode, ParseStats* stats) {
  std::vector<Click> clicks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const auto c1 = line.find(',');
      const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
      const auto c3 = line.find(',', c2 == std::string::npos ? c2 : c2 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos) {
        throw ParseError("expected 4 comma-separated fields");
      }
      std::string_view view(line);
      Click click;
      if (!parse_int_field(view.substr(0, c1), click.session_id)) {
        throw ParseError("bad session id");
      }
      click.timestamp_ms = parse_iso8601_ms(view.substr(c1 + 1, c2 - c1 - 1));
      if (!parse_int_field(view.substr(c2 + 1, c3 - c2 - 1), click.item_id)) {
        throw ParseError("bad item id");
      }
      click.category = std::string(view.substr(c3 + 1));
      if (click.timestamp_ms < 0) throw ParseError("negative timestamp");
      clicks.push_back(std::move(click));
      if (stats) ++stats->parsed;
    } catch (const ParseError& e) {
      if (mode == ParseMode::strict) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
      }
      if (stats) ++stats->skipped;
    }
  }
  return clicks;
}

std::vector<Click> parse_clicks_file(const std::string& path, ParseMode mode, ParseStats* stats) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open click file: " + path);
  return parse_clicks(in, mode, stats);
}

void write_clicks(std::ostream& out, std::span<const Click> clicks) {
  for (const Click& c : clicks) {
    out << c.session_id << ',' << format_iso8601_ms(c.timestamp_ms) << ',' << c.item_id << ','
        << c.category << '\n';
  }
}

void write_clicks_file(const std::string& path, std::span<const Click> clicks) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write click file: " + path);
  write_clicks(out, clicks);
}

std::vector<Session> build_sessions(std::vector<Click> clicks) {
  std::unordered_map<std::int64_t, std::size_t> slot;
  std::vector<Session> sessions;
  for (Click& c : clicks) {
    auto [it, inserted] = slot.try_emplace(c.session_id, sessions.size());
    if (inserted) {
      sessions.push_back(Session{c.session_id, {}});
    }
    sessions[it->second].clicks.push_back(std::move(c));
  }
  for (Session& s : sessions) {
    std::stable_sort(s.clicks.begin(), s.clicks.end(),
                     [](const Click& a, const Click& b) { return a.timestamp_ms < b.timestamp_ms; });
  }
  // sessions currently hold first-appearance order; stable sort keeps it for ties
  std::stable_sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
    return a.clicks.front().timestamp_ms < b.clicks.front().timestamp_ms;
  });
  return sessions;
}

Vocab build_vocab(std::span<const Session> train, std::int32_t dwell_cap_seconds) {
  Vocab vocab;
  vocab.dwell_bucket_count = dwell_cap_seconds + 1;
  for (const Session& s : train) {
    for (const Click& c : s.clicks) {
      auto [it, inserted] = vocab.item_to_index.try_emplace(c.item_id, vocab.size());
      if (inserted) vocab.index_to_item.push_back(c.item_id);
    }
  }
  if (vocab.index_to_item.empty()) {
    throw VocabError("build_vocab: no items in training sessions");
  }
  return vocab;
}

namespace {

std::string vocab_to_text(const Vocab& vocab) {
  std::ostringstream out;
  out << "dwell_buckets=" << vocab.dwell_bucket_count << '\n';
  for (std::int32_t i = 0; i < vocab.size(); ++i) {
    out << vocab.index_to_item[static_cast<std::size_t>(i)] << '\t' << i << '\n';
  }
  return out.str();
}

}  // namespace

void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocab file: " + path);
  out << vocab_to_text(vocab);
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("dwell_buckets=", 0) != 0) {
    throw ParseError("vocab file missing dwell_buckets header: " + path);
  }
  Vocab vocab;
  std::int64_t buckets = 0;
  if (!parse_int_field(std::string_view(line).substr(14), buckets) || buckets <= 0) {
    throw ParseError("bad dwell_buckets header in " + path);
  }
  vocab.dwell_bucket_count = static_cast<std::int32_t>(buckets);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    std::int64_t item = 0, index = 0;
    if (tab == std::string::npos ||
        !parse_int_field(std::string_view(line).substr(0, tab), item) ||
        !parse_int_field(std::string_view(line).substr(tab + 1), index)) {
      throw ParseError("vocab file line " + std::to_string(line_no) + " malformed in " + path);
    }
    if (index != vocab.size()) {
      throw ParseError("vocab file indices out of order at line " + std::to_string(line_no));
    }
    vocab.item_to_index.emplace(item, vocab.size());
    vocab.index_to_item.push_back(item);
  }
  if (vocab.index_to_item.empty()) throw VocabError("vocab file has no items: " + path);
  return vocab;
}

std::uint64_t vocab_fingerprint(const Vocab& vocab) {
  return fnv1a64(vocab_to_text(vocab));
}

}  // namespace dwellrec
