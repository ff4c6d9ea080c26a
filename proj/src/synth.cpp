#include "dwellrec/synth.hpp"

#include <string>

#include "dwellrec/errors.hpp"
#include "dwellrec/rng.hpp"

namespace dwellrec {

namespace {

// 2014-04-01T00:00:00Z, an arbitrary fixed base so output is reproducible.
constexpr std::int64_t kBaseEpochMs = 1'396'310'400'000;
constexpr std::int64_t kMsPerDay = 86'400'000;

}  // namespace

void validate(const SynthSpec& spec) {
  if (spec.num_items < spec.branching + 2) {
    throw ConfigError("synth: num_items must exceed branching + 1 to build skip pools");
  }
  if (spec.num_sessions < 1 || spec.days < 1) {
    throw ConfigError("synth: need at least one session and one day");
  }
  if (spec.branching < 2) throw ConfigError("synth: branching must be >= 2");
  if (spec.signal < 0.0 || spec.signal > 1.0) throw ConfigError("synth: signal must be in [0,1]");
  if (spec.dwell_short_lo < 0 || spec.dwell_short_lo > spec.dwell_short_hi ||
      spec.dwell_long_lo > spec.dwell_long_hi) {
    throw ConfigError("synth: malformed dwell ranges");
  }
  if (spec.dwell_short_hi >= spec.dwell_long_lo) {
    throw ConfigError("synth: dwell ranges must be disjoint (short below long)");
  }
  if (spec.min_session_len < 2 || spec.min_session_len > spec.max_session_len) {
    throw ConfigError("synth: session length range must be [>=2, >=min]");
  }
  if (!spec.signal_by_day.empty()) {
    if (spec.signal_by_day.size() != spec.days) {
      throw ConfigError("synth: signal_by_day must list one value per day");
    }
    for (double s : spec.signal_by_day) {
      if (s < 0.0 || s > 1.0) throw ConfigError("synth: signal_by_day values must be in [0,1]");
    }
  }
}

std::vector<Click> synth_generate(const SynthSpec& spec) {
  validate(spec);
  DetRng rng(spec.seed);
  const std::size_t n = spec.num_items;

  // skip pools: `branching` distinct items per item, never i itself or its
  // ring successor
  std::vector<std::vector<std::size_t>> pools(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ring = (i + 1) % n;
    auto& pool = pools[i];
    while (pool.size() < spec.branching) {
      const std::size_t cand = rng.below(n);
      if (cand == i || cand == ring) continue;
      bool dup = false;
      for (std::size_t p : pool) dup = dup || (p == cand);
      if (!dup) pool.push_back(cand);
    }
  }

  // keep sessions inside their start day so session day == start day
  const std::int64_t max_session_ms =
      static_cast<std::int64_t>(spec.max_session_len) * (spec.dwell_long_hi + 1) * 1000;
  const std::int64_t start_window = kMsPerDay - max_session_ms;
  if (start_window <= 0) throw ConfigError("synth: sessions too long for one day");

  std::vector<Click> clicks;
  clicks.reserve(spec.num_sessions * (spec.min_session_len + spec.max_session_len) / 2);
  for (std::size_t s = 0; s < spec.num_sessions; ++s) {
    const std::int64_t session_id = static_cast<std::int64_t>(s) + 1;
    const auto len = static_cast<std::size_t>(
        rng.range(static_cast<std::int64_t>(spec.min_session_len),
                  static_cast<std::int64_t>(spec.max_session_len)));
    const std::size_t day = rng.below(spec.days);
    const double signal =
        spec.signal_by_day.empty() ? spec.signal : spec.signal_by_day[day];
    std::int64_t t = kBaseEpochMs + static_cast<std::int64_t>(day) * kMsPerDay +
                     static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(start_window)));
    std::size_t cur = rng.below(n);
    clicks.push_back({session_id, t, static_cast<std::int64_t>(cur) + 1, "0"});
    for (std::size_t step = 1; step < len; ++step) {
      std::int64_t dwell_s;
      std::size_t next;
      if (rng.uniform() < signal) {
        dwell_s = rng.range(spec.dwell_long_lo, spec.dwell_long_hi);
        next = (cur + 1) % n;
      } else {
        dwell_s = rng.range(spec.dwell_short_lo, spec.dwell_short_hi);
        next = pools[cur][rng.below(spec.branching)];
      }
      // sub-second jitter below 500 ms keeps the rounded bucket == dwell_s
      t += dwell_s * 1000 + static_cast<std::int64_t>(rng.below(500));
      clicks.push_back({session_id, t, static_cast<std::int64_t>(next) + 1, "0"});
      cur = next;
    }
  }
  return clicks;
}

void synth_generate_csv(const SynthSpec& spec, const std::string& path) {
  write_clicks_file(path, synth_generate(spec));
}

}  // namespace dwellrec
