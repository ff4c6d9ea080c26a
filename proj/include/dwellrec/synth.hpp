#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dwellrec/clicks.hpp"

namespace dwellrec {

// Generator for desk-scale click corpora with a controllable dwell signal.
//
// Items 0..num_items-1 each have a fixed ring successor g(i) = i+1 mod N and
// a per-item "skip" pool of `branching` random items (excluding i and g(i)),
// both fixed by the seed. A session walk at item i follows the ring with
// probability `signal`, drawing its dwell from the long range, and otherwise
// jumps uniformly into the skip pool with a dwell from the short range. The
// dwell bucket therefore predicts the transition type exactly when the
// ranges are disjoint and 0 < signal < 1.
struct SynthSpec {
  std::size_t num_items = 200;
  std::size_t num_sessions = 20000;
  std::size_t days = 8;
  double signal = 0.9;
  std::int32_t dwell_short_lo = 1;  // seconds, inclusive bounds
  std::int32_t dwell_short_hi = 5;
  std::int32_t dwell_long_lo = 30;
  std::int32_t dwell_long_hi = 40;
  std::size_t branching = 4;
  std::uint64_t seed = 1;

  // optional per-day signal override (index = day within the window);
  // empty means the constant `signal` everywhere
  std::vector<double> signal_by_day;

  // session length drawn uniformly from this inclusive range
  std::size_t min_session_len = 2;
  std::size_t max_session_len = 16;
};

// Throws ConfigError when ranges overlap, branching < 2, etc.
void validate(const SynthSpec& spec);

// Deterministic per seed. Click item ids are 1-based; categories are "0".
// Session start times spread uniformly over the day window, offset so a
// session never crosses midnight (keeps per-day fold structure exact).
std::vector<Click> synth_generate(const SynthSpec& spec);

void synth_generate_csv(const SynthSpec& spec, const std::string& path);

}  // namespace dwellrec
