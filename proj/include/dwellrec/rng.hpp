#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace dwellrec {

// 64-bit FNV-1a. Used for input-file digests in experiment manifests and for
// vocab fingerprints in checkpoints. Not cryptographic.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64(std::string_view s);

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Derives a child seed from a base seed and a salt (fold index, grid cell
// sizes, epoch number, ...). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt_a, std::uint64_t salt_b);

// Deterministic random source: std::mt19937_64 (whose output sequence the
// standard fully specifies) plus hand-written value mappings, because the
// std::*_distribution algorithms are implementation-defined and would break
// cross-platform reproducibility.
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit mantissa construction.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection of the final partial block.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t x, r;
    do {
      x = eng_();
      r = x % n;
    } while (x - r > std::uint64_t(0) - n);
    return r;
  }

  // Inclusive integer range.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace dwellrec
