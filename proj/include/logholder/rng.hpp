#pragma once

#include <cstdint>

namespace logholder {

// Counter-based random streams. Each draw is a stateless hash of
// (key, counter), so a stream keyed by (seed, family, atom, step) produces
// the same values no matter how work is partitioned across threads.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
}

}  // namespace detail

class SeedStream {
 public:
  explicit SeedStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return detail::splitmix64(key_ ^ detail::splitmix64(counter_++)); }

  /// Uniform double in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1]; safe for inverse-CDF sampling of heavy tails.
  double next_unit_open0() { return 1.0 - next_unit(); }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stream key derived from a root seed and up to three labels
/// (typically family id, atom index, step).
inline SeedStream make_stream(std::uint64_t seed, std::uint64_t a = 0,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t k = detail::splitmix64(seed);
  k = detail::mix(k, a);
  k = detail::mix(k, b);
  k = detail::mix(k, c);
  return SeedStream(k);
}

}  // namespace logholder
