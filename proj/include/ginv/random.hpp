#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ginv {

/// Portable random stream: std::mt19937_64 (fully specified by the C++
/// standard) with hand-written conversions, since the standard
/// distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for (seed, tags...) via std::seed_seq over 32-bit words.
  Rng(std::uint64_t seed, std::initializer_list<std::uint32_t> tags) : engine_(make_seq(seed, tags)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

 private:
  static std::mt19937_64 make_seq(std::uint64_t seed, std::initializer_list<std::uint32_t> tags) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                     static_cast<std::uint32_t>(seed >> 32)};
    words.insert(words.end(), tags.begin(), tags.end());
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
  }

  std::mt19937_64 engine_;
};

}  // namespace ginv
