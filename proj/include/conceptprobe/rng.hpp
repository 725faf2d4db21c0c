#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cprobe {

/// Reproducible random stream over std::mt19937_64.
///
/// The engine's output sequence is fixed by the C++ standard, but the standard
/// distributions are not, so uniform and normal draws are derived here from raw
/// engine words. Results are therefore identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Standard normal via the Box-Muller transform.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// First `k` entries of a Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace cprobe
