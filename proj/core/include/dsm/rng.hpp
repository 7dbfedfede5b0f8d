#pragma once

#include <cstdint>
#include <limits>

namespace dsm {

/// PCG32 (XSH-RR output on a 64-bit LCG). The sequence is fully specified by
/// (seed, stream), so datasets and initializations reproduce bit-for-bit on
/// every platform. Satisfies UniformRandomBitGenerator.
class Pcg32 {
 public:
  using result_type = std::uint32_t;

  explicit Pcg32(std::uint64_t seed = 0x853c49e6748fea9bull, std::uint64_t stream = 0xda3e39cb94b95bdbull);

  std::uint32_t operator()() { return next_u32(); }
  std::uint32_t next_u32();

  /// Uniform integer in [0, bound) without modulo bias.
  std::uint32_t bounded(std::uint32_t bound);
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (the cosine branch only).
  double normal();

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
};

/// Derives an independent child seed, e.g. one per sample or per view.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace dsm
