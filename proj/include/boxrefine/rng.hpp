#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace boxrefine {

/// Seedable generator with a fixed algorithm identity: std::mt19937_64 for the
/// raw stream, and distribution transforms implemented here rather than taken
/// from <random> (whose distributions are implementation-defined). Identical
/// seeds produce identical draws on every platform.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+boxrefine-dist-v1";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform in [lo, hi]; returns lo when lo == hi.
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal(double mean, double stddev);
  bool bernoulli(double p);
  /// Sum of n Bernoulli(p) trials.
  int binomial(int n, double p);
  /// Knuth's multiplication method. Requires 0 <= lambda <= 500.
  int poisson(double lambda);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

/// Stream-specific sub-seed for one image, independent of processing order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view image_id, std::string_view stream,
                          std::uint64_t counter = 0);

}  // namespace boxrefine
