#include "boxrefine/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace boxrefine {

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
  const double u = uniform01();
  if (lo == hi) return lo;
  return lo + (hi - lo) * u;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index requires n > 0");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal(double mean, double stddev) {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

bool Rng::bernoulli(double p) { return uniform01() < p; }

int Rng::binomial(int n, double p) {
  int k = 0;
  for (int i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
  return k;
}

int Rng::poisson(double lambda) {
  if (!(lambda >= 0) || lambda > 500) throw std::invalid_argument("poisson rate must be in [0, 500]");
  const double limit = std::exp(-lambda);
  int k = 0;
  double prod = uniform01();
  while (prod >= limit && limit > 0) {
    ++k;
    prod *= uniform01();
  }
  return k;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view image_id, std::string_view stream,
                          std::uint64_t counter) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ fnv1a64(stream));
  h = splitmix64(h ^ fnv1a64(image_id));
  return splitmix64(h ^ counter);
}

}  // namespace boxrefine
