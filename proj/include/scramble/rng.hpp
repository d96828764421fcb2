#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace scramble {

// Deterministic sampling helpers on top of mt19937_64. The engine's output
// sequence is pinned by the standard; the standard *distributions* are not,
// so uniforms and normals are constructed explicitly to keep every seeded
// run bit-reproducible across compilers.

// uniform double in [0, 1) with 53 random bits
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// uniform integer in [0, bound) by rejection (no modulo bias)
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below: zero bound");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

// standard normal via Box-Muller on explicit uniforms
inline double standard_normal(std::mt19937_64& gen) {
  double u1;
  do {
    u1 = uniform01(gen);
  } while (u1 <= 0.0);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
}

// splitmix64 finalizer; used to derive independent streams from a master
// seed plus stream coordinates (e.g. scenario index, replicate index)
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ (a + 1)) ^ (b + 1));
}

// Fisher-Yates shuffle driven by uniform_below
template <typename T>
void shuffle(std::vector<T>& xs, std::mt19937_64& gen) {
  for (std::size_t i = xs.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(gen, i));
    std::swap(xs[i - 1], xs[j]);
  }
}

// m distinct indices drawn uniformly from [0, n), in draw order
inline std::vector<int> sample_without_replacement(int n, int m, std::mt19937_64& gen) {
  if (m < 0 || m > n) throw std::invalid_argument("sample_without_replacement: bad count");
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::vector<int> out(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(gen, static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    out[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace scramble
