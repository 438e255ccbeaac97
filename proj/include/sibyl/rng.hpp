#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sibyl {

/// Deterministic random helpers. std::uniform_int_distribution and friends
/// are implementation-defined, so anything whose output ends up in a frozen
/// test value or a replayable artifact goes through these instead.
namespace rng {

using Engine = std::mt19937_64;

/// Derive an independent stream from a master seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Uniform integer in [0, n) without modulo bias.
inline std::uint64_t below(Engine& eng, std::uint64_t n) {
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t v;
  do {
    v = eng();
  } while (v >= limit);
  return v % n;
}

/// Uniform double in [0, 1).
inline double unit(Engine& eng) {
  return double(eng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller.
inline double gaussian(Engine& eng) {
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = unit(eng);
  const double u2 = unit(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[below(eng, i)]);
  }
}

/// k distinct indices drawn from [0, n), in draw order.
inline std::vector<int> sample_without_replacement(Engine& eng, int n, int k) {
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  std::vector<int> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    const std::uint64_t j = below(eng, n - i);
    out.push_back(pool[j]);
    std::swap(pool[j], pool[n - 1 - i]);
  }
  return out;
}

}  // namespace rng
}  // namespace sibyl
