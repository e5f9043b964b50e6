#pragma once

// Deterministic random number generation. Everything stochastic in this
// project flows through these integer-state generators so that a fixed seed
// reproduces bit-identical results across runs and platforms. Floating-point
// variates are built from integer bits with exact arithmetic only
// (no libm calls), which keeps synthetic data generation portable.

#include <cstdint>
#include <string_view>
#include <vector>

namespace amdprog {

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ull;

// One splitmix64 step. Advances `state` and returns the output word.
inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += kGolden64;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// FNV-1a, used to fold string identifiers (patient ids, stream tags)
// into seed material.
inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

// Derives an independent child seed from a base seed and up to three
// integer coordinates (fold index, draw index, entity hash, ...). Distinct
// coordinates give statistically independent streams.
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                           std::uint64_t b = 0,
                                           std::uint64_t c = 0) {
  std::uint64_t s = base;
  std::uint64_t out = splitmix64(s);
  s = out ^ (a * kGolden64);
  out = splitmix64(s);
  s = out ^ (b * 0xC2B2AE3D27D4EB4Full);
  out = splitmix64(s);
  s = out ^ (c * 0x165667B19E3779F9ull);
  return splitmix64(s);
}

// Maps 64 random bits to a double in [0, 1) with 53-bit resolution.
inline constexpr double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline constexpr float unit_float(std::uint64_t bits) {
  return static_cast<float>(bits >> 40) * 0x1.0p-24f;
}

// xoshiro256** by Blackman & Vigna, seeded via splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1).
  double uniform() { return unit_double(next_u64()); }

  float uniform_float() { return unit_float(next_u64()); }

  // Uniform in [0, n) without modulo bias (Lemire's method with rejection).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    while (true) {
      std::uint64_t x = next_u64();
      __uint128_t m = static_cast<__uint128_t>(x) * n;
      std::uint64_t lo = static_cast<std::uint64_t>(m);
      if (lo >= n || lo >= (0 - n) % n) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t range_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

// One uniform in [0,1) addressed by (seed, draw, entity); used where each
// entity needs an independent draw that does not depend on how many other
// entities are present (per-eye visit sampling).
inline constexpr double indexed_unit(std::uint64_t seed, std::uint64_t draw,
                                     std::uint64_t entity_hash) {
  return unit_double(derive_seed(seed, draw, entity_hash));
}

}  // namespace amdprog
