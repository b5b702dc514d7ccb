#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace netens {

// splitmix64: used only to mix/derive seeds, never as the sampling engine.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Stable substream derivation: master seed + textual role + indices.
// Every simulation consumer draws from its own stream keyed by (net_id,
// role, replicate), so thread scheduling cannot change any draw.
inline uint64_t derive_seed(uint64_t seed, std::string_view role, uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = splitmix64(seed ^ fnv1a(role));
  h = splitmix64(h ^ (a + 0x9e3779b97f4a7c15ull));
  h = splitmix64(h ^ (b + 0x7f4a7c159e3779b9ull));
  return h;
}

// Deterministic wrapper around mt19937_64. std:: distributions are not
// bit-reproducible across standard libraries, so the mappings are done
// by hand.
class Rng {
public:
  explicit Rng(uint64_t seed) : eng_(splitmix64(seed ^ 0x243f6a8885a308d3ull)) {}

  uint64_t bits() { return eng_(); }

  // uniform on [0,1) with 53 random bits
  double u01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), n >= 1; rejection keeps it exactly uniform
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return u01() < p; }

  // standard normal via Marsaglia polar (deterministic given the stream)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * u01() - 1.0;
      v = 2.0 * u01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace netens
