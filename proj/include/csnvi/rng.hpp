#pragma once

#include "csnvi/linalg.hpp"

#include <cstdint>
#include <random>

namespace csnvi {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded random stream. Sub-streams are derived deterministically from the
/// root seed and an index, so parallel consumers never share state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  RngStream substream(std::uint64_t index) const { return RngStream(splitmix64(seed_ ^ splitmix64(index + 1))); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace csnvi
