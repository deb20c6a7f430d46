#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "skde/types.hpp"

namespace skde {

// Deterministic random stream.  All sampling helpers are hand-rolled on top of
// mt19937_64 so that results are identical across standard-library versions;
// std::normal_distribution and std::shuffle are deliberately avoided.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Stream for replicate r of a run seeded with `seed`; distinct replicates
  /// get decorrelated engines via seed_seq.
  static RandomStream for_replicate(std::uint64_t seed, std::uint64_t replicate) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate & 0xffffffffu),
                      static_cast<std::uint32_t>(replicate >> 32)};
    RandomStream s(0);
    s.engine_.seed(seq);
    return s;
  }

  /// Uniform on [0, 1).
  Scalar uniform() {
    return static_cast<Scalar>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  /// Standard normal via the polar method.
  Scalar normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    Scalar u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const Scalar factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    have_spare_ = true;
    return u * factor;
  }

  Vector normal_vector(Index d) {
    Vector z(d);
    for (Index i = 0; i < d; ++i) z(i) = normal();
    return z;
  }

  /// Fisher–Yates permutation of {0, ..., n-1}.
  std::vector<Index> permutation(Index n) {
    std::vector<Index> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), Index{0});
    for (Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Index>(below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
  }

 private:
  std::mt19937_64 engine_;
  Scalar spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace skde
