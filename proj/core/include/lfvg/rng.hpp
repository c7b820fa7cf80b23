#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <initializer_list>
#include <random>

#include "lfvg/tensor.hpp"

namespace lfvg {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a path of stream tags, e.g.
/// derive_seed(master, {kVideoStream, video_index}).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed);
  for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

/// Explicit random state. Distributions are written out here rather than taken
/// from <random> because the standard leaves their algorithms unspecified, and
/// generated datasets must be byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in the open interval (0, 1).
  double uniform_open() {
    double u;
    do u = uniform();
    while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw InvalidInputError("uniform_index: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Exponential(1), i.e. Gamma(1, 1).
  double exponential() { return -std::log(uniform_open()); }

  /// Standard Gumbel noise -log(-log(u)) with u clamped to [1e-10, 1-1e-10].
  double gumbel() {
    double u = uniform();
    u = std::clamp(u, 1e-10, 1.0 - 1e-10);
    return -std::log(-std::log(u));
  }

  Matrix normal_matrix(Index rows, Index cols, double sd = 1.0) {
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = sd * normal();
    return m;
  }

  Vector normal_vector(Index n, double sd = 1.0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = sd * normal();
    return v;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stream tags for derive_seed; stable values, persisted implicitly in outputs.
enum class Stream : std::uint64_t {
  world = 1,
  video = 2,
  query = 3,
  kmeans = 4,
  init_grounding = 5,
  init_selector = 6,
  epoch_shuffle = 7,
  pair = 8,
  random_baseline = 9,
  clutter = 10,
};

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace lfvg
