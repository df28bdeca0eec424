#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "raresim/vec2.hpp"

namespace raresim {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a stream seed from a master seed and a path of tags
// (e.g. {kStreamRollout, step, index}). The scheme is splittable:
// distinct paths give statistically independent streams, and the
// result does not depend on worker scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t tag : path) h = mix64(h ^ mix64(tag + 0x6a09e667f3bcc909ULL));
  return h;
}

// Stream purposes, kept distinct so reordering call sites never aliases streams.
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamTrainRollout = 2;
inline constexpr std::uint64_t kStreamEstimate = 3;
inline constexpr std::uint64_t kStreamScaling = 4;
inline constexpr std::uint64_t kStreamShuffle = 5;

// Deterministic random stream. The engine (mt19937_64) is fully specified
// by the standard; the Gaussian sampler is an explicit Box-Muller transform
// rather than std::normal_distribution, whose algorithm is
// implementation-defined. Draw order is part of the reproducibility contract.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform in (0, 1]; never returns 0 so log() is safe.
  double uniform01() {
    const std::uint64_t r = engine_();
    return (static_cast<double>(r >> 11) + 1.0) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * (uniform01() - 0x1.0p-53); }

  // One Box-Muller pair of independent standard normals.
  Vec2 gaussian_pair() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  // Uniform point in the disc of the given radius around the center.
  // Consumes no draws when radius == 0.
  Position2 uniform_in_disc(Position2 center, double radius) {
    if (radius == 0.0) return center;
    const double r = radius * std::sqrt(uniform01());
    const double angle = 2.0 * 3.14159265358979323846 * uniform01();
    return {center.x + r * std::cos(angle), center.y + r * std::sin(angle)};
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace raresim
