#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace koopobs {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

using Box = std::vector<Interval>;
using Point = std::vector<double>;

/// Seeded 64-bit generator. `split` derives an independent child stream so
/// that each analysis step draws from its own sequence regardless of how
/// many numbers earlier steps consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  Rng split(std::uint64_t stream) const;

  /// Uniform in [0, 1), 53-bit resolution, identical on every platform.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

std::vector<Point> sample_box(const Box& box, std::size_t count, Rng& rng);

}  // namespace koopobs
