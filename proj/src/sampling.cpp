#include "koopobs/sampling.hpp"

namespace koopobs {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 1)));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::vector<Point> sample_box(const Box& box, std::size_t count, Rng& rng) {
  std::vector<Point> out(count, Point(box.size()));
  for (auto& p : out) {
    for (std::size_t i = 0; i < box.size(); ++i) p[i] = rng.uniform(box[i].lo, box[i].hi);
  }
  return out;
}

}  // namespace koopobs
