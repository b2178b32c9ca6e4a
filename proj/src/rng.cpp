#include "netopt/rng.hpp"

#include "netopt/error.hpp"

namespace netopt {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed ^ mix64(stream + kGolden))) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return mix64(key_ + (counter + 1) * kGolden);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

std::size_t draw_categorical(const Vector& f, double u) {
  if (f.size() == 0) throw InvalidArgument("cannot draw from an empty distribution");
  double acc = 0.0;
  std::size_t last = 0;
  for (Eigen::Index s = 0; s < f.size(); ++s) {
    if (f[s] <= 0.0) continue;
    acc += f[s];
    last = static_cast<std::size_t>(s);
    if (u < acc) return last;
  }
  // Rounding left the cumulative sum just below 1.
  return last;
}

}  // namespace netopt
