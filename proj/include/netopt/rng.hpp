#pragma once

#include <cstddef>
#include <cstdint>

#include "netopt/model.hpp"

namespace netopt {

/// Counter-based generator: draw k of a stream is a pure function of
/// (seed, stream, k), so runs are reproducible regardless of thread layout.
/// Draw k equals output k of SplitMix64 started from a key derived from
/// (seed, stream).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const;

 private:
  std::uint64_t key_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

/// Inverse-CDF draw from a probability vector given u in [0, 1). States with
/// zero probability are never returned.
std::size_t draw_categorical(const Vector& f, double u);

}  // namespace netopt
