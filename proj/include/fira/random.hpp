#pragma once

#include <cstddef>
#include <cstdint>

#include "fira/linalg.hpp"

namespace fira {

// Counter-based SplitMix64 stream.
//
// The i-th raw output of a stream with key k is mix64(k + (i + 1) * 0x9E3779B97F4A7C15),
// i.e. the SplitMix64 sequence seeded with k. Streams are derived from a
// parent key and a stream index with split(), so results depend only on
// (seed, stream path) and never on thread scheduling or call order between
// streams. Normal variates use Box-Muller on two consecutive uniforms;
// uniforms are the top 53 bits scaled into (0, 1].
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed)) {}

  static std::uint64_t mix64(std::uint64_t z);

  // Independent child stream.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  // Uniform in (0, 1].
  double uniform();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

 private:
  struct Raw {};
  Rng(std::uint64_t key, Raw) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fira
