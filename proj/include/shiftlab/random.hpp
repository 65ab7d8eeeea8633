// Seeded, platform-stable random streams.
//
// A stream is identified by (master seed, stream index). The engine is
// std::mt19937_64 (fully specified by the standard) seeded through
// std::seed_seq, and distributions come from Boost.Random, whose output does
// not depend on the standard library implementation.
#pragma once

#include "shiftlab/core.hpp"

#include <cstdint>
#include <random>

namespace shiftlab {

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t index = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t index() const { return index_; }

  /// Independent child stream; children of the same parent and index coincide.
  RandomStream substream(std::uint64_t child) const;

  double uniform();  // [0, 1)
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p);
  std::size_t uniform_index(std::size_t n);  // [0, n)

  /// n x dim matrix of i.i.d. standard normals.
  Matrix normal_matrix(Eigen::Index n, Eigen::Index dim);

  /// First k entries of a uniformly random permutation of 0..n-1.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t index_;
  std::mt19937_64 engine_;
};

}  // namespace shiftlab
