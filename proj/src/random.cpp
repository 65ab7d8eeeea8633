#include "shiftlab/random.hpp"

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <numeric>

namespace shiftlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffULL); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(index), hi(index), 0x5348u};
  return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t index)
    : seed_(seed), index_(index), engine_(make_engine(seed, index)) {}

RandomStream RandomStream::substream(std::uint64_t child) const {
  return RandomStream(seed_, splitmix64(splitmix64(index_) ^ (child + 0x632be59bd9b4e019ULL)));
}

double RandomStream::uniform() { return boost::random::uniform_01<double>()(engine_); }

double RandomStream::normal(double mean, double stddev) {
  return boost::random::normal_distribution<double>(mean, stddev)(engine_);
}

bool RandomStream::bernoulli(double p) { return boost::random::bernoulli_distribution<double>(p)(engine_); }

std::size_t RandomStream::uniform_index(std::size_t n) {
  require(n > 0, "uniform_index: empty range");
  return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

Matrix RandomStream::normal_matrix(Eigen::Index n, Eigen::Index dim) {
  Matrix out(n, dim);
  boost::random::normal_distribution<double> dist;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) out(i, j) = dist(engine_);
  return out;
}

std::vector<std::size_t> RandomStream::sample_without_replacement(std::size_t n, std::size_t k) {
  require(k <= n, "sample_without_replacement: k exceeds n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace shiftlab
