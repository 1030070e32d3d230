#include "sibdep/rng.hpp"

#include <array>

namespace sibdep {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::array<std::uint32_t, 5> words{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(stream),
      static_cast<std::uint32_t>(stream >> 32), 0x5eed5eedu};
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_index)
    : seed_(seed), stream_index_(stream_index),
      engine_(make_engine(seed, stream_index)) {}

std::uint64_t RngStream::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection, unbiased.
  __extension__ typedef unsigned __int128 u128;
  std::uint64_t x = engine_();
  u128 m = static_cast<u128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      x = engine_();
      m = static_cast<u128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::uint64_t RngStream::binomial(std::uint64_t trials, double p) {
  if (trials == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  if (trials < 16) {
    std::uint64_t hits = 0;
    for (std::uint64_t t = 0; t < trials; ++t) hits += uniform() < p ? 1 : 0;
    return hits;
  }
  std::binomial_distribution<std::uint64_t> dist(trials, p);
  return dist(engine_);
}

double RngStream::normal() {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

}  // namespace sibdep
