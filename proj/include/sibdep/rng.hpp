#ifndef SIBDEP_RNG_HPP
#define SIBDEP_RNG_HPP

#include <cstdint>
#include <random>

namespace sibdep {

/// Reproducible random stream identified by (seed, stream_index). Each
/// replica of a Monte Carlo computation owns one stream; the stream index is
/// the replica id, so results do not depend on how replicas are scheduled.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_index);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }

  result_type operator()() { return engine_(); }
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t binomial(std::uint64_t trials, double p);
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
};

}  // namespace sibdep

#endif  // SIBDEP_RNG_HPP
