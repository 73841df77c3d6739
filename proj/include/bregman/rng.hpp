#ifndef BREGMAN_RNG_HPP
#define BREGMAN_RNG_HPP

#include <cstdint>
#include <span>

namespace bregman {

/// SplitMix64 finalizer round; the basis for seeding and sub-stream derivation.
std::uint64_t mix64(std::uint64_t z);

/// Derives an independent sub-stream seed from a master seed and up to three
/// stream labels. Equal inputs give equal outputs, so parallel and serial
/// schedules of the same work see identical randomness.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// xoshiro256++ stream seeded via SplitMix64, with the sampling routines the
/// project needs layered on top. std:: engines would do, but the standard
/// leaves distribution algorithms unspecified, and every stochastic output
/// here must be reproducible from the seed alone.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53 random bits.
  double uniform01();

  /// Unbiased uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (spare value cached).
  double normal();

  /// Gamma(shape, rate) via Marsaglia-Tsang; mean = shape/rate.
  double gamma(double shape, double rate);

  /// Poisson(mean) count; inversion for small means, PTRS rejection above.
  long poisson(double mean);

  /// Symmetric Dirichlet(alpha) sample of dimension out.size().
  void dirichlet(double alpha, std::span<double> out);

private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Index sampling proportional to nonnegative weights via their running sums:
/// draws u in [0, total) and returns the first index whose cumulative sum
/// exceeds u. `cumulative` must be nondecreasing with a positive final entry.
std::size_t sample_cumulative(std::span<const double> cumulative, RandomStream& rng);

}  // namespace bregman

#endif
