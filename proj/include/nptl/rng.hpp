#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nptl {

/// Deterministic random stream. Every distribution is implemented explicitly
/// on top of mt19937_64 so that draws are bit-reproducible across standard
/// libraries and platforms; <random> distribution objects are deliberately
/// not used because their algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform draw on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via the Marsaglia polar method.
  double normal();

  /// One draw from Gamma(shape, 1), shape > 0.
  ///
  /// Uses Marsaglia-Tsang rejection for shape >= 1. For shape < 1 the boost
  /// Ga(a,1) = Ga(a+1,1) * U^(1/a) is applied; the multiplication happens in
  /// log space so the draw never becomes NaN even when the linear value
  /// underflows to zero.
  double gamma(double shape);

  /// log of a Gamma(shape, 1) draw; stays finite for arbitrarily small shape.
  double log_gamma(double shape);

 private:
  double gamma_at_least_one(double shape);

  std::mt19937_64 engine_;
};

/// Splittable seed derivation (SplitMix64 over the pair). Used everywhere a
/// worker, sample index, or pipeline stage needs its own independent stream,
/// so results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Tagged variant for naming pipeline stages ("probe", "alpha-sweep", ...).
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

}  // namespace nptl
