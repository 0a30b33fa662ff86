#include "nptl/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace nptl {

double Rng::normal() {
  // Polar method; the second variate of each pair is discarded to keep the
  // stream state a pure function of the call sequence.
  for (;;) {
    const double u = 2.0 * uniform() - 1.0;
    const double v = 2.0 * uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

double Rng::gamma_at_least_one(double shape) {
  // Marsaglia & Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) {
      return d * v;
    }
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) {
    throw std::invalid_argument("Rng::gamma: shape must be positive");
  }
  if (shape >= 1.0) {
    return gamma_at_least_one(shape);
  }
  return std::exp(log_gamma(shape));
}

double Rng::log_gamma(double shape) {
  if (!(shape > 0.0)) {
    throw std::invalid_argument("Rng::log_gamma: shape must be positive");
  }
  if (shape >= 1.0) {
    return std::log(gamma_at_least_one(shape));
  }
  // log(Ga(a+1) * U^(1/a)) = log Ga(a+1) + log(U)/a. The second term is a
  // large negative number for tiny shapes, which is exactly why this is kept
  // in log space.
  return std::log(gamma_at_least_one(shape + 1.0)) + std::log(uniform()) / shape;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x51f15ee1ULL));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  // FNV-1a over the tag, then mixed with the master seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : tag) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master) ^ h);
}

}  // namespace nptl
