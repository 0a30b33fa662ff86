#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "nptl/rng.hpp"

namespace nptl {

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // sample variance, n-1 denominator
  double std_error = 0.0; // of the mean
  std::size_t count = 0;
};

SampleMoments sample_moments(const std::vector<double>& values);

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

/// Two-sample KS statistic, sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS against a known CDF, with the asymptotic p-value
/// (Stephens' finite-sample correction of the Kolmogorov tail).
TestResult ks_test_one_sample(std::vector<double> values,
                              const std::function<double(double)>& cdf);

/// Two-sample KS with a permutation p-value. The pooled sample is sorted
/// once; each permutation only relabels it, so the per-permutation cost is
/// linear. p = (1 + #{perm >= observed}) / (permutations + 1).
TestResult ks_test_permutation(const std::vector<double>& a, const std::vector<double>& b,
                               int permutations, Rng& rng);

/// Two-sample energy-distance test with a permutation p-value, for
/// multivariate samples (rows = draws). Pair distances are computed once for
/// a random subset of pooled index pairs (all pairs when that is affordable)
/// and every permutation reaggregates the cached distances by label, so the
/// statistic is an incomplete V-statistic estimate of
///   2 E|X - Y| - E|X - X'| - E|Y - Y'|.
TestResult energy_test_permutation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   int permutations, Rng& rng,
                                   std::size_t max_pairs = 2'000'000);

}  // namespace nptl
