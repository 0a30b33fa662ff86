#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "nptl/stats.hpp"

namespace nptl {

/// Closed-form first and second moments of the weighted mean
///   theta = (sum_i w_i x_i + sum_i wt_i y_i) / 2n
/// under the scaled Dirichlet weight law (blocked over L equal-sized blocks
/// with a fresh uniformly random partition per draw, or non-blocked).
struct WeightedMeanMoments {
  double mean = 0.0;
  double variance = 0.0;
};

WeightedMeanMoments weighted_mean_moments(const Eigen::VectorXd& data_values,
                                          const Eigen::VectorXd& pseudo_values, double alpha,
                                          bool blocked, int L);

struct NamedFunctional {
  std::string name;
  std::function<double(double)> fn;
};

struct TwoSampleReport {
  std::string statistic_name;
  std::string functional_name;
  double statistic = 0.0;
  double p_value = 1.0;
  int size_a = 0;
  int size_b = 0;
  int n = 0;
  int L = 0;
  double alpha = 0.0;
  int T = 0;
  std::uint64_t seed = 0;
};

/// Draws the weighted-mean functional sum_i w_i h(x_i) + sum_i wt_i h(y_i),
/// normalized by 2n, under the blocked and the non-blocked law on a fixed
/// dataset, and reports the KS statistic with a permutation p-value per
/// functional.
std::vector<TwoSampleReport> blocked_vs_nonblocked_test(
    const Eigen::VectorXd& data_values, const Eigen::VectorXd& pseudo_values, int L, double alpha,
    int draws, const std::vector<NamedFunctional>& functionals, std::uint64_t seed,
    int permutations = 1000);

struct VnBoundReport {
  double empirical_mean = 0.0;
  double std_error = 0.0;
  double bound = 0.0;        // alpha / n
  double sharp_bound = 0.0;  // alpha L / ((L-1) n); infinite at L = 1
  bool within_bound = false; // empirical_mean <= bound + 3 SE
  int n = 0, L = 0, T = 0;
  double alpha = 0.0;
  long draws = 0;
  std::uint64_t seed = 0;
};

/// Samples V_n = G / (G + H_n) and reports its empirical mean against
/// alpha / n. alpha = 0 degenerates to V_n identically zero.
VnBoundReport vn_bound_check(int n, int L, int T, double alpha, long draws, std::uint64_t seed);

struct CovarianceReport {
  Eigen::Matrix2d npl;         // posterior bootstrap covariance of (intercept, slope)
  Eigen::Matrix2d sandwich;    // J^-1 K J^-1 / n at the fitted parameters
  Eigen::Matrix2d parametric;  // conjugate homoscedastic posterior covariance
  double npl_vs_sandwich = 0.0;    // |npl - sandwich| / sandwich, slope variance
  double npl_vs_parametric = 0.0;  // |npl - parametric| / parametric, slope variance
  int n = 0;
  int num_solves = 0;
  std::uint64_t seed = 0;
  bool heteroscedastic = false;
};

/// Misspecified-regression robustness check: a linear-Gaussian model fit to
/// data whose noise scale grows with |x| (or is constant, for the
/// well-specified control). The posterior bootstrap covariance of the fit is
/// estimated from exact weighted least-squares solves at alpha = 0 and
/// compared against the sandwich and the parametric posterior covariance.
CovarianceReport sandwich_check(int n, int num_solves, std::uint64_t seed, bool heteroscedastic);

}  // namespace nptl
