#include "nptl/diagnostics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nptl/dirichlet.hpp"
#include "nptl/rng.hpp"

namespace nptl {

WeightedMeanMoments weighted_mean_moments(const Eigen::VectorXd& data_values,
                                          const Eigen::VectorXd& pseudo_values, double alpha,
                                          bool blocked, int L) {
  const auto n = data_values.size();
  if (n == 0) throw std::invalid_argument("weighted_mean_moments: empty data");
  if (pseudo_values.size() != n) {
    throw std::invalid_argument("weighted_mean_moments: pseudo values must match data length");
  }
  if (!(alpha >= 0.0)) throw std::invalid_argument("weighted_mean_moments: alpha must be >= 0");

  const double nd = static_cast<double>(n);
  const double x_mean = data_values.mean();
  const double y_mean = pseudo_values.mean();
  const double x_sq = data_values.squaredNorm() / nd;   // population second moments
  const double y_sq = pseudo_values.squaredNorm() / nd;
  const double x_var = x_sq - x_mean * x_mean;
  const double y_var = y_sq - y_mean * y_mean;

  WeightedMeanMoments m;
  m.mean = (nd * x_mean + alpha * y_mean) / (nd + alpha);

  if (!blocked) {
    // Dirichlet over 2n coordinates, concentrations (1 x n, (alpha/n) x n).
    const double total_conc = nd + alpha;
    const double second = (nd * x_sq + alpha * y_sq) / total_conc;
    m.variance = (second - m.mean * m.mean) / (total_conc + 1.0);
    return m;
  }

  if (L < 1 || L > n) throw std::invalid_argument("weighted_mean_moments: need 1 <= L <= n");
  if (n % L != 0) {
    throw std::invalid_argument("weighted_mean_moments: blocked moments need L to divide n");
  }
  // Dirichlet over 2L block coordinates. Conditional on a partition the draw
  // is a Dirichlet-weighted mean of block means; averaging the conditional
  // variance over the uniformly random partition brings in the without-
  // replacement variance of a block mean, (pop var / B) * (n - B) / (n - 1).
  const double Ld = static_cast<double>(L);
  const double B = nd / Ld;
  const double fpc = (n == 1) ? 0.0 : (nd - B) / (nd - 1.0);
  const double total_conc = Ld * (nd + alpha) / nd;
  const double e_sum_m2 = Ld * (x_mean * x_mean + x_var / B * fpc);
  const double e_sum_mt2 = Ld * (y_mean * y_mean + y_var / B * fpc);
  const double second = (e_sum_m2 + (alpha / nd) * e_sum_mt2) / total_conc;
  m.variance = (second - m.mean * m.mean) / (total_conc + 1.0);
  return m;
}

std::vector<TwoSampleReport> blocked_vs_nonblocked_test(
    const Eigen::VectorXd& data_values, const Eigen::VectorXd& pseudo_values, int L, double alpha,
    int draws, const std::vector<NamedFunctional>& functionals, std::uint64_t seed,
    int permutations) {
  const int n = static_cast<int>(data_values.size());
  if (n == 0) throw std::invalid_argument("blocked_vs_nonblocked_test: empty data");
  if (pseudo_values.size() != n) {
    throw std::invalid_argument("blocked_vs_nonblocked_test: pseudo values must match data length");
  }
  if (draws < 1) throw std::invalid_argument("blocked_vs_nonblocked_test: draws must be >= 1");
  if (functionals.empty()) {
    throw std::invalid_argument("blocked_vs_nonblocked_test: no functionals given");
  }

  const DirichletSpec spec{n, L, alpha};
  spec.validate();

  // Transformed values per functional, computed once.
  std::vector<Eigen::VectorXd> hx, hy;
  for (const auto& f : functionals) {
    hx.push_back(data_values.unaryExpr(f.fn));
    hy.push_back(pseudo_values.unaryExpr(f.fn));
  }

  const std::size_t nf = functionals.size();
  std::vector<std::vector<double>> blocked_draws(nf), nonblocked_draws(nf);
  Rng rng(derive_seed(seed, "blocked-vs-nonblocked"));
  // Normalizing by the dot-product total (same accumulation path as the
  // numerator) makes a constant functional exactly degenerate.
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(n);
  const auto functional_value = [&](const WeightDraw& draw, const Eigen::VectorXd& fx,
                                    const Eigen::VectorXd& fy) {
    const double total = draw.w.dot(unit) + draw.w_tilde.dot(unit);
    return (draw.w.dot(fx) + draw.w_tilde.dot(fy)) / total;
  };
  for (int d = 0; d < draws; ++d) {
    const BlockMapping mapping = make_block_mapping(n, L, rng);
    const WeightDraw blocked = draw_weights_blocked(spec, mapping, rng);
    const WeightDraw direct = draw_weights_nonblocked(n, alpha, rng);
    for (std::size_t f = 0; f < nf; ++f) {
      blocked_draws[f].push_back(functional_value(blocked, hx[f], hy[f]));
      nonblocked_draws[f].push_back(functional_value(direct, hx[f], hy[f]));
    }
  }

  std::vector<TwoSampleReport> reports;
  for (std::size_t f = 0; f < nf; ++f) {
    TwoSampleReport report;
    report.statistic_name = "ks";
    report.functional_name = functionals[f].name;
    Rng perm_rng(derive_seed(seed, "ks-permutation"));
    const TestResult result =
        ks_test_permutation(blocked_draws[f], nonblocked_draws[f], permutations, perm_rng);
    report.statistic = result.statistic;
    report.p_value = result.p_value;
    report.size_a = report.size_b = draws;
    report.n = n;
    report.L = L;
    report.alpha = alpha;
    report.T = n;
    report.seed = seed;
    reports.push_back(std::move(report));
  }
  return reports;
}

VnBoundReport vn_bound_check(int n, int L, int T, double alpha, long draws, std::uint64_t seed) {
  if (n < 1 || L < 1 || L > n || T < 1) {
    throw std::invalid_argument("vn_bound_check: need n >= 1, 1 <= L <= n, T >= 1");
  }
  if (!(alpha >= 0.0)) throw std::invalid_argument("vn_bound_check: alpha must be >= 0");
  if (draws < 1) throw std::invalid_argument("vn_bound_check: draws must be >= 1");

  VnBoundReport report;
  report.n = n;
  report.L = L;
  report.T = T;
  report.alpha = alpha;
  report.draws = draws;
  report.seed = seed;
  report.bound = alpha / n;
  report.sharp_bound = L > 1 ? alpha * L / ((L - 1.0) * n)
                             : std::numeric_limits<double>::infinity();

  if (alpha == 0.0) {
    // Gamma(0) carries all mass at zero, so V_n is identically zero.
    report.within_bound = true;
    return report;
  }

  Rng rng(seed);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(draws));
  const double h_scale = static_cast<double>(n) / L;
  for (long d = 0; d < draws; ++d) {
    const double g = rng.gamma(alpha);
    const double h = rng.gamma(static_cast<double>(L)) * h_scale;
    values.push_back(g / (g + h));
  }
  const SampleMoments moments = sample_moments(values);
  report.empirical_mean = moments.mean;
  report.std_error = moments.std_error;
  report.within_bound = moments.mean <= report.bound + 3.0 * moments.std_error;
  return report;
}

CovarianceReport sandwich_check(int n, int num_solves, std::uint64_t seed, bool heteroscedastic) {
  if (n < 4) throw std::invalid_argument("sandwich_check: need n >= 4");
  if (num_solves < 2) throw std::invalid_argument("sandwich_check: need num_solves >= 2");

  Rng rng(seed);
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd response(n);
  const double intercept = 0.3, slope = 1.2;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double noise_scale = heteroscedastic ? 0.5 + std::abs(x) : 1.0;
    design(i, 0) = 1.0;
    design(i, 1) = x;
    response[i] = intercept + slope * x + noise_scale * rng.normal();
  }

  const Eigen::Matrix2d gram = design.transpose() * design;
  if (gram.determinant() <= 1e-10 * gram.trace() * gram.trace()) {
    throw std::invalid_argument("sandwich_check: singular design");
  }

  // Posterior bootstrap at alpha = 0: exact weighted least-squares solves.
  Eigen::MatrixXd solutions(num_solves, 2);
  for (int m = 0; m < num_solves; ++m) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = rng.gamma(1.0);
    const Eigen::MatrixXd wx = design.array().colwise() * w.array();
    const Eigen::Matrix2d a = wx.transpose() * design;
    const Eigen::Vector2d b = wx.transpose() * response;
    solutions.row(m) = a.ldlt().solve(b).transpose();
  }
  const Eigen::RowVector2d mean = solutions.colwise().mean();
  const Eigen::MatrixXd centered = solutions.rowwise() - mean;
  const Eigen::Matrix2d npl = centered.transpose() * centered / (num_solves - 1.0);

  // Sandwich J^-1 K J^-1 / n from the empirical score moments at the fit.
  const Eigen::Vector2d fit = gram.ldlt().solve(design.transpose() * response);
  const Eigen::VectorXd residuals = response - design * fit;
  const Eigen::Matrix2d j = gram / static_cast<double>(n);
  Eigen::Matrix2d k = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d xi = design.row(i).transpose();
    k += residuals[i] * residuals[i] * xi * xi.transpose();
  }
  k /= static_cast<double>(n);
  const Eigen::Matrix2d j_inv = j.inverse();
  const Eigen::Matrix2d sandwich = j_inv * k * j_inv / static_cast<double>(n);

  // Conjugate homoscedastic posterior: sigma^2 (X'X)^-1 with the usual
  // residual variance estimate.
  const double sigma_sq = residuals.squaredNorm() / static_cast<double>(n - 2);
  const Eigen::Matrix2d parametric = sigma_sq * gram.inverse();

  CovarianceReport report;
  report.npl = npl;
  report.sandwich = sandwich;
  report.parametric = parametric;
  report.npl_vs_sandwich = std::abs(npl(1, 1) - sandwich(1, 1)) / sandwich(1, 1);
  report.npl_vs_parametric = std::abs(npl(1, 1) - parametric(1, 1)) / parametric(1, 1);
  report.n = n;
  report.num_solves = num_solves;
  report.seed = seed;
  report.heteroscedastic = heteroscedastic;
  return report;
}

}  // namespace nptl
