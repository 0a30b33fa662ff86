#include "nptl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nptl {

SampleMoments sample_moments(const std::vector<double>& values) {
  SampleMoments m;
  m.count = values.size();
  if (m.count == 0) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(m.count);
  if (m.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.variance = ss / static_cast<double>(m.count - 1);
    m.std_error = std::sqrt(m.variance / static_cast<double>(m.count));
  }
  return m;
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

// sup |F_a - F_b| over the pooled sorted order; `is_a` labels the pooled
// sorted values. Ties are handled by evaluating the gap only after a run of
// equal values has been fully consumed.
double ks_from_labels(const std::vector<double>& pooled_sorted, const std::vector<char>& is_a,
                      std::size_t na, std::size_t nb) {
  double best = 0.0;
  double fa = 0.0, fb = 0.0;
  const double ia = 1.0 / static_cast<double>(na), ib = 1.0 / static_cast<double>(nb);
  std::size_t i = 0;
  const std::size_t total = pooled_sorted.size();
  while (i < total) {
    const double value = pooled_sorted[i];
    while (i < total && pooled_sorted[i] == value) {
      if (is_a[i]) fa += ia; else fb += ib;
      ++i;
    }
    best = std::max(best, std::abs(fa - fb));
  }
  return best;
}

}  // namespace

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  const std::size_t na = a.size(), nb = b.size();
  std::vector<std::pair<double, char>> pooled;
  pooled.reserve(na + nb);
  for (double v : a) pooled.emplace_back(v, 1);
  for (double v : b) pooled.emplace_back(v, 0);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<double> values(na + nb);
  std::vector<char> labels(na + nb);
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    values[i] = pooled[i].first;
    labels[i] = pooled[i].second;
  }
  return ks_from_labels(values, labels, na, nb);
}

TestResult ks_test_one_sample(std::vector<double> values,
                              const std::function<double(double)>& cdf) {
  if (values.empty()) throw std::invalid_argument("ks_test_one_sample: empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = cdf(values[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, std::abs(hi - f), std::abs(f - lo)});
  }
  const double sqrt_n = std::sqrt(n);
  TestResult r;
  r.statistic = d;
  r.p_value = kolmogorov_q(d * (sqrt_n + 0.12 + 0.11 / sqrt_n));
  return r;
}

TestResult ks_test_permutation(const std::vector<double>& a, const std::vector<double>& b,
                               int permutations, Rng& rng) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_test_permutation: empty sample");
  if (permutations < 1) throw std::invalid_argument("ks_test_permutation: need permutations >= 1");
  const std::size_t na = a.size(), nb = b.size();

  std::vector<std::pair<double, char>> pooled;
  pooled.reserve(na + nb);
  for (double v : a) pooled.emplace_back(v, 1);
  for (double v : b) pooled.emplace_back(v, 0);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<double> values(na + nb);
  std::vector<char> labels(na + nb);
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    values[i] = pooled[i].first;
    labels[i] = pooled[i].second;
  }

  const double observed = ks_from_labels(values, labels, na, nb);

  int at_least = 0;
  std::vector<char> perm = labels;
  for (int p = 0; p < permutations; ++p) {
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
      const std::size_t j = rng.next_u64() % (i + 1);
      std::swap(perm[i], perm[j]);
    }
    if (ks_from_labels(values, perm, na, nb) >= observed) ++at_least;
  }
  TestResult r;
  r.statistic = observed;
  r.p_value = static_cast<double>(1 + at_least) / static_cast<double>(permutations + 1);
  return r;
}

namespace {

struct PairEntry {
  std::uint32_t i;
  std::uint32_t j;
  double distance;
};

double energy_from_labels(const std::vector<PairEntry>& pairs, const std::vector<char>& is_a) {
  double s_xy = 0.0, s_xx = 0.0, s_yy = 0.0;
  long c_xy = 0, c_xx = 0, c_yy = 0;
  for (const auto& p : pairs) {
    const bool ai = is_a[p.i], aj = is_a[p.j];
    if (ai != aj) {
      s_xy += p.distance;
      ++c_xy;
    } else if (ai) {
      s_xx += p.distance;
      ++c_xx;
    } else {
      s_yy += p.distance;
      ++c_yy;
    }
  }
  if (c_xy == 0 || c_xx == 0 || c_yy == 0) return 0.0;
  return 2.0 * s_xy / c_xy - s_xx / c_xx - s_yy / c_yy;
}

}  // namespace

TestResult energy_test_permutation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   int permutations, Rng& rng, std::size_t max_pairs) {
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("energy_test_permutation: empty sample");
  if (a.cols() != b.cols()) throw std::invalid_argument("energy_test_permutation: dimension mismatch");
  if (permutations < 1) throw std::invalid_argument("energy_test_permutation: need permutations >= 1");

  const std::size_t na = static_cast<std::size_t>(a.rows());
  const std::size_t total = na + static_cast<std::size_t>(b.rows());
  const auto row = [&](std::size_t idx) {
    return idx < na ? a.row(static_cast<Eigen::Index>(idx))
                    : b.row(static_cast<Eigen::Index>(idx - na));
  };

  const std::size_t all_pairs = total * (total - 1) / 2;
  std::vector<PairEntry> pairs;
  if (all_pairs <= max_pairs) {
    pairs.reserve(all_pairs);
    for (std::size_t i = 0; i + 1 < total; ++i) {
      for (std::size_t j = i + 1; j < total; ++j) {
        pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0.0});
      }
    }
  } else {
    pairs.reserve(max_pairs);
    for (std::size_t k = 0; k < max_pairs; ++k) {
      std::size_t i = rng.next_u64() % total;
      std::size_t j = rng.next_u64() % (total - 1);
      if (j >= i) ++j;
      pairs.push_back({static_cast<std::uint32_t>(std::min(i, j)),
                       static_cast<std::uint32_t>(std::max(i, j)), 0.0});
    }
  }
  for (auto& p : pairs) {
    p.distance = (row(p.i) - row(p.j)).norm();
  }

  std::vector<char> labels(total, 0);
  for (std::size_t i = 0; i < na; ++i) labels[i] = 1;
  const double observed = energy_from_labels(pairs, labels);

  int at_least = 0;
  std::vector<char> perm = labels;
  for (int p = 0; p < permutations; ++p) {
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
      const std::size_t j = rng.next_u64() % (i + 1);
      std::swap(perm[i], perm[j]);
    }
    if (energy_from_labels(pairs, perm) >= observed) ++at_least;
  }
  TestResult r;
  r.statistic = observed;
  r.p_value = static_cast<double>(1 + at_least) / static_cast<double>(permutations + 1);
  return r;
}

}  // namespace nptl
