#include "nptl/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nptl {

void DirichletSpec::validate() const {
  if (n < 1) throw std::invalid_argument("DirichletSpec: n must be >= 1");
  if (L < 1 || L > n) throw std::invalid_argument("DirichletSpec: need 1 <= L <= n");
  if (!(alpha >= 0.0)) throw std::invalid_argument("DirichletSpec: alpha must be >= 0");
}

void BlockMapping::validate() const {
  if (block_count < 1) throw std::invalid_argument("BlockMapping: empty");
  if (train_assign.size() != pseudo_assign.size()) {
    throw std::invalid_argument("BlockMapping: assignment lengths differ");
  }
  const int n_pts = n();
  std::vector<int> c1(block_count, 0), c2(block_count, 0);
  for (int i = 0; i < n_pts; ++i) {
    const int a = train_assign[i], b = pseudo_assign[i];
    if (a < 0 || a >= block_count || b < 0 || b >= block_count) {
      throw std::invalid_argument("BlockMapping: block index out of range");
    }
    ++c1[a];
    ++c2[b];
  }
  for (const auto& counts : {c1, c2}) {
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    if (*lo == 0) throw std::invalid_argument("BlockMapping: empty block");
    if (*hi - *lo > 1) throw std::invalid_argument("BlockMapping: block sizes differ by more than 1");
  }
}

double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw std::invalid_argument("sample_gamma: shape must be positive");
  return rng.gamma(shape);
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& concentration, Rng& rng) {
  const auto k = concentration.size();
  if (k < 1) throw std::invalid_argument("sample_dirichlet: empty concentration");
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(concentration[i] > 0.0)) {
      throw std::invalid_argument("sample_dirichlet: concentrations must be positive");
    }
  }
  Eigen::VectorXd logs(k);
  for (Eigen::Index i = 0; i < k; ++i) logs[i] = rng.log_gamma(concentration[i]);
  const double shift = logs.maxCoeff();
  Eigen::VectorXd out = (logs.array() - shift).exp();
  out /= out.sum();
  return out;
}

BlockMapping make_block_mapping(int n, int L, Rng& rng) {
  if (n < 1 || L < 1 || L > n) {
    throw std::invalid_argument("make_block_mapping: need 1 <= L <= n");
  }
  const auto fill = [&](std::vector<int>& assign) {
    assign.resize(static_cast<std::size_t>(n));
    // Label vector with ceil-sized blocks first, then a Fisher-Yates shuffle:
    // a uniformly random partition with the prescribed sizes.
    int pos = 0;
    const int base = n / L, extra = n % L;
    for (int l = 0; l < L; ++l) {
      const int size = base + (l < extra ? 1 : 0);
      for (int j = 0; j < size; ++j) assign[static_cast<std::size_t>(pos++)] = l;
    }
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(assign[static_cast<std::size_t>(i)], assign[static_cast<std::size_t>(j)]);
    }
  };
  BlockMapping mapping;
  mapping.block_count = L;
  fill(mapping.train_assign);
  fill(mapping.pseudo_assign);
  return mapping;
}

namespace {

// Linear-space block weights from log draws; the common shift cancels in the
// later normalization.
Eigen::VectorXd gamma_block_values(int count, double shape, Rng& rng) {
  Eigen::VectorXd logs(count);
  for (int i = 0; i < count; ++i) logs[i] = rng.log_gamma(shape);
  const double shift = logs.maxCoeff();
  return (logs.array() - shift).exp();
}

}  // namespace

WeightDraw draw_weights_blocked(const DirichletSpec& spec, const BlockMapping& mapping, Rng& rng) {
  spec.validate();
  mapping.validate();
  if (mapping.n() != spec.n || mapping.block_count != spec.L) {
    throw std::invalid_argument("draw_weights_blocked: mapping inconsistent with spec");
  }
  const int n = spec.n, L = spec.L;

  // (v, v_tilde) ~ Dir(1 x L, (alpha/n) x L) up to a common factor; the
  // shared max-shift keeps the two sides on the same scale. alpha = 0 puts
  // the whole pseudo side at exactly zero.
  Eigen::VectorXd logs(2 * L);
  for (int l = 0; l < L; ++l) logs[l] = rng.log_gamma(1.0);
  if (spec.alpha > 0.0) {
    const double shape = spec.alpha / n;
    for (int l = 0; l < L; ++l) logs[L + l] = rng.log_gamma(shape);
  }
  const double shift = logs.head(L).maxCoeff();
  Eigen::VectorXd v = (logs.head(L).array() - shift).exp();
  Eigen::VectorXd vt = spec.alpha > 0.0
                           ? Eigen::VectorXd((logs.tail(L).array() - shift).exp())
                           : Eigen::VectorXd(Eigen::VectorXd::Zero(L));

  WeightDraw draw;
  draw.w.resize(n);
  draw.w_tilde.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    draw.w[i] = v[mapping.train_assign[static_cast<std::size_t>(i)]];
    draw.w_tilde[i] = vt[mapping.pseudo_assign[static_cast<std::size_t>(i)]];
    total += draw.w[i] + draw.w_tilde[i];
  }
  const double scale = 2.0 * n / total;  // equals 2L exactly when L | n
  draw.w *= scale;
  draw.w_tilde *= scale;
  if (spec.alpha > 0.0) {
    // Zero or subnormal: the gamma variate fell out of the normalized range.
    draw.pseudo_underflow_count =
        (vt.array() < std::numeric_limits<double>::min()).count();
  }
  draw.mapping = mapping;
  return draw;
}

WeightDraw draw_weights_nonblocked(int n, double alpha, Rng& rng) {
  DirichletSpec{n, 1, alpha}.validate();

  Eigen::VectorXd logs(2 * n);
  for (int i = 0; i < n; ++i) logs[i] = rng.log_gamma(1.0);
  if (alpha > 0.0) {
    const double shape = alpha / n;
    for (int i = 0; i < n; ++i) logs[n + i] = rng.log_gamma(shape);
  }
  const double shift = logs.head(n).maxCoeff();
  Eigen::VectorXd g = (logs.head(n).array() - shift).exp();
  Eigen::VectorXd gt = alpha > 0.0 ? Eigen::VectorXd((logs.tail(n).array() - shift).exp())
                                   : Eigen::VectorXd(Eigen::VectorXd::Zero(n));

  WeightDraw draw;
  const double scale = 2.0 * n / (g.sum() + gt.sum());
  draw.w = g * scale;
  draw.w_tilde = gt * scale;
  if (alpha > 0.0) {
    draw.pseudo_underflow_count =
        (gt.array() < std::numeric_limits<double>::min()).count();
  }
  return draw;
}

Eigen::VectorXd DecomposedDraw::composed() const {
  Eigen::VectorXd out(b_weights.size() + q_weights.size());
  out.head(b_weights.size()) = (1.0 - v_n) * b_weights;
  out.tail(q_weights.size()) = v_n * q_weights;
  return out;
}

DecomposedDraw draw_weights_decomposed(int n, int T, double alpha, int L, Rng& rng) {
  if (n < 1 || T < 1) throw std::invalid_argument("draw_weights_decomposed: need n, T >= 1");
  if (L < 1 || L > n) throw std::invalid_argument("draw_weights_decomposed: need 1 <= L <= n");
  if (!(alpha > 0.0)) throw std::invalid_argument("draw_weights_decomposed: alpha must be positive");

  DecomposedDraw draw;

  // V_n = G / (G + H_n), G ~ Ga(alpha, 1), H_n ~ Ga(L, rate L/n); the three
  // components are sampled independently.
  const double g = rng.gamma(alpha);
  const double h = rng.gamma(static_cast<double>(L)) * (static_cast<double>(n) / L);
  draw.v_n = g / (g + h);

  Eigen::VectorXd conc_q = Eigen::VectorXd::Constant(T, alpha / T);
  draw.q_weights = sample_dirichlet(conc_q, rng);

  // Block weights broadcast over the n observed atoms, normalized exactly.
  BlockMapping mapping = make_block_mapping(n, L, rng);
  Eigen::VectorXd block = gamma_block_values(L, 1.0, rng);
  draw.b_weights.resize(n);
  for (int i = 0; i < n; ++i) {
    draw.b_weights[i] = block[mapping.train_assign[static_cast<std::size_t>(i)]];
  }
  draw.b_weights /= draw.b_weights.sum();
  return draw;
}

}  // namespace nptl
