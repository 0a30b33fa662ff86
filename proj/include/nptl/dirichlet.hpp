#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "nptl/rng.hpp"

namespace nptl {

/// Parameters of one posterior weight draw: n observed points, L blocks,
/// prior strength alpha. alpha = 0 is admitted as the plain Bayesian
/// bootstrap limit (the pseudo side carries zero weight).
struct DirichletSpec {
  int n = 0;
  int L = 1;
  double alpha = 0.0;

  void validate() const;
};

/// Random partition of {0..n-1} into L blocks, independently for the
/// observed points and the pseudo points. Block sizes are floor(n/L) or
/// ceil(n/L), so they differ by at most one.
struct BlockMapping {
  std::vector<int> train_assign;   // index -> block in [0, L)
  std::vector<int> pseudo_assign;  // index -> block in [0, L)
  int block_count = 0;

  int n() const { return static_cast<int>(train_assign.size()); }
  void validate() const;
};

/// Scaled per-datum weights (w, w_tilde) with sum(w) + sum(w_tilde) = 2n.
/// Blocked draws carry the mapping that produced them; indices sharing a
/// block share the identical weight value bit-for-bit.
struct WeightDraw {
  Eigen::VectorXd w;
  Eigen::VectorXd w_tilde;
  std::optional<BlockMapping> mapping;

  /// Pseudo-side gamma variates whose linear value collapsed to exactly zero
  /// even though alpha > 0. Nonzero counts signal the underflow regime that
  /// blocking is meant to avoid; surfaced as warnings by the sampler.
  long pseudo_underflow_count = 0;
};

/// The V_n / Q / B_n decomposition of one blocked draw, used as an
/// independent construction of the same weight law for diagnostics.
/// composed()(i) equals (1 - v_n) * b_weights for the n observed atoms
/// followed by v_n * q_weights for the T pseudo atoms, and sums to one.
struct DecomposedDraw {
  double v_n = 0.0;
  Eigen::VectorXd q_weights;  // simplex over T pseudo atoms
  Eigen::VectorXd b_weights;  // simplex over n observed atoms

  Eigen::VectorXd composed() const;
};

/// One draw from Gamma(shape, 1). shape <= 0 is an error.
double sample_gamma(double shape, Rng& rng);

/// Normalized independent Gamma draws; the normalization is carried out in
/// log space so arbitrarily small concentrations cannot produce 0/0.
Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& concentration, Rng& rng);

BlockMapping make_block_mapping(int n, int L, Rng& rng);

/// Blocked weight draw: (v, v_tilde) over 2L blocks with concentrations
/// (1,...,1, alpha/n,...,alpha/n), broadcast through the mapping and scaled
/// so the total weight is exactly 2n. When L divides n the scale factor is
/// identically 2L; with unequal block sizes the total is normalized to 2n
/// directly, which keeps the sum contract intact.
WeightDraw draw_weights_blocked(const DirichletSpec& spec, const BlockMapping& mapping, Rng& rng);

/// Non-blocked draw over 2n coordinates with concentrations
/// (1,...,1, alpha/n,...,alpha/n), scaled by 2n to share the blocked sum
/// convention.
WeightDraw draw_weights_nonblocked(int n, double alpha, Rng& rng);

/// Draws V_n = G / (G + H_n) with independent G ~ Gamma(alpha, 1) and
/// H_n ~ Gamma(L, rate L/n), Q as T normalized Gamma(alpha/T) variates and
/// B as L normalized Gamma(1) block weights broadcast over n points.
/// With L = n (singleton blocks) the composed vector has exactly the law of
/// a direct Dirichlet(1 x n, (alpha/T) x T) draw.
DecomposedDraw draw_weights_decomposed(int n, int T, double alpha, int L, Rng& rng);

}  // namespace nptl
