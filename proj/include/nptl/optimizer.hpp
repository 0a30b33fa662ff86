#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nptl/models.hpp"

namespace nptl {

enum class Schedule { Constant, Cosine };

struct OptimizerConfig {
  double base_lr = 0.05;
  Schedule schedule = Schedule::Cosine;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(base_lr > 0.0)) throw std::invalid_argument("OptimizerConfig: base_lr must be positive");
    if (batch_size < 1) throw std::invalid_argument("OptimizerConfig: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("OptimizerConfig: epochs must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("OptimizerConfig: momentum in [0,1)");
  }
};

struct TrainingDivergedError : std::runtime_error {
  explicit TrainingDivergedError(long step)
      : std::runtime_error("training diverged (non-finite loss) at step " + std::to_string(step)),
        step(step) {}
  long step;
};

struct L2spTerm {
  const ParamVector* anchor = nullptr;
  double beta = 0.0;
};

struct TrainOptions {
  /// Restrict updates to the head span (linear probing).
  bool head_only = false;
  std::optional<L2spTerm> l2sp;
};

struct TrainStats {
  /// Tracked objective sum_i w_i loss_i (+ n * penalty when present),
  /// evaluated on the full dataset at init and after every epoch.
  std::vector<double> objective_per_epoch;  // [0] = at init
  std::vector<double> penalty_per_epoch;    // same indexing, 0 when no penalty
  double best_objective = 0.0;
  long steps = 0;
};

/// Minibatch SGD with momentum on f(theta) = mean_i w_i loss_i + penalty.
/// Batch gradients average the weighted per-example terms, so the learning
/// rate keeps its usual scale regardless of n. Returns the best full-
/// objective iterate observed (never worse than the initialization).
/// Non-finite losses or parameters raise TrainingDivergedError.
ParamVector sgd_minimize(const ModelSpec& spec, const ParamVector& init,
                         const Eigen::MatrixXd& inputs, const Targets& targets,
                         const Eigen::VectorXd& weights, const OptimizerConfig& opt,
                         const TrainOptions& options = {}, TrainStats* stats = nullptr);

}  // namespace nptl
