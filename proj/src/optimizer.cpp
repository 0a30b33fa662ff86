#include "nptl/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nptl/rng.hpp"

namespace nptl {

namespace {

double full_objective(const ModelSpec& spec, const ParamVector& params,
                      const Eigen::MatrixXd& inputs, const Targets& targets,
                      const Eigen::VectorXd& weights, const TrainOptions& options,
                      double* penalty_out) {
  double objective = inputs.rows() > 0 ? weighted_loss(spec, params, inputs, targets, weights) : 0.0;
  double penalty = 0.0;
  if (options.l2sp) {
    penalty = l2sp_penalty(params, *options.l2sp->anchor, options.l2sp->beta).value;
    objective += static_cast<double>(std::max<Eigen::Index>(inputs.rows(), 1)) * penalty;
  }
  if (penalty_out) *penalty_out = penalty;
  return objective;
}

}  // namespace

ParamVector sgd_minimize(const ModelSpec& spec, const ParamVector& init,
                         const Eigen::MatrixXd& inputs, const Targets& targets,
                         const Eigen::VectorXd& weights, const OptimizerConfig& opt,
                         const TrainOptions& options, TrainStats* stats) {
  opt.validate();
  spec.validate();
  if (init.size() != spec.param_count()) {
    throw std::invalid_argument("sgd_minimize: init length does not match spec");
  }
  if (inputs.rows() != targets.count() || inputs.rows() != weights.size()) {
    throw std::invalid_argument("sgd_minimize: inputs, targets, weights must have equal length");
  }
  if (options.l2sp && !(options.l2sp->beta > 0.0)) {
    throw std::invalid_argument("sgd_minimize: l2sp beta must be positive");
  }

  TrainStats local;
  TrainStats& st = stats ? *stats : local;
  st = TrainStats{};

  ParamVector params = init;
  ParamVector best = init;
  double penalty = 0.0;
  double best_objective = full_objective(spec, params, inputs, targets, weights, options, &penalty);
  st.objective_per_epoch.push_back(best_objective);
  st.penalty_per_epoch.push_back(penalty);

  const Eigen::Index n = inputs.rows();
  if (opt.epochs == 0 || (n == 0 && !options.l2sp)) {
    st.best_objective = best_objective;
    return best;
  }

  Rng rng(opt.seed);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(params.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  const long batches_per_epoch =
      n > 0 ? (n + opt.batch_size - 1) / opt.batch_size : 1;
  const long total_steps = static_cast<long>(opt.epochs) * batches_per_epoch;
  long step = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    if (n > 0) {
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t j = rng.next_u64() % (i + 1);
        std::swap(order[i], order[j]);
      }
    }
    for (long b = 0; b < batches_per_epoch; ++b, ++step) {
      const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
      const double lr = opt.schedule == Schedule::Cosine
                            ? opt.base_lr * 0.5 * (1.0 + std::cos(M_PI * progress))
                            : opt.base_lr;

      Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
      if (n > 0) {
        const Eigen::Index begin = static_cast<Eigen::Index>(b) * opt.batch_size;
        const Eigen::Index size = std::min<Eigen::Index>(opt.batch_size, n - begin);
        std::vector<int> idx(order.begin() + begin, order.begin() + begin + size);
        Eigen::MatrixXd batch_x(size, inputs.cols());
        Eigen::VectorXd batch_w(size);
        for (Eigen::Index i = 0; i < size; ++i) {
          batch_x.row(i) = inputs.row(idx[static_cast<std::size_t>(i)]);
          batch_w[i] = weights[idx[static_cast<std::size_t>(i)]];
        }
        const Targets batch_y = targets.select(idx);
        grad = weighted_grad(spec, params, batch_x, batch_y, batch_w).values / static_cast<double>(size);
      }
      if (options.l2sp) {
        grad += l2sp_penalty(params, *options.l2sp->anchor, options.l2sp->beta).gradient;
      }
      if (options.head_only) {
        grad.segment(init.phi_span.begin, init.phi_span.size()).setZero();
      }
      if (!grad.allFinite()) throw TrainingDivergedError(step);

      velocity = opt.momentum * velocity - lr * grad;
      params.values += velocity;
      if (!params.values.allFinite()) throw TrainingDivergedError(step);
    }

    const double objective = full_objective(spec, params, inputs, targets, weights, options, &penalty);
    if (!std::isfinite(objective)) throw TrainingDivergedError(step);
    st.objective_per_epoch.push_back(objective);
    st.penalty_per_epoch.push_back(penalty);
    if (objective < best_objective) {
      best_objective = objective;
      best = params;
    }
  }

  st.best_objective = best_objective;
  st.steps = step;
  return best;
}

}  // namespace nptl
