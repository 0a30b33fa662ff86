#include "nptl/transfer.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "nptl/inference.hpp"
#include "nptl/rng.hpp"
#include "nptl/sampler.hpp"

namespace nptl {

ParamVector pretrain(const ModelSpec& spec, const LabeledDataset& upstream,
                     const OptimizerConfig& opt, TrainStats* stats) {
  if (upstream.count() == 0) throw std::invalid_argument("pretrain: upstream dataset is empty");
  const ParamVector init = init_params(spec, opt.seed);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(upstream.count());
  return sgd_minimize(spec, init, upstream.features, upstream.targets, ones, opt, {}, stats);
}

ParamVector rebind_head(const ModelSpec& spec_up, const ParamVector& theta_up,
                        const ModelSpec& spec_down, std::uint64_t head_seed) {
  spec_up.validate();
  spec_down.validate();
  if (theta_up.size() != spec_up.param_count()) {
    throw std::invalid_argument("rebind_head: parameters do not match upstream spec");
  }
  if (spec_up.architecture != spec_down.architecture ||
      spec_up.input_dim != spec_down.input_dim ||
      spec_up.hidden_sizes != spec_down.hidden_sizes ||
      spec_up.activation != spec_down.activation) {
    throw std::invalid_argument("rebind_head: feature extractors are incompatible");
  }
  ParamVector out = init_params(spec_down, derive_seed(head_seed, "head-init"));
  out.phi() = theta_up.phi();
  return out;
}

ParamVector linear_probe(const ModelSpec& spec_up, const ParamVector& theta_up,
                         const ModelSpec& spec_down, const LabeledDataset& downstream_train,
                         const OptimizerConfig& opt, TrainStats* stats) {
  if (downstream_train.count() == 0) throw std::invalid_argument("linear_probe: empty training set");
  const ParamVector init = rebind_head(spec_up, theta_up, spec_down, opt.seed);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(downstream_train.count());
  TrainOptions options;
  options.head_only = true;
  return sgd_minimize(spec_down, init, downstream_train.features, downstream_train.targets, ones,
                      opt, options, stats);
}

PseudoDataset make_base_measure(const ModelSpec& spec, const ParamVector& probed,
                                const Eigen::MatrixXd& downstream_inputs) {
  PseudoDataset pseudo;
  pseudo.inputs = downstream_inputs;
  pseudo.soft_labels = predict(spec, probed, downstream_inputs);
  return pseudo;
}

std::vector<double> default_alpha_grid(int n) {
  const double scale = static_cast<double>(n) / 100.0;
  return {0.01 * scale, 0.1 * scale, 1.0 * scale, 10.0 * scale, 100.0 * scale};
}

AlphaSelection select_alpha(const std::vector<double>& grid, const ModelSpec& spec,
                            const ParamVector& probed, const LabeledDataset& train,
                            const PseudoDataset& pseudo, const SamplerConfig& base_config,
                            int search_samples, const LabeledDataset& val) {
  if (grid.empty()) throw std::invalid_argument("select_alpha: empty grid");
  if (search_samples < 1) throw std::invalid_argument("select_alpha: search_samples must be >= 1");
  if (val.count() == 0) throw std::invalid_argument("select_alpha: empty validation set");
  for (double a : grid) {
    if (a < 0.0) throw std::invalid_argument("select_alpha: negative alpha in grid");
  }

  std::vector<double> candidates = grid;
  std::sort(candidates.begin(), candidates.end());  // ties resolve toward smaller alpha

  AlphaSelection selection;
  double best = std::numeric_limits<double>::infinity();
  // A common derived seed across candidates, so they differ only through
  // alpha; candidate runs are reproducible from the master seed alone.
  const std::uint64_t search_seed = derive_seed(base_config.master_seed, "alpha-search");
  for (double alpha : candidates) {
    SamplerConfig config = base_config;
    config.alpha = alpha;
    config.samples = search_samples;
    config.master_seed = search_seed;
    const PosteriorEnsemble ensemble = nptl_sample(spec, config, probed, train, pseudo);
    const Eigen::MatrixXd probs = bma_predict(ensemble, val.features);
    const double nll = metric_nll(probs, val.targets.hard_labels());
    selection.table.push_back({alpha, nll});
    if (nll < best) {
      best = nll;
      selection.chosen_alpha = alpha;
    }
  }
  return selection;
}

}  // namespace nptl
