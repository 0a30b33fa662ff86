#pragma once

#include <Eigen/Core>
#include <vector>

#include "nptl/datasets.hpp"
#include "nptl/models.hpp"
#include "nptl/optimizer.hpp"

namespace nptl {

/// The prior pseudo-dataset: the downstream training inputs paired with the
/// probed model's predictive rows (soft labels, or predicted values for
/// regression). Exactly one atom per training input, in input order.
struct PseudoDataset {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd soft_labels;

  Eigen::Index count() const { return inputs.rows(); }
  Targets targets(bool classification) const {
    return classification ? Targets::soft(soft_labels) : Targets::regression(soft_labels);
  }
};

/// Full-parameter training from a fresh fan-in initialization on the
/// upstream task.
ParamVector pretrain(const ModelSpec& spec, const LabeledDataset& upstream,
                     const OptimizerConfig& opt, TrainStats* stats = nullptr);

/// Copies the feature extractor of `theta_up` (trained under `spec_up`) into
/// a model with `head_dim` outputs and a freshly initialized head. The
/// feature extractor layers of the two specs must agree.
ParamVector rebind_head(const ModelSpec& spec_up, const ParamVector& theta_up,
                        const ModelSpec& spec_down, std::uint64_t head_seed);

/// Linear probing: phi is copied bit-exactly from theta_up and never updated;
/// only the head trains on the downstream task.
ParamVector linear_probe(const ModelSpec& spec_up, const ParamVector& theta_up,
                         const ModelSpec& spec_down, const LabeledDataset& downstream_train,
                         const OptimizerConfig& opt, TrainStats* stats = nullptr);

PseudoDataset make_base_measure(const ModelSpec& spec, const ParamVector& probed,
                                const Eigen::MatrixXd& downstream_inputs);

struct AlphaCandidate {
  double alpha = 0.0;
  double val_nll = 0.0;
};

struct AlphaSelection {
  double chosen_alpha = 0.0;
  std::vector<AlphaCandidate> table;
};

struct SamplerConfig;  // sampler.hpp

/// Empirical-Bayes alpha selection: run the posterior sampler with a reduced
/// sample count per candidate, score the model average on the validation set
/// by NLL, and return the argmin (ties toward the smaller alpha).
AlphaSelection select_alpha(const std::vector<double>& grid, const ModelSpec& spec,
                            const ParamVector& probed, const LabeledDataset& train,
                            const PseudoDataset& pseudo, const SamplerConfig& base_config,
                            int search_samples, const LabeledDataset& val);

/// Default alpha grid {0.01, 0.1, 1, 10, 100} * (n / 100).
std::vector<double> default_alpha_grid(int n);

}  // namespace nptl
