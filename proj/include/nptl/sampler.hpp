#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nptl/datasets.hpp"
#include "nptl/dirichlet.hpp"
#include "nptl/models.hpp"
#include "nptl/optimizer.hpp"
#include "nptl/transfer.hpp"

namespace nptl {

struct SamplerConfig {
  int samples = 10;        // M
  double alpha = 1.0;
  int blocks = 10;         // L; ignored when blocked = false
  bool blocked = true;
  OptimizerConfig opt;
  std::uint64_t master_seed = 0;
  int workers = 1;

  void validate() const {
    if (samples < 1) throw std::invalid_argument("SamplerConfig: samples must be >= 1");
    if (blocked && blocks < 1) throw std::invalid_argument("SamplerConfig: blocks must be >= 1");
    if (!(alpha >= 0.0)) throw std::invalid_argument("SamplerConfig: alpha must be >= 0");
    if (workers < 1) throw std::invalid_argument("SamplerConfig: workers must be >= 1");
    opt.validate();
  }
};

struct MemberRecord {
  int index = 0;
  std::uint64_t seed = 0;
  double final_objective = 0.0;
  double wall_ms = 0.0;
  bool diverged = false;
  long diverged_step = -1;
  long pseudo_underflow_count = 0;
};

struct PosteriorEnsemble {
  ModelSpec spec;
  std::vector<ParamVector> members;   // index order, count = M
  std::vector<MemberRecord> records;  // parallel to members

  std::size_t surviving_count() const;
  /// Indices of members that completed without divergence.
  std::vector<int> surviving_indices() const;
};

struct AllMembersDivergedError : std::runtime_error {
  AllMembersDivergedError() : std::runtime_error("all posterior sampler members diverged") {}
};

/// The weighted objective of one posterior draw:
/// sum_j w_j loss(theta; x_j, y_j) + sum_k wt_k loss(theta; x_k, pseudo_k).
double nptl_objective(const ModelSpec& spec, const ParamVector& params,
                      const LabeledDataset& train, const PseudoDataset& pseudo,
                      const WeightDraw& draw);

/// Posterior sampling by weighted-loss minimization. Per member m, a seed
/// derived from (master_seed, m) drives a fresh block mapping, a fresh weight
/// draw and the minibatch shuffles, so the ensemble is reproducible and
/// independent of worker count and completion order. Minibatches mix observed
/// and pseudo points; each example carries its own weight. A diverged member
/// is recorded and skipped by downstream averaging; the run fails only if
/// every member diverges.
PosteriorEnsemble nptl_sample(const ModelSpec& spec, const SamplerConfig& config,
                              const ParamVector& init, const LabeledDataset& train,
                              const PseudoDataset& pseudo);

/// Independent unweighted fine-tunes from the same initialization, differing
/// only in derived seeds; optionally with an L2SP pull toward `anchor`.
PosteriorEnsemble ensemble_baseline(const ModelSpec& spec, int count, const ParamVector& init,
                                    const LabeledDataset& train, const OptimizerConfig& opt,
                                    std::uint64_t master_seed, int workers = 1,
                                    const ParamVector* anchor = nullptr, double beta = 0.0);

/// Single fine-tune of NLL + (1/2beta)||theta - anchor||^2.
ParamVector l2sp_finetune(const ModelSpec& spec, const ParamVector& init,
                          const ParamVector& anchor, double beta, const LabeledDataset& train,
                          const OptimizerConfig& opt, TrainStats* stats = nullptr);

/// Ensemble persistence: one parameter file per member plus manifest.json.
void save_ensemble(const PosteriorEnsemble& ensemble, const SamplerConfig& config,
                   const std::string& directory, const std::string& method,
                   std::uint64_t config_hash);
PosteriorEnsemble load_ensemble(const std::string& directory);

}  // namespace nptl
