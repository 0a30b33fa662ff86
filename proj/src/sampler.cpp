#include "nptl/sampler.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

#include <nlohmann/json.hpp>

#include "nptl/rng.hpp"

namespace nptl {

std::size_t PosteriorEnsemble::surviving_count() const {
  return surviving_indices().size();
}

std::vector<int> PosteriorEnsemble::surviving_indices() const {
  std::vector<int> alive;
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (records.size() <= m || !records[m].diverged) alive.push_back(static_cast<int>(m));
  }
  return alive;
}

double nptl_objective(const ModelSpec& spec, const ParamVector& params,
                      const LabeledDataset& train, const PseudoDataset& pseudo,
                      const WeightDraw& draw) {
  if (draw.w.size() != train.count() || draw.w_tilde.size() != pseudo.count()) {
    throw std::invalid_argument("nptl_objective: weight draw does not match data sizes");
  }
  const double observed = weighted_loss(spec, params, train.features, train.targets, draw.w);
  const double prior = weighted_loss(spec, params, pseudo.inputs,
                                     pseudo.targets(spec.is_classifier()), draw.w_tilde);
  return observed + prior;
}

namespace {

// Executes fn(0..count-1) on a bounded pool; results land in index order, so
// output is identical for any worker count.
void run_indexed(int count, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int threads = std::min(workers, count);
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

struct ConcatBatch {
  Eigen::MatrixXd inputs;
  Targets targets = Targets::hard(Eigen::VectorXi());
};

// Observed and pseudo points stacked into one 2n-row batch. For classifiers
// the observed hard labels are lifted to one-hot rows so both halves share
// the soft cross-entropy path (identical loss values for hard labels).
ConcatBatch concat_for_sampling(const ModelSpec& spec, const LabeledDataset& train,
                                const PseudoDataset& pseudo) {
  if (pseudo.count() != train.count()) {
    throw std::invalid_argument("nptl_sample: pseudo dataset must contain one atom per training point");
  }
  ConcatBatch batch;
  batch.inputs.resize(train.count() + pseudo.count(), train.features.cols());
  batch.inputs.topRows(train.count()) = train.features;
  batch.inputs.bottomRows(pseudo.count()) = pseudo.inputs;
  if (spec.is_classifier()) {
    const Eigen::MatrixXd hard = train.targets.as_soft(spec.output_dim).soft_rows();
    Eigen::MatrixXd rows(batch.inputs.rows(), spec.output_dim);
    rows.topRows(hard.rows()) = hard;
    rows.bottomRows(pseudo.count()) = pseudo.soft_labels;
    batch.targets = Targets::soft(std::move(rows));
  } else {
    Eigen::MatrixXd values(batch.inputs.rows(), pseudo.soft_labels.cols());
    values.topRows(train.count()) = train.targets.real_values();
    values.bottomRows(pseudo.count()) = pseudo.soft_labels;
    batch.targets = Targets::regression(std::move(values));
  }
  return batch;
}

}  // namespace

PosteriorEnsemble nptl_sample(const ModelSpec& spec, const SamplerConfig& config,
                              const ParamVector& init, const LabeledDataset& train,
                              const PseudoDataset& pseudo) {
  config.validate();
  spec.validate();
  const int n = static_cast<int>(train.count());
  if (n == 0) throw std::invalid_argument("nptl_sample: empty training set");
  if (init.size() != spec.param_count()) {
    throw std::invalid_argument("nptl_sample: init does not match spec");
  }
  if (config.blocked && config.blocks > n) {
    throw std::invalid_argument("nptl_sample: more blocks than training points");
  }

  const ConcatBatch batch = concat_for_sampling(spec, train, pseudo);

  PosteriorEnsemble ensemble;
  ensemble.spec = spec;
  ensemble.members.assign(static_cast<std::size_t>(config.samples), init);
  ensemble.records.assign(static_cast<std::size_t>(config.samples), MemberRecord{});

  run_indexed(config.samples, config.workers, [&](int m) {
    const auto start = std::chrono::steady_clock::now();
    MemberRecord& record = ensemble.records[static_cast<std::size_t>(m)];
    record.index = m;
    record.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(m));
    Rng rng(record.seed);

    WeightDraw draw;
    if (config.blocked) {
      const DirichletSpec dspec{n, config.blocks, config.alpha};
      const BlockMapping mapping = make_block_mapping(n, config.blocks, rng);
      draw = draw_weights_blocked(dspec, mapping, rng);
    } else {
      draw = draw_weights_nonblocked(n, config.alpha, rng);
    }
    record.pseudo_underflow_count = draw.pseudo_underflow_count;

    Eigen::VectorXd weights(2 * n);
    weights.head(n) = draw.w;
    weights.tail(n) = draw.w_tilde;

    OptimizerConfig opt = config.opt;
    opt.seed = derive_seed(record.seed, "minibatch");
    try {
      TrainStats stats;
      ensemble.members[static_cast<std::size_t>(m)] =
          sgd_minimize(spec, init, batch.inputs, batch.targets, weights, opt, {}, &stats);
      record.final_objective = stats.best_objective;
    } catch (const TrainingDivergedError& err) {
      record.diverged = true;
      record.diverged_step = err.step;
    }
    record.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start).count();
  });

  if (ensemble.surviving_count() == 0) throw AllMembersDivergedError();
  return ensemble;
}

PosteriorEnsemble ensemble_baseline(const ModelSpec& spec, int count, const ParamVector& init,
                                    const LabeledDataset& train, const OptimizerConfig& opt,
                                    std::uint64_t master_seed, int workers,
                                    const ParamVector* anchor, double beta) {
  if (count < 1) throw std::invalid_argument("ensemble_baseline: count must be >= 1");
  spec.validate();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(train.count());

  PosteriorEnsemble ensemble;
  ensemble.spec = spec;
  ensemble.members.assign(static_cast<std::size_t>(count), init);
  ensemble.records.assign(static_cast<std::size_t>(count), MemberRecord{});

  run_indexed(count, workers, [&](int m) {
    const auto start = std::chrono::steady_clock::now();
    MemberRecord& record = ensemble.records[static_cast<std::size_t>(m)];
    record.index = m;
    record.seed = derive_seed(master_seed, static_cast<std::uint64_t>(m));
    OptimizerConfig member_opt = opt;
    member_opt.seed = derive_seed(record.seed, "minibatch");
    TrainOptions options;
    if (anchor) options.l2sp = L2spTerm{anchor, beta};
    try {
      TrainStats stats;
      ensemble.members[static_cast<std::size_t>(m)] =
          sgd_minimize(spec, init, train.features, train.targets, ones, member_opt, options, &stats);
      record.final_objective = stats.best_objective;
    } catch (const TrainingDivergedError& err) {
      record.diverged = true;
      record.diverged_step = err.step;
    }
    record.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start).count();
  });

  if (ensemble.surviving_count() == 0) throw AllMembersDivergedError();
  return ensemble;
}

ParamVector l2sp_finetune(const ModelSpec& spec, const ParamVector& init,
                          const ParamVector& anchor, double beta, const LabeledDataset& train,
                          const OptimizerConfig& opt, TrainStats* stats) {
  if (!(beta > 0.0)) throw std::invalid_argument("l2sp_finetune: beta must be positive");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(train.count());
  TrainOptions options;
  options.l2sp = L2spTerm{&anchor, beta};
  return sgd_minimize(spec, init, train.features, train.targets, ones, opt, options, stats);
}

// --- persistence ------------------------------------------------------------

namespace {

std::string member_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "member_%03d.params", index);
  return buf;
}

}  // namespace

void save_ensemble(const PosteriorEnsemble& ensemble, const SamplerConfig& config,
                   const std::string& directory, const std::string& method,
                   std::uint64_t config_hash) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);

  nlohmann::json j;
  j["format"] = "nptl-ensemble";
  j["version"] = 1;
  j["method"] = method;
  j["config_hash"] = config_hash;
  j["model"] = {{"architecture", to_string(ensemble.spec.architecture)},
                {"input_dim", ensemble.spec.input_dim},
                {"output_dim", ensemble.spec.output_dim},
                {"hidden_sizes", ensemble.spec.hidden_sizes},
                {"activation", to_string(ensemble.spec.activation)},
                {"hash", ensemble.spec.hash()}};
  j["sampler"] = {{"samples", config.samples}, {"alpha", config.alpha},
                  {"blocks", config.blocks},   {"blocked", config.blocked},
                  {"master_seed", config.master_seed}};
  j["optimizer"] = {{"base_lr", config.opt.base_lr},
                    {"schedule", config.opt.schedule == Schedule::Cosine ? "cosine" : "constant"},
                    {"momentum", config.opt.momentum},
                    {"batch_size", config.opt.batch_size},
                    {"epochs", config.opt.epochs}};
  j["members"] = nlohmann::json::array();
  for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
    const std::string file = member_file_name(static_cast<int>(m));
    save_params(ensemble.members[m], ensemble.spec, (fs::path(directory) / file).string());
    const MemberRecord& r = ensemble.records[m];
    j["members"].push_back({{"index", r.index},
                            {"file", file},
                            {"seed", r.seed},
                            {"objective", r.final_objective},
                            {"wall_ms", r.wall_ms},
                            {"diverged", r.diverged},
                            {"pseudo_underflow_count", r.pseudo_underflow_count}});
  }
  std::ofstream os(fs::path(directory) / "manifest.json", std::ios::trunc);
  if (!os) throw std::runtime_error("save_ensemble: cannot write manifest in " + directory);
  os << j.dump(2) << "\n";
}

PosteriorEnsemble load_ensemble(const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = fs::path(directory) / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("load_ensemble: missing manifest " + manifest_path.string());
  nlohmann::json j;
  is >> j;
  if (j.value("format", "") != "nptl-ensemble") {
    throw std::runtime_error("load_ensemble: not an ensemble manifest: " + manifest_path.string());
  }

  PosteriorEnsemble ensemble;
  const auto& model = j.at("model");
  ensemble.spec.architecture = architecture_from_string(model.at("architecture").get<std::string>());
  ensemble.spec.input_dim = model.at("input_dim").get<int>();
  ensemble.spec.output_dim = model.at("output_dim").get<int>();
  ensemble.spec.hidden_sizes = model.at("hidden_sizes").get<std::vector<int>>();
  ensemble.spec.activation = activation_from_string(model.at("activation").get<std::string>());

  for (const auto& entry : j.at("members")) {
    const fs::path file = fs::path(directory) / entry.at("file").get<std::string>();
    if (!fs::exists(file)) {
      throw std::runtime_error("load_ensemble: missing member file " + file.string());
    }
    ensemble.members.push_back(load_params(ensemble.spec, file.string()));
    MemberRecord r;
    r.index = entry.at("index").get<int>();
    r.seed = entry.at("seed").get<std::uint64_t>();
    r.final_objective = entry.at("objective").get<double>();
    r.wall_ms = entry.at("wall_ms").get<double>();
    r.diverged = entry.at("diverged").get<bool>();
    r.pseudo_underflow_count = entry.value("pseudo_underflow_count", 0L);
    ensemble.records.push_back(r);
  }
  return ensemble;
}

}  // namespace nptl
