#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nptl/datasets.hpp"
#include "nptl/diagnostics.hpp"
#include "nptl/inference.hpp"
#include "nptl/sampler.hpp"
#include "nptl/transfer.hpp"

using namespace nptl;

namespace {

ModelSpec mlp_spec(int in, int hidden, int out) {
  ModelSpec spec;
  spec.architecture = Architecture::Mlp;
  spec.input_dim = in;
  spec.output_dim = out;
  spec.hidden_sizes = {hidden};
  return spec;
}

OptimizerConfig quick_opt(int epochs, double lr = 0.05) {
  OptimizerConfig opt;
  opt.base_lr = lr;
  opt.batch_size = 64;
  opt.epochs = epochs;
  opt.seed = 5;
  return opt;
}

struct Fixture {
  ModelSpec spec = mlp_spec(2, 6, 3);
  LabeledDataset train = gen_gaussian_mixture(3, 2, 90, 5.0, 17);
  ParamVector probed = init_params(spec, 2);
  PseudoDataset pseudo = make_base_measure(spec, probed, train.features);
};

}  // namespace

TEST_CASE("nptl objective reduces to the two one-sided losses") {
  Fixture f;
  const int n = static_cast<int>(f.train.count());
  WeightDraw draw;
  draw.w = Eigen::VectorXd::Ones(n);
  draw.w_tilde = Eigen::VectorXd::Zero(n);
  const double train_only = nptl_objective(f.spec, f.probed, f.train, f.pseudo, draw);
  const double train_nll = weighted_loss(f.spec, f.probed, f.train.features, f.train.targets,
                                         Eigen::VectorXd::Ones(n));
  CHECK(train_only == doctest::Approx(train_nll).epsilon(1e-10));

  draw.w.setZero();
  draw.w_tilde.setOnes();
  const double pseudo_only = nptl_objective(f.spec, f.probed, f.train, f.pseudo, draw);
  const double pseudo_ce = weighted_loss(f.spec, f.probed, f.pseudo.inputs,
                                         Targets::soft(f.pseudo.soft_labels),
                                         Eigen::VectorXd::Ones(n));
  CHECK(pseudo_only == doctest::Approx(pseudo_ce).epsilon(1e-10));
}

TEST_CASE("nptl objective is linear in the draw") {
  Fixture f;
  const int n = static_cast<int>(f.train.count());
  Rng rng(8);
  WeightDraw d1, d2, sum;
  d1.w.resize(n);
  d1.w_tilde.resize(n);
  d2.w.resize(n);
  d2.w_tilde.resize(n);
  for (int i = 0; i < n; ++i) {
    d1.w[i] = rng.uniform();
    d1.w_tilde[i] = rng.uniform();
    d2.w[i] = 2.0 * rng.uniform();
    d2.w_tilde[i] = 0.5 * rng.uniform();
  }
  sum.w = d1.w + d2.w;
  sum.w_tilde = d1.w_tilde + d2.w_tilde;
  const double lhs = nptl_objective(f.spec, f.probed, f.train, f.pseudo, sum);
  const double rhs = nptl_objective(f.spec, f.probed, f.train, f.pseudo, d1) +
                     nptl_objective(f.spec, f.probed, f.train, f.pseudo, d2);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("zero optimization steps return the initialization") {
  Fixture f;
  SamplerConfig config;
  config.samples = 1;
  config.alpha = 1.0;
  config.blocks = 10;
  config.opt = quick_opt(0);
  config.master_seed = 3;
  const PosteriorEnsemble ensemble = nptl_sample(f.spec, config, f.probed, f.train, f.pseudo);
  REQUIRE(ensemble.members.size() == 1);
  CHECK(ensemble.members[0].values == f.probed.values);
}

TEST_CASE("ensembles are bit-identical across worker counts and schedulings") {
  Fixture f;
  SamplerConfig config;
  config.samples = 6;
  config.alpha = 1.5;
  config.blocks = 9;
  config.opt = quick_opt(4);
  config.master_seed = 1234;

  config.workers = 1;
  const PosteriorEnsemble serial = nptl_sample(f.spec, config, f.probed, f.train, f.pseudo);
  config.workers = 4;
  const PosteriorEnsemble pooled = nptl_sample(f.spec, config, f.probed, f.train, f.pseudo);
  REQUIRE(serial.members.size() == pooled.members.size());
  for (std::size_t m = 0; m < serial.members.size(); ++m) {
    CHECK(serial.members[m].values == pooled.members[m].values);
    CHECK(serial.records[m].seed == pooled.records[m].seed);
  }
}

TEST_CASE("members depend only on their derived seed, not on batch position") {
  Fixture f;
  SamplerConfig config;
  config.samples = 4;
  config.alpha = 1.0;
  config.blocks = 10;
  config.opt = quick_opt(3);
  config.master_seed = 77;
  const PosteriorEnsemble batch = nptl_sample(f.spec, config, f.probed, f.train, f.pseudo);

  SamplerConfig one = config;
  one.samples = 1;
  const PosteriorEnsemble first = nptl_sample(f.spec, one, f.probed, f.train, f.pseudo);
  CHECK(first.members[0].values == batch.members[0].values);
}

TEST_CASE("returned members never score worse than the initialization") {
  Fixture f;
  SamplerConfig config;
  config.samples = 5;
  config.alpha = 2.0;
  config.blocks = 10;
  config.opt = quick_opt(5);
  config.master_seed = 31;
  const PosteriorEnsemble ensemble = nptl_sample(f.spec, config, f.probed, f.train, f.pseudo);

  for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
    Rng rng(ensemble.records[m].seed);
    const int n = static_cast<int>(f.train.count());
    const BlockMapping mapping = make_block_mapping(n, config.blocks, rng);
    const WeightDraw draw =
        draw_weights_blocked({n, config.blocks, config.alpha}, mapping, rng);
    const double at_member = nptl_objective(f.spec, ensemble.members[m], f.train, f.pseudo, draw);
    const double at_init = nptl_objective(f.spec, f.probed, f.train, f.pseudo, draw);
    CHECK(at_member <= at_init + 1e-9 * std::abs(at_init));
  }
}

TEST_CASE("mean-model sampling matches the closed-form moments") {
  // One-parameter mean model: constant zero features, regression target =
  // the data value; the weighted optimum is the weighted mean, reached here
  // by full-batch descent on the bias.
  ModelSpec spec;
  spec.architecture = Architecture::LinearRegression;
  spec.input_dim = 1;
  spec.output_dim = 1;

  const int n = 60;
  Rng data_rng(4);
  Eigen::VectorXd values(n), pseudo_values(n);
  for (int i = 0; i < n; ++i) {
    values[i] = 1.0 + 1.5 * data_rng.normal();
    pseudo_values[i] = values[i] + 0.8;
  }

  LabeledDataset train;
  train.features = Eigen::MatrixXd::Zero(n, 1);
  train.targets = Targets::regression(values);
  PseudoDataset pseudo;
  pseudo.inputs = Eigen::MatrixXd::Zero(n, 1);
  pseudo.soft_labels = pseudo_values;

  SamplerConfig config;
  config.samples = 400;
  config.alpha = 1.0;
  config.blocks = 10;
  config.master_seed = 2718;
  config.workers = 4;
  // Full-batch mean-gradient descent on the quadratic contracts the bias
  // error by (1 - lr) per step since the weights sum to the batch size.
  config.opt.base_lr = 0.5;
  config.opt.schedule = Schedule::Constant;
  config.opt.momentum = 0.0;
  config.opt.batch_size = 2 * n;
  config.opt.epochs = 80;

  const ParamVector init = zero_params(spec);
  const PosteriorEnsemble ensemble = nptl_sample(spec, config, init, train, pseudo);

  std::vector<double> means;
  for (const auto& member : ensemble.members) means.push_back(member.values[1]);  // bias
  const SampleMoments emp = sample_moments(means);
  const WeightedMeanMoments oracle =
      weighted_mean_moments(values, pseudo_values, config.alpha, true, config.blocks);
  CHECK(std::abs(emp.mean - oracle.mean) <= 4.0 * emp.std_error);
}

TEST_CASE("ensemble baseline basics") {
  Fixture f;
  const OptimizerConfig opt = quick_opt(3);

  SUBCASE("count 1 equals a single plain fine-tune") {
    const PosteriorEnsemble single =
        ensemble_baseline(f.spec, 1, f.probed, f.train, opt, 9);
    OptimizerConfig expected_opt = opt;
    expected_opt.seed = derive_seed(derive_seed(9, std::uint64_t{0}), "minibatch");
    const ParamVector direct =
        sgd_minimize(f.spec, f.probed, f.train.features, f.train.targets,
                     Eigen::VectorXd::Ones(f.train.count()), expected_opt);
    CHECK(single.members[0].values == direct.values);
  }

  SUBCASE("zero steps returns copies of the initialization") {
    const PosteriorEnsemble frozen =
        ensemble_baseline(f.spec, 3, f.probed, f.train, quick_opt(0), 9);
    for (const auto& member : frozen.members) CHECK(member.values == f.probed.values);
  }

  SUBCASE("distinct derived seeds give distinct members") {
    const PosteriorEnsemble pair = ensemble_baseline(f.spec, 2, f.probed, f.train, opt, 9);
    CHECK(pair.members[0].values != pair.members[1].values);
  }
}

TEST_CASE("l2sp finetune limits") {
  Fixture f;
  const ParamVector anchor = init_params(f.spec, 123);

  SUBCASE("huge beta approximates the plain fine-tune") {
    OptimizerConfig opt = quick_opt(4);
    const ParamVector strong = l2sp_finetune(f.spec, f.probed, anchor, 1e12, f.train, opt);
    const ParamVector plain =
        sgd_minimize(f.spec, f.probed, f.train.features, f.train.targets,
                     Eigen::VectorXd::Ones(f.train.count()), opt);
    CHECK((strong.values - plain.values).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("tiny beta with no data pins the result at the anchor") {
    LabeledDataset empty;
    empty.features.resize(0, 2);
    empty.targets = Targets::hard(Eigen::VectorXi());
    OptimizerConfig opt;
    opt.base_lr = 0.5e-8;  // half of beta: contraction factor 1/2 per step
    opt.schedule = Schedule::Constant;
    opt.momentum = 0.0;
    opt.batch_size = 1;
    opt.epochs = 60;
    const ParamVector pinned = l2sp_finetune(f.spec, f.probed, anchor, 1e-8, empty, opt);
    CHECK((pinned.values - anchor.values).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("penalty trajectory is monotone when the data optimum is the anchor") {
    // Quadratic toy: targets generated exactly by the anchor parameters.
    ModelSpec lin;
    lin.architecture = Architecture::LinearRegression;
    lin.input_dim = 2;
    lin.output_dim = 1;
    ParamVector anchor_lin = init_params(lin, 6);
    Rng rng(7);
    Eigen::MatrixXd x(40, 2);
    for (int i = 0; i < 40; ++i)
      for (int j = 0; j < 2; ++j) x(i, j) = rng.normal();
    LabeledDataset data;
    data.features = x;
    data.targets = Targets::regression(forward(lin, anchor_lin, x));

    OptimizerConfig opt;
    opt.base_lr = 0.05;
    opt.schedule = Schedule::Constant;
    opt.momentum = 0.0;
    opt.batch_size = 40;
    opt.epochs = 50;
    opt.seed = 2;
    TrainStats stats;
    const ParamVector init = init_params(lin, 77);
    l2sp_finetune(lin, init, anchor_lin, 5.0, data, opt, &stats);
    for (std::size_t e = 1; e < stats.penalty_per_epoch.size(); ++e) {
      CHECK(stats.penalty_per_epoch[e] <= stats.penalty_per_epoch[e - 1] + 1e-12);
    }
  }

  SUBCASE("beta must be positive") {
    CHECK_THROWS_AS(l2sp_finetune(f.spec, f.probed, anchor, 0.0, f.train, quick_opt(1)),
                    std::invalid_argument);
  }
}

TEST_CASE("ensemble persistence round trip") {
  Fixture f;
  SamplerConfig config;
  config.samples = 3;
  config.alpha = 0.5;
  config.blocks = 9;
  config.opt = quick_opt(2);
  config.master_seed = 55;
  const PosteriorEnsemble ensemble = nptl_sample(f.spec, config, f.probed, f.train, f.pseudo);

  const std::string dir = "test_ensemble_dir";
  save_ensemble(ensemble, config, dir, "nptl", 0xabcdULL);
  const PosteriorEnsemble loaded = load_ensemble(dir);
  REQUIRE(loaded.members.size() == ensemble.members.size());
  for (std::size_t m = 0; m < loaded.members.size(); ++m) {
    CHECK(loaded.members[m].values == ensemble.members[m].values);
  }

  std::filesystem::remove(std::filesystem::path(dir) / "member_001.params");
  CHECK_THROWS_WITH_AS(load_ensemble(dir), doctest::Contains("member_001.params"),
                       std::runtime_error);
  std::filesystem::remove_all(dir);
}
