#include <doctest.h>

#include <cmath>
#include <map>

#include "nptl/datasets.hpp"
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

OptimizerConfig quick_opt(int epochs, double lr = 0.1) {
  OptimizerConfig opt;
  opt.base_lr = lr;
  opt.batch_size = 64;
  opt.epochs = epochs;
  opt.seed = 42;
  return opt;
}

double train_accuracy(const ModelSpec& spec, const ParamVector& params,
                      const LabeledDataset& data) {
  return metric_acc(predict(spec, params, data.features), data.targets.hard_labels());
}

}  // namespace

TEST_CASE("pretrain: zero epochs return the initialization; training separates the mixture") {
  const ModelSpec spec = mlp_spec(2, 8, 2);
  const LabeledDataset data = gen_gaussian_mixture(2, 2, 600, 8.0, 3);

  OptimizerConfig none = quick_opt(0);
  const ParamVector frozen = pretrain(spec, data, none);
  CHECK(frozen.values == init_params(spec, none.seed).values);

  OptimizerConfig opt = quick_opt(10);
  const ParamVector trained = pretrain(spec, data, opt);
  CHECK(train_accuracy(spec, trained, data) >= 0.95);

  const ParamVector again = pretrain(spec, data, opt);
  CHECK(trained.values == again.values);
}

TEST_CASE("pretrain rejects an empty dataset") {
  const ModelSpec spec = mlp_spec(2, 4, 2);
  LabeledDataset empty;
  empty.features.resize(0, 2);
  empty.targets = Targets::hard(Eigen::VectorXi());
  CHECK_THROWS_AS(pretrain(spec, empty, quick_opt(1)), std::invalid_argument);
}

TEST_CASE("linear probe freezes phi bit-exactly and trains only the head") {
  const ModelSpec spec_up = mlp_spec(2, 8, 4);
  const LabeledDataset upstream = gen_gaussian_mixture(4, 2, 800, 7.0, 11);
  const ParamVector theta_up = pretrain(spec_up, upstream, quick_opt(10));

  ModelSpec spec_down = spec_up;
  spec_down.output_dim = 2;
  ShiftSpec shift;
  shift.class_subset = std::vector<int>{0, 2};
  const LabeledDataset downstream = apply_shift(gen_gaussian_mixture(4, 2, 400, 7.0, 13), shift, 0);

  const ParamVector probed = linear_probe(spec_up, theta_up, spec_down, downstream, quick_opt(8));
  CHECK(probed.phi() == theta_up.phi());

  // Majority-class rate is the trivial floor.
  double majority = 0.0;
  std::map<int, int> counts;
  for (Eigen::Index i = 0; i < downstream.count(); ++i) ++counts[downstream.targets.hard_labels()[i]];
  for (const auto& [label, count] : counts) {
    majority = std::max(majority, static_cast<double>(count) / downstream.count());
  }
  CHECK(train_accuracy(spec_down, probed, downstream) >= majority);
}

TEST_CASE("probing a head-only model equals plain training") {
  ModelSpec spec;
  spec.architecture = Architecture::SoftmaxLinear;
  spec.input_dim = 3;
  spec.output_dim = 3;
  const LabeledDataset data = gen_gaussian_mixture(3, 3, 300, 5.0, 21);

  const ParamVector start = init_params(spec, 42);
  const OptimizerConfig opt = quick_opt(6);

  const ParamVector probed = linear_probe(spec, start, spec, data, opt);

  // Same head initialization, same optimizer stream, full training.
  const ParamVector init = rebind_head(spec, start, spec, opt.seed);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(data.count());
  const ParamVector direct = sgd_minimize(spec, init, data.features, data.targets, ones, opt);
  CHECK(probed.values == direct.values);
}

TEST_CASE("base measure atoms mirror the training inputs") {
  const ModelSpec spec = mlp_spec(2, 6, 3);
  const LabeledDataset data = gen_gaussian_mixture(3, 2, 120, 4.0, 9);

  SUBCASE("zero head gives uniform soft labels") {
    ParamVector params = init_params(spec, 1);
    params.head().setZero();
    const PseudoDataset pseudo = make_base_measure(spec, params, data.features);
    CHECK(pseudo.count() == data.count());
    CHECK(pseudo.inputs == data.features);
    CHECK((pseudo.soft_labels.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-12);
  }

  SUBCASE("loss of the probed model against its own labels is the entropy sum") {
    const ParamVector params = init_params(spec, 7);
    const PseudoDataset pseudo = make_base_measure(spec, params, data.features);
    const double loss =
        weighted_loss(spec, params, pseudo.inputs, Targets::soft(pseudo.soft_labels),
                      Eigen::VectorXd::Ones(pseudo.count()));
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < pseudo.soft_labels.rows(); ++i) {
      for (Eigen::Index c = 0; c < pseudo.soft_labels.cols(); ++c) {
        const double p = pseudo.soft_labels(i, c);
        if (p > 0.0) entropy -= p * std::log(p);
      }
    }
    CHECK(loss == doctest::Approx(entropy).epsilon(1e-9));
  }
}

TEST_CASE("alpha selection returns the table argmin with ties toward smaller alpha") {
  const ModelSpec spec = mlp_spec(2, 6, 2);
  const LabeledDataset upstream = gen_gaussian_mixture(2, 2, 500, 6.0, 31);
  const ParamVector theta_up = pretrain(spec, upstream, quick_opt(8));
  const LabeledDataset train = gen_gaussian_mixture(2, 2, 120, 6.0, 33);
  const LabeledDataset val = gen_gaussian_mixture(2, 2, 60, 6.0, 34);
  const ParamVector probed = linear_probe(spec, theta_up, spec, train, quick_opt(6));
  const PseudoDataset pseudo = make_base_measure(spec, probed, train.features);

  SamplerConfig base;
  base.blocks = 10;
  base.opt = quick_opt(3, 0.05);
  base.master_seed = 99;

  SUBCASE("singleton grid") {
    const AlphaSelection sel =
        select_alpha({2.5}, spec, probed, train, pseudo, base, 2, val);
    CHECK(sel.chosen_alpha == 2.5);
    CHECK(sel.table.size() == 1);
  }

  SUBCASE("argmin contract") {
    const AlphaSelection sel =
        select_alpha({0.1, 1.0, 10.0}, spec, probed, train, pseudo, base, 2, val);
    double best = 1e300;
    for (const auto& row : sel.table) best = std::min(best, row.val_nll);
    bool found = false;
    for (const auto& row : sel.table) {
      if (row.alpha == sel.chosen_alpha) {
        CHECK(row.val_nll == best);
        found = true;
      }
    }
    CHECK(found);

    const AlphaSelection again =
        select_alpha({0.1, 1.0, 10.0}, spec, probed, train, pseudo, base, 2, val);
    CHECK(again.chosen_alpha == sel.chosen_alpha);
  }

  SUBCASE("negative alpha rejected") {
    CHECK_THROWS_AS(select_alpha({-1.0}, spec, probed, train, pseudo, base, 2, val),
                    std::invalid_argument);
  }
}
