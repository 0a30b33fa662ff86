#include <doctest.h>

#include <cmath>

#include "nptl/datasets.hpp"
#include "nptl/inference.hpp"
#include "nptl/transfer.hpp"

using namespace nptl;

namespace {

PosteriorEnsemble tiny_ensemble(int members, std::uint64_t seed) {
  ModelSpec spec;
  spec.architecture = Architecture::Mlp;
  spec.input_dim = 2;
  spec.output_dim = 3;
  spec.hidden_sizes = {5};
  PosteriorEnsemble ensemble;
  ensemble.spec = spec;
  for (int m = 0; m < members; ++m) {
    ensemble.members.push_back(init_params(spec, derive_seed(seed, static_cast<std::uint64_t>(m))));
    MemberRecord r;
    r.index = m;
    ensemble.records.push_back(r);
  }
  return ensemble;
}

}  // namespace

TEST_CASE("bma averaging fundamentals") {
  SUBCASE("identical members equal the single-member prediction") {
    PosteriorEnsemble ensemble = tiny_ensemble(1, 4);
    ensemble.members.assign(5, ensemble.members[0]);
    ensemble.records.assign(5, ensemble.records[0]);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 2);
    const Eigen::MatrixXd averaged = bma_predict(ensemble, x);
    const Eigen::MatrixXd single = predict(ensemble.spec, ensemble.members[0], x);
    CHECK((averaged - single).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("opposed one-hot rows average to one half") {
    std::vector<Eigen::MatrixXd> rows;
    Eigen::MatrixXd a(1, 2), b(1, 2);
    a << 1.0, 0.0;
    b << 0.0, 1.0;
    rows.push_back(a);
    rows.push_back(b);
    const Eigen::MatrixXd mean = mean_probability_rows(rows);
    CHECK(mean(0, 0) == 0.5);
    CHECK(mean(0, 1) == 0.5);
  }

  SUBCASE("rows stay on the simplex and the average is order invariant") {
    PosteriorEnsemble ensemble = tiny_ensemble(4, 8);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(30, 2);
    const Eigen::MatrixXd averaged = bma_predict(ensemble, x);
    for (Eigen::Index i = 0; i < averaged.rows(); ++i) {
      CHECK(std::abs(averaged.row(i).sum() - 1.0) <= 1e-9);
    }
    PosteriorEnsemble reversed = ensemble;
    std::reverse(reversed.members.begin(), reversed.members.end());
    const Eigen::MatrixXd averaged2 = bma_predict(reversed, x);
    CHECK((averaged - averaged2).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("nll metric") {
  Eigen::MatrixXd oracle(3, 2);
  oracle << 1.0, 0.0, 1.0, 0.0, 0.0, 1.0;
  Eigen::VectorXi truth(3);
  truth << 0, 0, 1;
  CHECK(metric_nll(oracle, truth) <= 1e-11);

  for (int k : {2, 5, 10}) {
    Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, k, 1.0 / k);
    Eigen::VectorXi labels = Eigen::VectorXi::Zero(4);
    CHECK(std::abs(metric_nll(uniform, labels) - std::log(static_cast<double>(k))) <=
          4.0 * std::numeric_limits<double>::epsilon() * std::log(static_cast<double>(k)));
  }

  Eigen::MatrixXd threequarters(5, 2);
  for (int i = 0; i < 5; ++i) {
    threequarters(i, 0) = 0.75;
    threequarters(i, 1) = 0.25;
  }
  Eigen::VectorXi zeros = Eigen::VectorXi::Zero(5);
  CHECK(metric_nll(threequarters, zeros) == doctest::Approx(-std::log(0.75)).epsilon(1e-12));

  Eigen::VectorXi bad(5);
  bad << 0, 0, 0, 0, 2;
  CHECK_THROWS_AS(metric_nll(threequarters, bad), std::invalid_argument);
}

TEST_CASE("accuracy metric with the lowest-index tie rule") {
  Eigen::MatrixXd oracle(2, 2);
  oracle << 1.0, 0.0, 0.0, 1.0;
  Eigen::VectorXi truth(2);
  truth << 0, 1;
  CHECK(metric_acc(oracle, truth) == 1.0);

  Eigen::VectorXi wrong(2);
  wrong << 1, 0;
  CHECK(metric_acc(oracle, wrong) == 0.0);

  Eigen::MatrixXd tie(1, 2);
  tie << 0.5, 0.5;
  Eigen::VectorXi zero(1);
  zero << 0;
  CHECK(metric_acc(tie, zero) == 1.0);
}

TEST_CASE("ece binning") {
  SUBCASE("confident oracle has zero ece") {
    Eigen::MatrixXd oracle(4, 2);
    oracle << 1, 0, 1, 0, 0, 1, 0, 1;
    Eigen::VectorXi truth(4);
    truth << 0, 0, 1, 1;
    CHECK(metric_ece(oracle, truth) == 0.0);
  }
  SUBCASE("calibrated batch is zero within 1/N") {
    const int n = 1000;
    Eigen::MatrixXd rows(n, 2);
    Eigen::VectorXi labels(n);
    for (int i = 0; i < n; ++i) {
      rows(i, 0) = 0.8;
      rows(i, 1) = 0.2;
      labels[i] = (i % 5 == 0) ? 1 : 0;  // exactly 80% of rows are correct
    }
    CHECK(metric_ece(rows, labels) <= 1.0 / n);
  }
  SUBCASE("always-confident half-right batch scores one half") {
    Eigen::MatrixXd rows(10, 2);
    Eigen::VectorXi labels(10);
    for (int i = 0; i < 10; ++i) {
      rows(i, 0) = 1.0;
      rows(i, 1) = 0.0;
      labels[i] = i % 2;
    }
    CHECK(metric_ece(rows, labels) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("a single bin reduces to |acc - mean confidence|") {
    Eigen::MatrixXd rows(4, 2);
    rows << 0.9, 0.1, 0.6, 0.4, 0.7, 0.3, 0.8, 0.2;
    Eigen::VectorXi labels(4);
    labels << 0, 1, 0, 0;
    const double acc = metric_acc(rows, labels);
    const double conf = (0.9 + 0.6 + 0.7 + 0.8) / 4.0;
    CHECK(metric_ece(rows, labels, 1) == doctest::Approx(std::abs(acc - conf)).epsilon(1e-12));
  }
}

TEST_CASE("greedy soup") {
  const LabeledDataset val = gen_gaussian_mixture(3, 2, 90, 4.0, 2);
  ModelSpec spec;
  spec.architecture = Architecture::Mlp;
  spec.input_dim = 2;
  spec.output_dim = 3;
  spec.hidden_sizes = {5};

  SUBCASE("single member is returned unchanged") {
    PosteriorEnsemble one;
    one.spec = spec;
    one.members.push_back(init_params(spec, 3));
    one.records.push_back({});
    const SoupResult soup = greedy_soup(one, val.features, val.targets.hard_labels());
    CHECK(soup.params.values == one.members[0].values);
    CHECK(soup.accepted == std::vector<int>{0});
  }

  SUBCASE("identical members accept everyone and return the common member") {
    PosteriorEnsemble same;
    same.spec = spec;
    const ParamVector member = init_params(spec, 5);
    same.members.assign(4, member);
    same.records.assign(4, {});
    const SoupResult soup = greedy_soup(same, val.features, val.targets.hard_labels());
    CHECK(soup.accepted.size() == 4);
    CHECK(soup.params.values == member.values);
  }

  SUBCASE("the soup never scores worse than the best member; trajectory is monotone") {
    PosteriorEnsemble mixed;
    mixed.spec = spec;
    for (int m = 0; m < 6; ++m) {
      mixed.members.push_back(init_params(spec, 100 + static_cast<unsigned>(m)));
      mixed.records.push_back({});
    }
    const SoupResult soup = greedy_soup(mixed, val.features, val.targets.hard_labels());
    double best_member = 1e300;
    for (const auto& member : mixed.members) {
      best_member = std::min(best_member,
                             metric_nll(predict(spec, member, val.features), val.targets.hard_labels()));
    }
    const double soup_nll =
        metric_nll(predict(spec, soup.params, val.features), val.targets.hard_labels());
    CHECK(soup_nll <= best_member + 1e-12);
    for (std::size_t i = 1; i < soup.trajectory.size(); ++i) {
      CHECK(soup.trajectory[i] <= soup.trajectory[i - 1] + 1e-12);
    }

    const SoupResult again = greedy_soup(mixed, val.features, val.targets.hard_labels());
    CHECK(again.accepted == soup.accepted);
  }
}
