#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "nptl/datasets.hpp"

using namespace nptl;

TEST_CASE("mixture classes are balanced and deterministic") {
  const LabeledDataset data = gen_gaussian_mixture(2, 3, 1000, 4.0, 99);
  std::map<int, int> counts;
  for (Eigen::Index i = 0; i < data.count(); ++i) ++counts[data.targets.hard_labels()[i]];
  CHECK(counts[0] == 500);
  CHECK(counts[1] == 500);

  const LabeledDataset again = gen_gaussian_mixture(2, 3, 1000, 4.0, 99);
  CHECK(data.features == again.features);

  const LabeledDataset uneven = gen_gaussian_mixture(3, 2, 10, 4.0, 1);
  std::map<int, int> c2;
  for (Eigen::Index i = 0; i < uneven.count(); ++i) ++c2[uneven.targets.hard_labels()[i]];
  CHECK(c2[0] == 4);
  CHECK(c2[1] == 3);
  CHECK(c2[2] == 3);
}

TEST_CASE("identity shift is bit exact; rotation is periodic; translation shifts the mean") {
  const LabeledDataset data = gen_gaussian_mixture(2, 2, 400, 3.0, 5);

  SUBCASE("identity") {
    const LabeledDataset out = apply_shift(data, ShiftSpec{}, 0);
    CHECK(out.features == data.features);
  }
  SUBCASE("full turn") {
    ShiftSpec spec;
    spec.rotation_angle = 2.0 * M_PI;
    const LabeledDataset out = apply_shift(data, spec, 0);
    CHECK((out.features - data.features).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("translation") {
    ShiftSpec spec;
    spec.mean_shift = Eigen::Vector2d(5.0, 0.0);
    const LabeledDataset out = apply_shift(data, spec, 0);
    const double delta = out.features.col(0).mean() - data.features.col(0).mean();
    CHECK(delta == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(out.features.col(1) == data.features.col(1));
  }
  SUBCASE("label permutation and subset") {
    ShiftSpec spec;
    spec.label_permutation = std::vector<int>{1, 0};
    spec.class_subset = std::vector<int>{1};
    const LabeledDataset out = apply_shift(data, spec, 0);
    CHECK(out.count() == 200);
    CHECK(out.targets.hard_labels().maxCoeff() == 0);
  }
  SUBCASE("rotation with d = 1 fails") {
    const LabeledDataset thin = gen_gaussian_mixture(2, 1, 10, 3.0, 5);
    ShiftSpec spec;
    spec.rotation_angle = 0.3;
    CHECK_THROWS_AS(apply_shift(thin, spec, 0), std::invalid_argument);
  }
}

TEST_CASE("split partitions the dataset exactly") {
  const LabeledDataset data = gen_gaussian_mixture(4, 3, 100, 2.0, 77);
  SplitSpec spec;
  spec.train_fraction = 0.8;
  spec.val_fraction = 0.1;
  spec.test_fraction = 0.1;
  spec.seed = 4;
  const SplitResult parts = split(data, spec);
  CHECK(parts.train.count() == 80);
  CHECK(parts.val.count() == 10);
  CHECK(parts.test.count() == 10);

  std::multiset<double> original, recombined;
  for (Eigen::Index i = 0; i < data.count(); ++i) original.insert(data.features(i, 0));
  for (const auto* part : {&parts.train, &parts.val, &parts.test}) {
    for (Eigen::Index i = 0; i < part->count(); ++i) recombined.insert(part->features(i, 0));
  }
  CHECK(original == recombined);

  const SplitResult again = split(data, spec);
  CHECK(parts.train.features == again.train.features);

  SplitSpec other = spec;
  other.seed = 5;
  const SplitResult different = split(data, other);
  CHECK(parts.train.features != different.train.features);

  SplitSpec invalid = spec;
  invalid.train_fraction = 0.999;
  invalid.val_fraction = 0.0005;
  invalid.test_fraction = 0.0005;
  CHECK_THROWS_AS(split(data, invalid), std::invalid_argument);
}

TEST_CASE("csv round trip") {
  const LabeledDataset data = gen_gaussian_mixture(3, 4, 60, 2.5, 8);
  const std::string path = "test_dataset_roundtrip.csv";
  write_csv(data, path);
  const LabeledDataset loaded = read_csv(path, true);
  CHECK(loaded.count() == data.count());
  CHECK((loaded.features - data.features).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(loaded.targets.hard_labels() == data.targets.hard_labels());
  std::remove(path.c_str());
}
