#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "nptl/models.hpp"

namespace nptl {

struct LabeledDataset {
  Eigen::MatrixXd features;  // rows = examples
  Targets targets = Targets::hard(Eigen::VectorXi());
  std::string provenance;

  Eigen::Index count() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// Desk-scale distribution shift: rotate features in the plane of the first
/// two coordinates, translate, then optionally permute labels and restrict to
/// a class subset (relabelled to 0..k'-1 in subset order, row order kept).
struct ShiftSpec {
  double rotation_angle = 0.0;
  Eigen::VectorXd mean_shift;               // empty = none
  std::optional<std::vector<int>> label_permutation;
  std::optional<std::vector<int>> class_subset;

  bool is_identity() const;
};

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitResult {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

/// Balanced k-class Gaussian mixture: class means spaced `separation` apart
/// (on a circle in the first two coordinates for d >= 2, on a line for d = 1)
/// with unit isotropic noise. Deterministic per seed.
LabeledDataset gen_gaussian_mixture(int k, int d, int n, double separation, std::uint64_t seed);

LabeledDataset apply_shift(const LabeledDataset& data, const ShiftSpec& shift, std::uint64_t seed);

SplitResult split(const LabeledDataset& data, const SplitSpec& spec);

/// CSV with a header row; features in the leading columns, target last.
void write_csv(const LabeledDataset& data, const std::string& path);
LabeledDataset read_csv(const std::string& path, bool classification);

/// JSON sidecar describing how a dataset was produced.
void write_dataset_manifest(const std::string& path, const LabeledDataset& data,
                            std::uint64_t seed, const std::string& extra_json = "{}");

}  // namespace nptl
