#include "nptl/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "nptl/rng.hpp"

namespace nptl {

bool ShiftSpec::is_identity() const {
  return rotation_angle == 0.0 && mean_shift.size() == 0 && !label_permutation && !class_subset;
}

void SplitSpec::validate() const {
  for (double f : {train_fraction, val_fraction, test_fraction}) {
    if (!(f > 0.0 && f < 1.0)) {
      throw std::invalid_argument("SplitSpec: fractions must lie in (0, 1)");
    }
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw std::invalid_argument("SplitSpec: fractions must sum to 1");
  }
}

LabeledDataset gen_gaussian_mixture(int k, int d, int n, double separation, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("gen_gaussian_mixture: need k >= 2");
  if (d < 1) throw std::invalid_argument("gen_gaussian_mixture: need d >= 1");
  if (n < k) throw std::invalid_argument("gen_gaussian_mixture: need n >= k");
  if (!(separation >= 0.0)) throw std::invalid_argument("gen_gaussian_mixture: separation must be >= 0");

  // Class means with adjacent distance = separation.
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, d);
  if (d == 1) {
    for (int c = 0; c < k; ++c) means(c, 0) = separation * c;
  } else {
    const double radius = separation / (2.0 * std::sin(M_PI / k));
    for (int c = 0; c < k; ++c) {
      const double angle = 2.0 * M_PI * c / k;
      means(c, 0) = radius * std::cos(angle);
      means(c, 1) = radius * std::sin(angle);
    }
  }

  Rng rng(seed);
  LabeledDataset data;
  data.features.resize(n, d);
  Eigen::VectorXi labels(n);
  const int base = n / k, extra = n % k;
  int row = 0;
  for (int c = 0; c < k; ++c) {
    const int count = base + (c < extra ? 1 : 0);
    for (int i = 0; i < count; ++i, ++row) {
      labels[row] = c;
      for (int j = 0; j < d; ++j) data.features(row, j) = means(c, j) + rng.normal();
    }
  }
  data.targets = Targets::hard(std::move(labels));
  std::ostringstream prov;
  prov << "mixture(k=" << k << ",d=" << d << ",n=" << n << ",sep=" << separation
       << ",seed=" << seed << ")";
  data.provenance = prov.str();
  return data;
}

LabeledDataset apply_shift(const LabeledDataset& data, const ShiftSpec& shift, std::uint64_t seed) {
  (void)seed;  // reserved; every current shift component is deterministic
  if (shift.is_identity()) return data;

  const int d = static_cast<int>(data.dim());
  LabeledDataset out = data;

  if (shift.rotation_angle != 0.0) {
    if (d < 2) throw std::invalid_argument("apply_shift: rotation needs feature dim >= 2");
    const double c = std::cos(shift.rotation_angle), s = std::sin(shift.rotation_angle);
    for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
      const double x0 = out.features(i, 0), x1 = out.features(i, 1);
      out.features(i, 0) = c * x0 - s * x1;
      out.features(i, 1) = s * x0 + c * x1;
    }
  }
  if (shift.mean_shift.size() != 0) {
    if (shift.mean_shift.size() != d) {
      throw std::invalid_argument("apply_shift: mean_shift dimension mismatch");
    }
    out.features.rowwise() += shift.mean_shift.transpose();
  }

  if (shift.label_permutation || shift.class_subset) {
    if (out.targets.kind() != Targets::Kind::Hard) {
      throw std::invalid_argument("apply_shift: label operations need hard labels");
    }
    Eigen::VectorXi labels = out.targets.hard_labels();
    const int k = labels.size() ? labels.maxCoeff() + 1 : 0;
    if (shift.label_permutation) {
      const auto& perm = *shift.label_permutation;
      std::vector<int> sorted = perm;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] != static_cast<int>(i)) {
          throw std::invalid_argument("apply_shift: label_permutation is not a permutation");
        }
      }
      if (static_cast<int>(perm.size()) < k) {
        throw std::invalid_argument("apply_shift: label_permutation shorter than class count");
      }
      for (Eigen::Index i = 0; i < labels.size(); ++i) labels[i] = perm[labels[i]];
    }
    if (shift.class_subset) {
      const auto& subset = *shift.class_subset;
      if (subset.empty()) throw std::invalid_argument("apply_shift: empty class subset");
      std::vector<int> remap(static_cast<std::size_t>(std::max(
                                 k, 1 + *std::max_element(subset.begin(), subset.end()))),
                             -1);
      for (std::size_t i = 0; i < subset.size(); ++i) {
        if (subset[i] < 0) throw std::invalid_argument("apply_shift: negative class in subset");
        remap[static_cast<std::size_t>(subset[i])] = static_cast<int>(i);
      }
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels[i] < static_cast<int>(remap.size()) && remap[labels[i]] >= 0) keep.push_back(i);
      }
      Eigen::MatrixXd features(static_cast<Eigen::Index>(keep.size()), out.features.cols());
      Eigen::VectorXi new_labels(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t i = 0; i < keep.size(); ++i) {
        features.row(static_cast<Eigen::Index>(i)) = out.features.row(keep[i]);
        new_labels[static_cast<Eigen::Index>(i)] = remap[labels[keep[i]]];
      }
      out.features = std::move(features);
      labels = std::move(new_labels);
    }
    out.targets = Targets::hard(std::move(labels));
  }
  out.provenance = data.provenance + "+shift";
  return out;
}

SplitResult split(const LabeledDataset& data, const SplitSpec& spec) {
  spec.validate();
  const Eigen::Index n = data.count();
  const auto n_test = static_cast<Eigen::Index>(std::llround(spec.test_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<Eigen::Index>(std::llround(spec.val_fraction * static_cast<double>(n)));
  const Eigen::Index n_train = n - n_test - n_val;
  if (n_train < 1 || n_val < 1 || n_test < 1) {
    throw std::invalid_argument("split: a split would be empty");
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = rng.next_u64() % (i + 1);
    std::swap(order[i], order[j]);
  }

  const auto take = [&](Eigen::Index begin, Eigen::Index count, const char* tag) {
    LabeledDataset part;
    part.features.resize(count, data.features.cols());
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
      idx[static_cast<std::size_t>(i)] = order[static_cast<std::size_t>(begin + i)];
      part.features.row(i) = data.features.row(idx[static_cast<std::size_t>(i)]);
    }
    part.targets = data.targets.select(idx);
    part.provenance = data.provenance + ":" + tag;
    return part;
  };

  SplitResult result;
  result.train = take(0, n_train, "train");
  result.val = take(n_train, n_val, "val");
  result.test = take(n_train + n_val, n_test, "test");
  return result;
}

void write_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_csv: cannot open " + path);
  const Eigen::Index d = data.dim();
  for (Eigen::Index j = 0; j < d; ++j) os << "f" << j << ",";
  os << "target\n";
  char buf[64];
  for (Eigen::Index i = 0; i < data.count(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features(i, j));
      os << buf << ",";
    }
    if (data.targets.kind() == Targets::Kind::Hard) {
      os << data.targets.hard_labels()[i];
    } else if (data.targets.kind() == Targets::Kind::Real) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.targets.real_values()(i, 0));
      os << buf;
    } else {
      throw std::invalid_argument("write_csv: soft targets are not persisted as CSV");
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write_csv: write failed for " + path);
}

LabeledDataset read_csv(const std::string& path, bool classification) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_csv: empty file " + path);
  const auto columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  if (columns < 2) throw std::runtime_error("read_csv: need at least one feature column");

  std::vector<double> cells;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index got = 0;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(std::strtod(cell.c_str(), nullptr));
      ++got;
    }
    if (got != columns) throw std::runtime_error("read_csv: ragged row in " + path);
    ++rows;
  }

  LabeledDataset data;
  const Eigen::Index d = columns - 1;
  data.features.resize(rows, d);
  if (classification) {
    Eigen::VectorXi labels(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) data.features(i, j) = cells[static_cast<std::size_t>(i * columns + j)];
      labels[i] = static_cast<int>(std::llround(cells[static_cast<std::size_t>(i * columns + d)]));
    }
    data.targets = Targets::hard(std::move(labels));
  } else {
    Eigen::MatrixXd values(rows, 1);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) data.features(i, j) = cells[static_cast<std::size_t>(i * columns + j)];
      values(i, 0) = cells[static_cast<std::size_t>(i * columns + d)];
    }
    data.targets = Targets::regression(std::move(values));
  }
  data.provenance = path;
  return data;
}

void write_dataset_manifest(const std::string& path, const LabeledDataset& data,
                            std::uint64_t seed, const std::string& extra_json) {
  nlohmann::json j;
  j["format"] = "nptl-dataset-manifest";
  j["version"] = 1;
  j["count"] = data.count();
  j["dim"] = data.dim();
  j["seed"] = seed;
  j["provenance"] = data.provenance;
  j["extra"] = nlohmann::json::parse(extra_json);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_dataset_manifest: cannot open " + path);
  os << j.dump(2) << "\n";
}

}  // namespace nptl
