#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nptl/datasets.hpp"
#include "nptl/models.hpp"
#include "nptl/sampler.hpp"

namespace nptl {

/// Raised on invalid or inconsistent configuration; the CLI maps it to
/// exit code 2. The message names the offending key or file.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeneratorConfig {
  int classes = 8;
  int dim = 8;
  int count = 4000;
  double separation = 6.0;
  std::uint64_t seed = 1;
};

struct DatasetConfig {
  GeneratorConfig upstream;
  GeneratorConfig downstream;    // pre-shift draw from the same family
  ShiftSpec shift;
  SplitSpec split;
  std::optional<std::string> upstream_csv;    // overrides the generator
  std::optional<std::string> downstream_csv;  // overrides the generator
};

struct ExperimentConfig {
  std::uint64_t master_seed = 7;
  int workers = 1;
  std::string out_dir = "runs/out";

  DatasetConfig dataset;
  ModelSpec model;                       // upstream model; head width adapts downstream
  int downstream_classes = 0;            // 0 = same as model.output_dim

  OptimizerConfig pretrain_opt;
  OptimizerConfig probe_opt;
  OptimizerConfig sample_opt;

  int samples = 10;
  double alpha = 1.0;
  int blocks = 10;
  bool blocked = true;
  std::vector<double> alpha_grid;        // empty = default grid
  int search_samples = 5;

  double l2sp_beta = 10.0;
  int ece_bins = 15;

  /// Hash of the canonical JSON serialization; stamped into every manifest.
  std::uint64_t hash() const;
  std::string canonical_json() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

}  // namespace nptl
