#include "nptl/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace nptl {

namespace {

using nlohmann::json;

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config: missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + key + "' has the wrong type");
  }
}

template <typename T>
T value_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + key + "' has the wrong type");
  }
}

OptimizerConfig parse_optimizer(const json& j, const std::string& section) {
  OptimizerConfig opt;
  opt.base_lr = value_or(j, "base_lr", opt.base_lr);
  const std::string schedule = value_or<std::string>(j, "schedule", "cosine");
  if (schedule == "cosine") {
    opt.schedule = Schedule::Cosine;
  } else if (schedule == "constant") {
    opt.schedule = Schedule::Constant;
  } else {
    throw ConfigError("config: " + section + ".schedule must be 'cosine' or 'constant'");
  }
  opt.momentum = value_or(j, "momentum", opt.momentum);
  opt.batch_size = value_or(j, "batch_size", opt.batch_size);
  opt.epochs = value_or(j, "epochs", opt.epochs);
  opt.seed = value_or<std::uint64_t>(j, "seed", opt.seed);
  try {
    opt.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: " + section + ": " + e.what());
  }
  return opt;
}

GeneratorConfig parse_generator(const json& j, const std::string& section) {
  GeneratorConfig g;
  g.classes = value_or(j, "classes", g.classes);
  g.dim = value_or(j, "dim", g.dim);
  g.count = value_or(j, "count", g.count);
  g.separation = value_or(j, "separation", g.separation);
  g.seed = value_or<std::uint64_t>(j, "seed", g.seed);
  if (g.classes < 2 || g.dim < 1 || g.count < g.classes) {
    throw ConfigError("config: " + section + " has invalid mixture parameters");
  }
  return g;
}

json optimizer_to_json(const OptimizerConfig& opt) {
  return {{"base_lr", opt.base_lr},
          {"schedule", opt.schedule == Schedule::Cosine ? "cosine" : "constant"},
          {"momentum", opt.momentum},
          {"batch_size", opt.batch_size},
          {"epochs", opt.epochs},
          {"seed", opt.seed}};
}

json generator_to_json(const GeneratorConfig& g) {
  return {{"classes", g.classes}, {"dim", g.dim}, {"count", g.count},
          {"separation", g.separation}, {"seed", g.seed}};
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  cfg.master_seed = value_or<std::uint64_t>(j, "master_seed", cfg.master_seed);
  cfg.workers = value_or(j, "workers", cfg.workers);
  cfg.out_dir = value_or<std::string>(j, "out", cfg.out_dir);
  if (cfg.workers < 1) throw ConfigError("config: workers must be >= 1");

  if (!j.contains("dataset")) throw ConfigError("config: missing key 'dataset'");
  const json& ds = j.at("dataset");
  cfg.dataset.upstream = parse_generator(value_or(ds, "upstream", json::object()), "dataset.upstream");
  cfg.dataset.downstream =
      parse_generator(value_or(ds, "downstream", json::object()), "dataset.downstream");
  if (ds.contains("upstream_csv")) cfg.dataset.upstream_csv = ds.at("upstream_csv").get<std::string>();
  if (ds.contains("downstream_csv")) {
    cfg.dataset.downstream_csv = ds.at("downstream_csv").get<std::string>();
  }
  if (ds.contains("shift")) {
    const json& sh = ds.at("shift");
    cfg.dataset.shift.rotation_angle = value_or(sh, "rotation_angle", 0.0);
    if (sh.contains("mean_shift")) {
      const auto v = sh.at("mean_shift").get<std::vector<double>>();
      cfg.dataset.shift.mean_shift =
          Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (sh.contains("label_permutation")) {
      cfg.dataset.shift.label_permutation = sh.at("label_permutation").get<std::vector<int>>();
    }
    if (sh.contains("class_subset")) {
      cfg.dataset.shift.class_subset = sh.at("class_subset").get<std::vector<int>>();
    }
  }
  if (ds.contains("split")) {
    const json& sp = ds.at("split");
    cfg.dataset.split.train_fraction = value_or(sp, "train", cfg.dataset.split.train_fraction);
    cfg.dataset.split.val_fraction = value_or(sp, "val", cfg.dataset.split.val_fraction);
    cfg.dataset.split.test_fraction = value_or(sp, "test", cfg.dataset.split.test_fraction);
    cfg.dataset.split.seed = value_or<std::uint64_t>(sp, "seed", cfg.dataset.split.seed);
    try {
      cfg.dataset.split.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: dataset.split: ") + e.what());
    }
  }

  if (!j.contains("model")) throw ConfigError("config: missing key 'model'");
  const json& mj = j.at("model");
  try {
    cfg.model.architecture = architecture_from_string(require<std::string>(mj, "architecture"));
    cfg.model.input_dim = require<int>(mj, "input_dim");
    cfg.model.output_dim = require<int>(mj, "output_dim");
    cfg.model.hidden_sizes = value_or(mj, "hidden_sizes", std::vector<int>{});
    cfg.model.activation = activation_from_string(value_or<std::string>(mj, "activation", "relu"));
    cfg.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: model: ") + e.what());
  }
  cfg.downstream_classes = value_or(j, "downstream_classes", 0);

  cfg.pretrain_opt = parse_optimizer(value_or(j, "pretrain_opt", json::object()), "pretrain_opt");
  cfg.probe_opt = parse_optimizer(value_or(j, "probe_opt", json::object()), "probe_opt");
  cfg.sample_opt = parse_optimizer(value_or(j, "sample_opt", json::object()), "sample_opt");

  if (j.contains("sampler")) {
    const json& sj = j.at("sampler");
    cfg.samples = value_or(sj, "samples", cfg.samples);
    cfg.alpha = value_or(sj, "alpha", cfg.alpha);
    cfg.blocks = value_or(sj, "blocks", cfg.blocks);
    cfg.blocked = value_or(sj, "blocked", cfg.blocked);
    cfg.alpha_grid = value_or(sj, "alpha_grid", cfg.alpha_grid);
    cfg.search_samples = value_or(sj, "search_samples", cfg.search_samples);
  }
  if (cfg.samples < 1) throw ConfigError("config: sampler.samples must be >= 1");
  if (cfg.blocked && cfg.blocks < 1) throw ConfigError("config: sampler.blocks must be >= 1");
  if (!(cfg.alpha >= 0.0)) throw ConfigError("config: sampler.alpha must be >= 0");
  for (double a : cfg.alpha_grid) {
    if (a < 0.0) throw ConfigError("config: sampler.alpha_grid has a negative entry");
  }

  if (j.contains("eval")) cfg.ece_bins = value_or(j.at("eval"), "ece_bins", cfg.ece_bins);
  if (cfg.ece_bins < 1) throw ConfigError("config: eval.ece_bins must be >= 1");
  if (j.contains("l2sp")) cfg.l2sp_beta = value_or(j.at("l2sp"), "beta", cfg.l2sp_beta);
  if (!(cfg.l2sp_beta > 0.0)) throw ConfigError("config: l2sp.beta must be positive");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open file '" + path + "'");
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return config_from_json_text(buffer.str());
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["master_seed"] = master_seed;
  j["workers"] = workers;
  j["out"] = out_dir;
  j["dataset"] = {{"upstream", generator_to_json(dataset.upstream)},
                  {"downstream", generator_to_json(dataset.downstream)},
                  {"split",
                   {{"train", dataset.split.train_fraction},
                    {"val", dataset.split.val_fraction},
                    {"test", dataset.split.test_fraction},
                    {"seed", dataset.split.seed}}}};
  json shift;
  shift["rotation_angle"] = dataset.shift.rotation_angle;
  if (dataset.shift.mean_shift.size() != 0) {
    shift["mean_shift"] = std::vector<double>(
        dataset.shift.mean_shift.data(),
        dataset.shift.mean_shift.data() + dataset.shift.mean_shift.size());
  }
  if (dataset.shift.label_permutation) shift["label_permutation"] = *dataset.shift.label_permutation;
  if (dataset.shift.class_subset) shift["class_subset"] = *dataset.shift.class_subset;
  j["dataset"]["shift"] = shift;
  if (dataset.upstream_csv) j["dataset"]["upstream_csv"] = *dataset.upstream_csv;
  if (dataset.downstream_csv) j["dataset"]["downstream_csv"] = *dataset.downstream_csv;
  j["model"] = {{"architecture", to_string(model.architecture)},
                {"input_dim", model.input_dim},
                {"output_dim", model.output_dim},
                {"hidden_sizes", model.hidden_sizes},
                {"activation", to_string(model.activation)}};
  j["downstream_classes"] = downstream_classes;
  j["pretrain_opt"] = optimizer_to_json(pretrain_opt);
  j["probe_opt"] = optimizer_to_json(probe_opt);
  j["sample_opt"] = optimizer_to_json(sample_opt);
  j["sampler"] = {{"samples", samples},   {"alpha", alpha},
                  {"blocks", blocks},     {"blocked", blocked},
                  {"alpha_grid", alpha_grid}, {"search_samples", search_samples}};
  j["eval"] = {{"ece_bins", ece_bins}};
  j["l2sp"] = {{"beta", l2sp_beta}};
  return j.dump();  // nlohmann objects iterate in sorted key order
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : canonical_json()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace nptl
