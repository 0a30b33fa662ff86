#include <CLI11.hpp>
#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "nptl/config.hpp"
#include "nptl/datasets.hpp"
#include "nptl/diagnostics.hpp"
#include "nptl/inference.hpp"
#include "nptl/models.hpp"
#include "nptl/rng.hpp"
#include "nptl/sampler.hpp"
#include "nptl/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nptl;

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

ExperimentConfig resolved_config(const CliOptions& cli) {
  ExperimentConfig cfg = load_config(cli.config_path);
  if (cli.seed) cfg.master_seed = *cli.seed;
  if (cli.workers) cfg.workers = *cli.workers;
  if (cli.out) cfg.out_dir = *cli.out;
  return cfg;
}

ModelSpec downstream_spec(const ExperimentConfig& cfg) {
  ModelSpec spec = cfg.model;
  if (cfg.downstream_classes > 0) {
    spec.output_dim = cfg.downstream_classes;
  } else if (cfg.dataset.shift.class_subset) {
    spec.output_dim = static_cast<int>(cfg.dataset.shift.class_subset->size());
  }
  return spec;
}

void write_manifest(const fs::path& path, json j, const ExperimentConfig& cfg) {
  j["config_hash"] = cfg.hash();
  j["master_seed"] = cfg.master_seed;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest " + path.string());
  os << j.dump(2) << "\n";
}

/// Per the run contract every subcommand leaves one row in results.csv;
/// stages without metrics leave the metric cells empty.
void append_stage_row(const ExperimentConfig& cfg, const std::string& subcommand) {
  const fs::path path = fs::path(cfg.out_dir) / "results.csv";
  const bool fresh = !fs::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  if (fresh) os << "subcommand,method,dataset,seed,config_hash,member_count,acc,nll,ece\n";
  os << subcommand << ",,," << cfg.master_seed << ',' << cfg.hash() << ",,,,\n";
}

LabeledDataset load_split_csv(const ExperimentConfig& cfg, const std::string& name) {
  const fs::path path = fs::path(cfg.out_dir) / (name + ".csv");
  if (!fs::exists(path)) {
    throw ConfigError("missing dataset file '" + path.string() + "' (run gen-data first)");
  }
  return read_csv(path.string(), /*classification=*/true);
}

ParamVector load_stage_params(const ModelSpec& spec, const fs::path& path) {
  if (!fs::exists(path)) {
    throw ConfigError("missing parameter file '" + path.string() + "'");
  }
  try {
    return load_params(spec, path.string());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

int run_gen_data(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const auto& ds = cfg.dataset;

  LabeledDataset upstream =
      ds.upstream_csv ? read_csv(*ds.upstream_csv, true)
                      : gen_gaussian_mixture(ds.upstream.classes, ds.upstream.dim,
                                             ds.upstream.count, ds.upstream.separation,
                                             ds.upstream.seed);
  LabeledDataset downstream_raw =
      ds.downstream_csv ? read_csv(*ds.downstream_csv, true)
                        : gen_gaussian_mixture(ds.downstream.classes, ds.downstream.dim,
                                               ds.downstream.count, ds.downstream.separation,
                                               ds.downstream.seed);
  LabeledDataset downstream = apply_shift(downstream_raw, ds.shift, ds.downstream.seed);
  SplitResult splits = split(downstream, ds.split);

  write_csv(upstream, (fs::path(cfg.out_dir) / "upstream_train.csv").string());
  write_csv(splits.train, (fs::path(cfg.out_dir) / "downstream_train.csv").string());
  write_csv(splits.val, (fs::path(cfg.out_dir) / "downstream_val.csv").string());
  write_csv(splits.test, (fs::path(cfg.out_dir) / "downstream_test.csv").string());

  json j;
  j["format"] = "nptl-stage-manifest";
  j["stage"] = "gen-data";
  j["files"] = {"upstream_train.csv", "downstream_train.csv", "downstream_val.csv",
                "downstream_test.csv"};
  j["upstream_count"] = upstream.count();
  j["downstream_counts"] = {splits.train.count(), splits.val.count(), splits.test.count()};
  write_manifest(fs::path(cfg.out_dir) / "dataset_manifest.json", j, cfg);
  append_stage_row(cfg, "gen-data");
  std::cout << "gen-data: upstream " << upstream.count() << " rows, downstream "
            << splits.train.count() << "/" << splits.val.count() << "/" << splits.test.count()
            << " train/val/test\n";
  return 0;
}

int run_pretrain(const ExperimentConfig& cfg) {
  const fs::path up_csv = fs::path(cfg.out_dir) / "upstream_train.csv";
  if (!fs::exists(up_csv)) {
    throw ConfigError("missing dataset file '" + up_csv.string() + "' (run gen-data first)");
  }
  LabeledDataset upstream = read_csv(up_csv.string(), true);
  OptimizerConfig opt = cfg.pretrain_opt;
  opt.seed = derive_seed(cfg.master_seed, "pretrain");

  TrainStats stats;
  const ParamVector theta_up = pretrain(cfg.model, upstream, opt, &stats);
  save_params(theta_up, cfg.model, (fs::path(cfg.out_dir) / "pretrained.params").string());

  json j;
  j["format"] = "nptl-stage-manifest";
  j["stage"] = "pretrain";
  j["files"] = {"pretrained.params"};
  j["model_hash"] = cfg.model.hash();
  j["final_objective"] = stats.best_objective;
  j["steps"] = stats.steps;
  write_manifest(fs::path(cfg.out_dir) / "pretrain_manifest.json", j, cfg);
  append_stage_row(cfg, "pretrain");
  std::cout << "pretrain: objective " << stats.best_objective << " after " << stats.steps
            << " steps\n";
  return 0;
}

int run_probe(const ExperimentConfig& cfg) {
  const ParamVector theta_up =
      load_stage_params(cfg.model, fs::path(cfg.out_dir) / "pretrained.params");
  LabeledDataset train = load_split_csv(cfg, "downstream_train");
  const ModelSpec spec_down = downstream_spec(cfg);

  OptimizerConfig opt = cfg.probe_opt;
  opt.seed = derive_seed(cfg.master_seed, "probe");
  TrainStats stats;
  const ParamVector probed = linear_probe(cfg.model, theta_up, spec_down, train, opt, &stats);
  save_params(probed, spec_down, (fs::path(cfg.out_dir) / "probed.params").string());

  json j;
  j["format"] = "nptl-stage-manifest";
  j["stage"] = "probe";
  j["files"] = {"probed.params"};
  j["model_hash"] = spec_down.hash();
  j["final_objective"] = stats.best_objective;
  write_manifest(fs::path(cfg.out_dir) / "probe_manifest.json", j, cfg);
  append_stage_row(cfg, "probe");
  std::cout << "probe: objective " << stats.best_objective << "\n";
  return 0;
}

SamplerConfig sampler_config(const ExperimentConfig& cfg) {
  SamplerConfig sc;
  sc.samples = cfg.samples;
  sc.alpha = cfg.alpha;
  sc.blocks = cfg.blocks;
  sc.blocked = cfg.blocked;
  sc.opt = cfg.sample_opt;
  sc.master_seed = cfg.master_seed;
  sc.workers = cfg.workers;
  return sc;
}

int run_sample(const ExperimentConfig& cfg, const std::string& method, bool use_sweep) {
  const ModelSpec spec_down = downstream_spec(cfg);
  const ParamVector probed =
      load_stage_params(spec_down, fs::path(cfg.out_dir) / "probed.params");
  LabeledDataset train = load_split_csv(cfg, "downstream_train");

  SamplerConfig sc = sampler_config(cfg);
  if (use_sweep) {
    const fs::path sweep = fs::path(cfg.out_dir) / "sweep_manifest.json";
    if (!fs::exists(sweep)) {
      throw ConfigError("missing '" + sweep.string() + "' (run sweep-alpha first)");
    }
    std::ifstream is(sweep);
    json j;
    is >> j;
    sc.alpha = j.at("chosen_alpha").get<double>();
  }

  PosteriorEnsemble ensemble;
  std::string dir_name;
  if (method == "nptl") {
    const PseudoDataset pseudo = make_base_measure(spec_down, probed, train.features);
    ensemble = nptl_sample(spec_down, sc, probed, train, pseudo);
    dir_name = "nptl";
  } else if (method == "ensemble-l2sp") {
    OptimizerConfig opt = cfg.sample_opt;
    ensemble = ensemble_baseline(spec_down, sc.samples, probed, train, opt, cfg.master_seed,
                                 cfg.workers, &probed, cfg.l2sp_beta);
    dir_name = "ensemble-l2sp";
  } else if (method == "finetune") {
    OptimizerConfig opt = cfg.sample_opt;
    ensemble = ensemble_baseline(spec_down, 1, probed, train, opt, cfg.master_seed, 1, &probed,
                                 cfg.l2sp_beta);
    dir_name = "finetune";
  } else {
    throw ConfigError("sample: unknown method '" + method + "'");
  }

  long underflows = 0;
  for (const auto& r : ensemble.records) underflows += r.pseudo_underflow_count;
  if (underflows > 0) {
    std::cerr << "warning: " << underflows
              << " pseudo-weight gamma draws underflowed to zero (alpha/n is very small); "
                 "consider blocked draws\n";
  }
  for (const auto& r : ensemble.records) {
    if (r.diverged) {
      std::cerr << "warning: member " << r.index << " diverged at step " << r.diverged_step
                << " and is excluded from averaging\n";
    }
  }

  save_ensemble(ensemble, sc, (fs::path(cfg.out_dir) / dir_name).string(), method, cfg.hash());
  append_stage_row(cfg, "sample");
  std::cout << "sample: method " << method << ", " << ensemble.surviving_count() << "/"
            << ensemble.members.size() << " members, alpha " << sc.alpha << "\n";
  return 0;
}

PosteriorEnsemble load_checked_ensemble(const ExperimentConfig& cfg, const std::string& dir) {
  try {
    PosteriorEnsemble ensemble = load_ensemble(dir);
    if (ensemble.spec.hash() != downstream_spec(cfg).hash()) {
      throw ConfigError("ensemble in '" + dir + "' was built for a different model spec");
    }
    return ensemble;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

json manifest_of(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  json j;
  if (is) is >> j;
  return j;
}

int run_evaluate(const ExperimentConfig& cfg, const std::string& ensemble_dir,
                 const std::string& split_name) {
  const std::string dir =
      ensemble_dir.empty() ? (fs::path(cfg.out_dir) / "nptl").string() : ensemble_dir;
  PosteriorEnsemble ensemble = load_checked_ensemble(cfg, dir);
  LabeledDataset eval_set = load_split_csv(cfg, "downstream_" + split_name);

  const Eigen::MatrixXd probs = bma_predict(ensemble, eval_set.features);
  EvalReport report;
  report.method = manifest_of(dir).value("method", "nptl");
  report.dataset = "downstream-" + split_name;
  report.acc = metric_acc(probs, eval_set.targets.hard_labels());
  report.nll = metric_nll(probs, eval_set.targets.hard_labels());
  report.ece = metric_ece(probs, eval_set.targets.hard_labels(), cfg.ece_bins);
  report.member_count = static_cast<int>(ensemble.surviving_count());
  report.seed = cfg.master_seed;
  append_result_row((fs::path(cfg.out_dir) / "results.csv").string(), report, "evaluate",
                    cfg.hash());
  std::cout << "evaluate: " << report.method << " on " << report.dataset << " acc " << report.acc
            << " nll " << report.nll << " ece " << report.ece << "\n";
  return 0;
}

int run_soup(const ExperimentConfig& cfg, const std::string& ensemble_dir,
             const std::string& metric_name) {
  const std::string dir =
      ensemble_dir.empty() ? (fs::path(cfg.out_dir) / "nptl").string() : ensemble_dir;
  PosteriorEnsemble ensemble = load_checked_ensemble(cfg, dir);
  LabeledDataset val = load_split_csv(cfg, "downstream_val");
  LabeledDataset test = load_split_csv(cfg, "downstream_test");

  const SoupMetric metric = metric_name == "acc" ? SoupMetric::ValAcc : SoupMetric::ValNll;
  const SoupResult soup =
      greedy_soup(ensemble, val.features, val.targets.hard_labels(), metric);
  save_params(soup.params, ensemble.spec, (fs::path(cfg.out_dir) / "soup.params").string());

  {
    std::ofstream os(fs::path(cfg.out_dir) / "soup_trajectory.csv", std::ios::trunc);
    os << "step,val_metric\n";
    for (std::size_t i = 0; i < soup.trajectory.size(); ++i) {
      os << i << ',' << soup.trajectory[i] << "\n";
    }
  }

  const Eigen::MatrixXd probs = predict(ensemble.spec, soup.params, test.features);
  EvalReport report;
  report.method = "nptl-soup";
  report.dataset = "downstream-test";
  report.acc = metric_acc(probs, test.targets.hard_labels());
  report.nll = metric_nll(probs, test.targets.hard_labels());
  report.ece = metric_ece(probs, test.targets.hard_labels(), cfg.ece_bins);
  report.member_count = static_cast<int>(soup.accepted.size());
  report.seed = cfg.master_seed;
  append_result_row((fs::path(cfg.out_dir) / "results.csv").string(), report, "soup", cfg.hash());

  json j;
  j["format"] = "nptl-stage-manifest";
  j["stage"] = "soup";
  j["files"] = {"soup.params", "soup_trajectory.csv"};
  j["accepted"] = soup.accepted;
  write_manifest(fs::path(cfg.out_dir) / "soup_manifest.json", j, cfg);
  std::cout << "soup: accepted " << soup.accepted.size() << " members, test nll " << report.nll
            << "\n";
  return 0;
}

int run_sweep_alpha(const ExperimentConfig& cfg) {
  const ModelSpec spec_down = downstream_spec(cfg);
  const ParamVector probed =
      load_stage_params(spec_down, fs::path(cfg.out_dir) / "probed.params");
  LabeledDataset train = load_split_csv(cfg, "downstream_train");
  LabeledDataset val = load_split_csv(cfg, "downstream_val");

  const PseudoDataset pseudo = make_base_measure(spec_down, probed, train.features);
  const std::vector<double> grid = cfg.alpha_grid.empty()
                                       ? default_alpha_grid(static_cast<int>(train.count()))
                                       : cfg.alpha_grid;
  const AlphaSelection selection = select_alpha(grid, spec_down, probed, train, pseudo,
                                                sampler_config(cfg), cfg.search_samples, val);

  {
    std::ofstream os(fs::path(cfg.out_dir) / "alpha_sweep.csv", std::ios::trunc);
    os << "alpha,val_nll\n";
    for (const auto& row : selection.table) os << row.alpha << ',' << row.val_nll << "\n";
  }
  json j;
  j["format"] = "nptl-stage-manifest";
  j["stage"] = "sweep-alpha";
  j["files"] = {"alpha_sweep.csv"};
  j["chosen_alpha"] = selection.chosen_alpha;
  write_manifest(fs::path(cfg.out_dir) / "sweep_manifest.json", j, cfg);
  append_stage_row(cfg, "sweep-alpha");
  std::cout << "sweep-alpha: chose alpha " << selection.chosen_alpha << "\n";
  return 0;
}

int run_diagnose(const ExperimentConfig& cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / "diagnostics";
  fs::create_directories(dir);
  json summary = json::array();
  std::ofstream csv(dir / "diagnostics_summary.csv", std::ios::trunc);
  csv << "check,statistic,p_value,pass\n";

  {
    // Weight-draw contracts on a representative configuration.
    Rng rng(derive_seed(cfg.master_seed, "diagnose-weights"));
    const DirichletSpec spec{200, 10, 1.0};
    const BlockMapping mapping = make_block_mapping(spec.n, spec.L, rng);
    const WeightDraw draw = draw_weights_blocked(spec, mapping, rng);
    const double total = draw.w.sum() + draw.w_tilde.sum();
    const bool sum_ok = std::abs(total - 2.0 * spec.n) <= 1e-9 * 2.0 * spec.n;
    summary.push_back({{"check", "weight-sum"}, {"value", total}, {"pass", sum_ok}});
    csv << "weight-sum," << total << ",,"  << (sum_ok ? 1 : 0) << "\n";
  }
  {
    const VnBoundReport vn =
        vn_bound_check(200, 200, 200, 1.0, 20000, derive_seed(cfg.master_seed, "diagnose-vn"));
    summary.push_back({{"check", "vn-bound"},
                       {"empirical_mean", vn.empirical_mean},
                       {"bound", vn.bound},
                       {"pass", vn.within_bound}});
    csv << "vn-bound," << vn.empirical_mean << ",," << (vn.within_bound ? 1 : 0) << "\n";
  }
  {
    Rng data_rng(derive_seed(cfg.master_seed, "diagnose-data"));
    Eigen::VectorXd x(200), y(200);
    for (int i = 0; i < 200; ++i) {
      x[i] = -std::log(data_rng.uniform());
      y[i] = x[i] + 3.0;
    }
    const auto reports = blocked_vs_nonblocked_test(
        x, y, 200, 1.0, 2000, {{"identity", [](double v) { return v; }}},
        derive_seed(cfg.master_seed, "diagnose-ks"), 300);
    for (const auto& r : reports) {
      const bool pass = r.p_value > 0.01;
      summary.push_back({{"check", "blocked-vs-nonblocked(L=n)"},
                         {"ks", r.statistic},
                         {"p_value", r.p_value},
                         {"pass", pass}});
      csv << "blocked-vs-nonblocked," << r.statistic << ',' << r.p_value << ',' << (pass ? 1 : 0)
          << "\n";
    }
  }
  {
    const CovarianceReport hetero =
        sandwich_check(2000, 2000, derive_seed(cfg.master_seed, "diagnose-sandwich"), true);
    const bool pass = hetero.npl_vs_sandwich < hetero.npl_vs_parametric;
    summary.push_back({{"check", "sandwich-hetero"},
                       {"npl_vs_sandwich", hetero.npl_vs_sandwich},
                       {"npl_vs_parametric", hetero.npl_vs_parametric},
                       {"pass", pass}});
    csv << "sandwich-hetero," << hetero.npl_vs_sandwich << ",," << (pass ? 1 : 0) << "\n";
  }

  std::ofstream os(dir / "diagnostics.json", std::ios::trunc);
  os << summary.dump(2) << "\n";
  append_stage_row(cfg, "diagnose");
  std::cout << "diagnose: " << summary.size() << " checks written to " << dir.string() << "\n";
  return 0;
}

struct Aggregate {
  std::vector<double> acc, nll, ece;
};

int run_report(const ExperimentConfig& cfg) {
  const fs::path results = fs::path(cfg.out_dir) / "results.csv";
  if (!fs::exists(results)) throw ConfigError("no results at '" + results.string() + "'");
  std::ifstream is(results);
  std::string line;
  std::getline(is, line);  // header
  std::map<std::pair<std::string, std::string>, Aggregate> groups;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 9) cells.emplace_back();
    if (cells[1].empty() || cells[6].empty()) continue;  // stage row without metrics
    Aggregate& agg = groups[{cells[1], cells[2]}];
    agg.acc.push_back(std::strtod(cells[6].c_str(), nullptr));
    agg.nll.push_back(std::strtod(cells[7].c_str(), nullptr));
    agg.ece.push_back(std::strtod(cells[8].c_str(), nullptr));
  }
  if (groups.empty()) throw ConfigError("results.csv contains no metric rows");

  const auto stats = [](const std::vector<double>& v) {
    const SampleMoments m = sample_moments(v);
    return std::pair<double, double>(m.mean, v.size() > 1 ? std::sqrt(m.variance) : 0.0);
  };

  const fs::path out = fs::path(cfg.out_dir) / "report_summary.csv";
  std::ofstream os(out, std::ios::trunc);
  os << "method,dataset,runs,acc_mean,acc_std,nll_mean,nll_std,ece_mean,ece_std\n";
  for (const auto& [key, agg] : groups) {
    const auto [am, as] = stats(agg.acc);
    const auto [nm, ns] = stats(agg.nll);
    const auto [em, es] = stats(agg.ece);
    os << key.first << ',' << key.second << ',' << agg.acc.size() << ',' << am << ',' << as << ','
       << nm << ',' << ns << ',' << em << ',' << es << "\n";
    std::cout << key.first << " @ " << key.second << ": acc " << am << " +- " << as << ", nll "
              << nm << " +- " << ns << ", ece " << em << " +- " << es << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-Dirichlet posterior bootstrap over neural-network parameters "
               "with transfer-learned base measures"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  CliOptions cli;
  app.add_option("--config", cli.config_path, "Path to the experiment JSON config")
      ->required();
  std::uint64_t seed_value = 0;
  int workers_value = 0;
  std::string out_value;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the master seed");
  auto* workers_opt = app.add_option("--workers", workers_value, "Override the worker count");
  auto* out_opt = app.add_option("--out", out_value, "Override the output directory");

  auto* gen = app.add_subcommand("gen-data", "Generate or ingest datasets and splits");
  auto* pre = app.add_subcommand("pretrain", "Train the upstream model from scratch");
  auto* probe = app.add_subcommand("probe", "Linear-probe the downstream head");

  auto* sample = app.add_subcommand("sample", "Draw posterior samples / run baselines");
  std::string method = "nptl";
  int samples_override = 0;
  double alpha_override = -1.0;
  int blocks_override = -1;
  bool use_sweep = false;
  sample->add_option("--method", method, "nptl | ensemble-l2sp | finetune");
  sample->add_option("--samples", samples_override, "Override the sample count M");
  sample->add_option("--alpha", alpha_override, "Override the prior strength alpha");
  sample->add_option("--blocks", blocks_override, "Override the block count L (0 = non-blocked)");
  sample->add_flag("--use-sweep", use_sweep, "Use the alpha chosen by sweep-alpha");

  auto* evaluate = app.add_subcommand("evaluate", "Model-averaged metrics for an ensemble");
  std::string ensemble_dir;
  std::string split_name = "test";
  evaluate->add_option("--ensemble", ensemble_dir, "Ensemble directory (default <out>/nptl)");
  evaluate->add_option("--split", split_name, "val | test");

  auto* soup = app.add_subcommand("soup", "Greedy weight averaging of an ensemble");
  std::string soup_dir;
  std::string soup_metric = "nll";
  soup->add_option("--ensemble", soup_dir, "Ensemble directory (default <out>/nptl)");
  soup->add_option("--metric", soup_metric, "nll | acc");

  auto* sweep = app.add_subcommand("sweep-alpha", "Validation-NLL selection of alpha");
  auto* diagnose = app.add_subcommand("diagnose", "Distributional and robustness checks");
  auto* report = app.add_subcommand("report", "Aggregate results.csv into a summary table");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) cli.seed = seed_value;
  if (*workers_opt) cli.workers = workers_value;
  if (*out_opt) cli.out = out_value;

  try {
    ExperimentConfig cfg = resolved_config(cli);
    if (sample->parsed()) {
      if (samples_override > 0) cfg.samples = samples_override;
      if (alpha_override >= 0.0) cfg.alpha = alpha_override;
      if (blocks_override == 0) {
        cfg.blocked = false;
      } else if (blocks_override > 0) {
        cfg.blocked = true;
        cfg.blocks = blocks_override;
      }
    }

    if (gen->parsed()) return run_gen_data(cfg);
    if (pre->parsed()) return run_pretrain(cfg);
    if (probe->parsed()) return run_probe(cfg);
    if (sample->parsed()) return run_sample(cfg, method, use_sweep);
    if (evaluate->parsed()) return run_evaluate(cfg, ensemble_dir, split_name);
    if (soup->parsed()) return run_soup(cfg, soup_dir, soup_metric);
    if (sweep->parsed()) return run_sweep_alpha(cfg);
    if (diagnose->parsed()) return run_diagnose(cfg);
    if (report->parsed()) return run_report(cfg);
    return 2;
  } catch (const AllMembersDivergedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
