#include "nptl/inference.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace nptl {

namespace {

void check_metric_args(const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels) {
  if (probs.rows() != labels.size()) {
    throw std::invalid_argument("metric: probability rows and labels differ in length");
  }
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= probs.cols()) {
      throw std::invalid_argument("metric: label out of range");
    }
  }
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("metric: probability row does not sum to 1");
    }
  }
}

Eigen::Index argmax_lowest(const Eigen::MatrixXd& probs, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < probs.cols(); ++j) {
    if (probs(row, j) > probs(row, best)) best = j;
  }
  return best;
}

}  // namespace

Eigen::MatrixXd mean_probability_rows(const std::vector<Eigen::MatrixXd>& member_rows) {
  if (member_rows.empty()) throw std::invalid_argument("mean_probability_rows: no members");
  Eigen::MatrixXd sum = member_rows.front();
  for (std::size_t m = 1; m < member_rows.size(); ++m) {
    if (member_rows[m].rows() != sum.rows() || member_rows[m].cols() != sum.cols()) {
      throw std::invalid_argument("mean_probability_rows: member shapes differ");
    }
    sum += member_rows[m];
  }
  return sum / static_cast<double>(member_rows.size());
}

Eigen::MatrixXd bma_predict(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& inputs) {
  const std::vector<int> alive = ensemble.surviving_indices();
  if (alive.empty()) throw AllMembersDivergedError();
  for (const ParamVector& member : ensemble.members) {
    if (member.size() != ensemble.spec.param_count()) {
      throw std::invalid_argument("bma_predict: member does not match ensemble spec");
    }
  }
  Eigen::MatrixXd sum;
  for (int idx : alive) {
    Eigen::MatrixXd p = predict(ensemble.spec, ensemble.members[static_cast<std::size_t>(idx)], inputs);
    if (sum.size() == 0) {
      sum = std::move(p);
    } else {
      sum += p;
    }
  }
  return sum / static_cast<double>(alive.size());
}

double metric_nll(const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels) {
  check_metric_args(probs, labels);
  if (labels.size() == 0) throw std::invalid_argument("metric_nll: empty batch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    total += -std::log(std::max(probs(i, labels[i]), 1e-12));
  }
  return total / static_cast<double>(labels.size());
}

double metric_acc(const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels) {
  check_metric_args(probs, labels);
  if (labels.size() == 0) throw std::invalid_argument("metric_acc: empty batch");
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (argmax_lowest(probs, i) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double metric_ece(const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels, int bins) {
  check_metric_args(probs, labels);
  if (bins < 1) throw std::invalid_argument("metric_ece: bins must be >= 1");
  if (labels.size() == 0) throw std::invalid_argument("metric_ece: empty batch");

  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> acc_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<long> counts(static_cast<std::size_t>(bins), 0);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const Eigen::Index pred = argmax_lowest(probs, i);
    const double conf = probs(i, pred);
    const int b = std::min(static_cast<int>(conf * bins), bins - 1);
    conf_sum[static_cast<std::size_t>(b)] += conf;
    acc_sum[static_cast<std::size_t>(b)] += (pred == labels[i]) ? 1.0 : 0.0;
    ++counts[static_cast<std::size_t>(b)];
  }
  const double total = static_cast<double>(labels.size());
  double ece = 0.0;
  for (int b = 0; b < bins; ++b) {
    const auto idx = static_cast<std::size_t>(b);
    if (counts[idx] == 0) continue;
    const double weight = static_cast<double>(counts[idx]) / total;
    ece += weight * std::abs(acc_sum[idx] / counts[idx] - conf_sum[idx] / counts[idx]);
  }
  return ece;
}

namespace {

// Uniform average around a base point; identical inputs average to the base
// bit-for-bit.
ParamVector centered_average(const std::vector<const ParamVector*>& members) {
  ParamVector out = *members.front();
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(out.size());
  for (std::size_t i = 1; i < members.size(); ++i) {
    delta += members[i]->values - out.values;
  }
  out.values += delta / static_cast<double>(members.size());
  return out;
}

}  // namespace

SoupResult greedy_soup(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& val_inputs,
                       const Eigen::VectorXi& val_labels, SoupMetric metric) {
  const std::vector<int> alive = ensemble.surviving_indices();
  if (alive.empty()) throw AllMembersDivergedError();
  if (val_labels.size() == 0) throw std::invalid_argument("greedy_soup: empty validation set");

  const auto score = [&](const ParamVector& params) {
    const Eigen::MatrixXd probs = predict(ensemble.spec, params, val_inputs);
    // Accuracy is flipped so that smaller is always better.
    return metric == SoupMetric::ValNll ? metric_nll(probs, val_labels)
                                        : -metric_acc(probs, val_labels);
  };

  std::vector<std::pair<double, int>> ranked;
  for (int idx : alive) {
    ranked.emplace_back(score(ensemble.members[static_cast<std::size_t>(idx)]), idx);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  SoupResult result;
  result.accepted.push_back(ranked.front().second);
  result.params = ensemble.members[static_cast<std::size_t>(ranked.front().second)];
  double current = ranked.front().first;
  result.trajectory.push_back(metric == SoupMetric::ValNll ? current : -current);

  for (std::size_t r = 1; r < ranked.size(); ++r) {
    std::vector<const ParamVector*> tentative;
    for (int idx : result.accepted) tentative.push_back(&ensemble.members[static_cast<std::size_t>(idx)]);
    tentative.push_back(&ensemble.members[static_cast<std::size_t>(ranked[r].second)]);
    ParamVector candidate = centered_average(tentative);
    const double candidate_score = score(candidate);
    if (candidate_score <= current) {
      current = candidate_score;
      result.params = std::move(candidate);
      result.accepted.push_back(ranked[r].second);
    }
    result.trajectory.push_back(metric == SoupMetric::ValNll ? current : -current);
  }
  return result;
}

void append_result_row(const std::string& csv_path, const EvalReport& report,
                       const std::string& subcommand, std::uint64_t config_hash) {
  const bool fresh = !std::filesystem::exists(csv_path);
  std::ofstream os(csv_path, std::ios::app);
  if (!os) throw std::runtime_error("append_result_row: cannot open " + csv_path);
  if (fresh) {
    os << "subcommand,method,dataset,seed,config_hash,member_count,acc,nll,ece\n";
  }
  os << subcommand << ',' << report.method << ',' << report.dataset << ',' << report.seed << ','
     << config_hash << ',' << report.member_count << ',';
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", report.acc, report.nll, report.ece);
  os << buf;
}

}  // namespace nptl
