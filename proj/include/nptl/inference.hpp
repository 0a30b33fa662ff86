#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "nptl/models.hpp"
#include "nptl/sampler.hpp"

namespace nptl {

struct EvalReport {
  std::string method;
  std::string dataset;
  double acc = 0.0;
  double nll = 0.0;
  double ece = 0.0;
  int member_count = 0;
  std::uint64_t seed = 0;
};

enum class SoupMetric { ValNll, ValAcc };

struct SoupResult {
  ParamVector params;
  std::vector<int> accepted;        // member indices, in acceptance order
  std::vector<double> trajectory;   // greedy metric after each candidate
};

/// Arithmetic mean of the members' predictive probability rows (densities,
/// not logits). Diverged members are excluded.
Eigen::MatrixXd bma_predict(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& inputs);

/// Mean of member predictive rows supplied directly.
Eigen::MatrixXd mean_probability_rows(const std::vector<Eigen::MatrixXd>& member_rows);

/// Mean of -log p(true class), with a 1e-12 floor inside the log.
double metric_nll(const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels);

/// Fraction of rows whose argmax matches the label; argmax ties break toward
/// the lowest class index.
double metric_acc(const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels);

/// Expected calibration error with equal-width binning of the max
/// probability; empty bins contribute nothing.
double metric_ece(const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels, int bins = 15);

/// Greedy soup: sort members by the validation metric (best first), start
/// from the best one, and accept each next member into the uniform parameter
/// average iff the validation metric does not degrade.
SoupResult greedy_soup(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& val_inputs,
                       const Eigen::VectorXi& val_labels, SoupMetric metric = SoupMetric::ValNll);

/// Appends one row to a results table, writing the header first if needed.
void append_result_row(const std::string& csv_path, const EvalReport& report,
                       const std::string& subcommand, std::uint64_t config_hash);

}  // namespace nptl
