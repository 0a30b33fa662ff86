#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nptl {

enum class Architecture { LinearRegression, SoftmaxLinear, Mlp };
enum class Activation { Relu, Swish };

std::string to_string(Architecture a);
std::string to_string(Activation a);
Architecture architecture_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

struct ModelSpec {
  Architecture architecture = Architecture::SoftmaxLinear;
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden_sizes;          // Mlp only, at least one entry
  Activation activation = Activation::Relu;

  void validate() const;
  bool is_classifier() const { return architecture != Architecture::LinearRegression; }

  /// Layer widths from input to output, e.g. {in, h1, ..., out}.
  std::vector<int> layer_dims() const;
  Eigen::Index param_count() const;
  /// Parameters of the last affine layer (the task head W); everything before
  /// it is the feature extractor phi. Linear models have an empty phi span.
  Eigen::Index head_offset() const;

  std::string canonical_string() const;
  std::uint64_t hash() const;

  bool operator==(const ModelSpec& other) const = default;
};

struct IndexSpan {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - begin; }
};

/// Flat parameter array with its partition into feature-extractor span phi
/// and head span W. Value type; copies are cheap enough at this scale.
struct ParamVector {
  Eigen::VectorXd values;
  IndexSpan phi_span;
  IndexSpan head_span;

  Eigen::Index size() const { return values.size(); }
  auto phi() { return values.segment(phi_span.begin, phi_span.size()); }
  auto phi() const { return values.segment(phi_span.begin, phi_span.size()); }
  auto head() { return values.segment(head_span.begin, head_span.size()); }
  auto head() const { return values.segment(head_span.begin, head_span.size()); }
};

ParamVector zero_params(const ModelSpec& spec);
/// Fan-in-scaled uniform initialization, deterministic per seed.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

/// Batch targets. One dataset carries one kind: hard class indices, soft
/// probability rows, or real regression values.
class Targets {
 public:
  enum class Kind { Hard, Soft, Real };

  static Targets hard(Eigen::VectorXi labels);
  static Targets soft(Eigen::MatrixXd rows);  // rows must lie on the simplex
  static Targets regression(Eigen::MatrixXd values);

  Kind kind() const { return kind_; }
  Eigen::Index count() const;
  const Eigen::VectorXi& hard_labels() const;
  const Eigen::MatrixXd& soft_rows() const;
  const Eigen::MatrixXd& real_values() const;

  Targets select(const std::vector<int>& indices) const;
  /// Hard labels lifted to one-hot soft rows; other kinds pass through.
  /// Used when observed and pseudo batches are concatenated.
  Targets as_soft(int num_classes) const;

 private:
  Kind kind_ = Kind::Hard;
  Eigen::VectorXi hard_;
  Eigen::MatrixXd dense_;
};

/// Logits for classifiers, predictions for regression; rows preserved.
Eigen::MatrixXd forward(const ModelSpec& spec, const ParamVector& params,
                        const Eigen::MatrixXd& inputs);

/// Row-wise softmax of forward() for classifiers, raw outputs otherwise.
Eigen::MatrixXd predict(const ModelSpec& spec, const ParamVector& params,
                        const Eigen::MatrixXd& inputs);

/// sum_i weights_i * loss_i. Cross-entropy (log-sum-exp stabilized) against
/// hard or soft targets for classifiers; half squared error for regression.
double weighted_loss(const ModelSpec& spec, const ParamVector& params,
                     const Eigen::MatrixXd& inputs, const Targets& targets,
                     const Eigen::VectorXd& weights);

/// Analytic gradient of weighted_loss, reverse-mode through the network.
ParamVector weighted_grad(const ModelSpec& spec, const ParamVector& params,
                          const Eigen::MatrixXd& inputs, const Targets& targets,
                          const Eigen::VectorXd& weights);

struct PenaltyResult {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// (1 / 2 beta) * ||theta - anchor||^2 and its gradient (theta - anchor)/beta.
PenaltyResult l2sp_penalty(const ParamVector& params, const ParamVector& anchor, double beta);

// --- serialization ---------------------------------------------------------

/// Versioned binary layout: magic, format version, model-spec hash,
/// span offsets, then the raw little-endian doubles.
void save_params(const ParamVector& params, const ModelSpec& spec, const std::string& path);
ParamVector load_params(const ModelSpec& spec, const std::string& path);

/// Lossless text form (hex floats), for debugging and diffs.
void export_params_text(const ParamVector& params, const ModelSpec& spec, std::ostream& os);
ParamVector import_params_text(const ModelSpec& spec, std::istream& is);

}  // namespace nptl
