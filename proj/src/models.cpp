#include "nptl/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nptl/rng.hpp"

namespace nptl {

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::LinearRegression: return "linear-regression";
    case Architecture::SoftmaxLinear: return "softmax-linear";
    case Architecture::Mlp: return "mlp";
  }
  throw std::logic_error("unknown architecture");
}

std::string to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "swish";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "linear-regression") return Architecture::LinearRegression;
  if (s == "softmax-linear") return Architecture::SoftmaxLinear;
  if (s == "mlp") return Architecture::Mlp;
  throw std::invalid_argument("unknown architecture: " + s);
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "swish") return Activation::Swish;
  throw std::invalid_argument("unknown activation: " + s);
}

void ModelSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("ModelSpec: dims must be positive");
  }
  if (architecture == Architecture::Mlp) {
    if (hidden_sizes.empty()) throw std::invalid_argument("ModelSpec: mlp needs >= 1 hidden layer");
    for (int h : hidden_sizes) {
      if (h < 1) throw std::invalid_argument("ModelSpec: hidden sizes must be positive");
    }
  } else if (!hidden_sizes.empty()) {
    throw std::invalid_argument("ModelSpec: hidden sizes only apply to mlp");
  }
}

std::vector<int> ModelSpec::layer_dims() const {
  std::vector<int> dims;
  dims.push_back(input_dim);
  if (architecture == Architecture::Mlp) {
    dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
  }
  dims.push_back(output_dim);
  return dims;
}

Eigen::Index ModelSpec::param_count() const {
  const auto dims = layer_dims();
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    total += static_cast<Eigen::Index>(dims[l]) * dims[l + 1] + dims[l + 1];
  }
  return total;
}

Eigen::Index ModelSpec::head_offset() const {
  const auto dims = layer_dims();
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 2 < dims.size(); ++l) {
    offset += static_cast<Eigen::Index>(dims[l]) * dims[l + 1] + dims[l + 1];
  }
  return offset;
}

std::string ModelSpec::canonical_string() const {
  std::ostringstream os;
  os << to_string(architecture) << "|in=" << input_dim << "|out=" << output_dim << "|hidden=";
  for (std::size_t i = 0; i < hidden_sizes.size(); ++i) {
    if (i) os << ',';
    os << hidden_sizes[i];
  }
  os << "|act=" << to_string(activation);
  return os.str();
}

std::uint64_t ModelSpec::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : canonical_string()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

ParamVector make_param_vector(const ModelSpec& spec) {
  spec.validate();
  ParamVector p;
  p.values = Eigen::VectorXd::Zero(spec.param_count());
  const Eigen::Index head = spec.head_offset();
  p.phi_span = {0, head};
  p.head_span = {head, p.values.size()};
  return p;
}

// Column-major (out x in) weight matrix followed by the bias vector.
struct LayerView {
  Eigen::Map<const Eigen::MatrixXd> weight;
  Eigen::Map<const Eigen::VectorXd> bias;
};

struct LayerViewMut {
  Eigen::Map<Eigen::MatrixXd> weight;
  Eigen::Map<Eigen::VectorXd> bias;
};

LayerView layer_view(const Eigen::VectorXd& values, Eigen::Index offset, int in, int out) {
  return {Eigen::Map<const Eigen::MatrixXd>(values.data() + offset, out, in),
          Eigen::Map<const Eigen::VectorXd>(values.data() + offset + static_cast<Eigen::Index>(out) * in, out)};
}

LayerViewMut layer_view_mut(Eigen::VectorXd& values, Eigen::Index offset, int in, int out) {
  return {Eigen::Map<Eigen::MatrixXd>(values.data() + offset, out, in),
          Eigen::Map<Eigen::VectorXd>(values.data() + offset + static_cast<Eigen::Index>(out) * in, out)};
}

double swish(double x) { return x / (1.0 + std::exp(-x)); }

double swish_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::Relu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.unaryExpr([](double x) { return swish(x); });
  }
}

Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& pre, Activation act) {
  if (act == Activation::Relu) {
    return (pre.array() > 0.0).cast<double>();
  }
  return pre.unaryExpr([](double x) { return swish_grad(x); });
}

void check_forward_args(const ModelSpec& spec, const ParamVector& params,
                        const Eigen::MatrixXd& inputs) {
  spec.validate();
  if (params.size() != spec.param_count()) {
    throw std::invalid_argument("forward: parameter length does not match spec");
  }
  if (inputs.cols() != spec.input_dim) {
    throw std::invalid_argument("forward: input width does not match spec");
  }
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per hidden layer
  std::vector<Eigen::MatrixXd> post;  // post-activations, post[0] = inputs
  Eigen::MatrixXd outputs;
};

ForwardCache run_forward(const ModelSpec& spec, const ParamVector& params,
                         const Eigen::MatrixXd& inputs) {
  const auto dims = spec.layer_dims();
  ForwardCache cache;
  cache.post.push_back(inputs);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto view = layer_view(params.values, offset, dims[l], dims[l + 1]);
    Eigen::MatrixXd z = cache.post.back() * view.weight.transpose();
    z.rowwise() += view.bias.transpose();
    offset += static_cast<Eigen::Index>(dims[l]) * dims[l + 1] + dims[l + 1];
    const bool last = (l + 2 == dims.size());
    if (last) {
      cache.outputs = std::move(z);
    } else {
      cache.pre.push_back(z);
      apply_activation(z, spec.activation);
      cache.post.push_back(std::move(z));
    }
  }
  return cache;
}

Eigen::VectorXd row_log_sum_exp(const Eigen::MatrixXd& logits) {
  Eigen::VectorXd m = logits.rowwise().maxCoeff();
  return m.array() + (logits.colwise() - m).array().exp().rowwise().sum().log();
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits) {
  Eigen::VectorXd m = logits.rowwise().maxCoeff();
  Eigen::MatrixXd e = (logits.colwise() - m).array().exp();
  Eigen::VectorXd s = e.rowwise().sum();
  return e.array().colwise() / s.array();
}

void check_batch_args(const ModelSpec& spec, const Eigen::MatrixXd& inputs,
                      const Targets& targets, const Eigen::VectorXd& weights) {
  if (targets.count() != inputs.rows() || weights.size() != inputs.rows()) {
    throw std::invalid_argument("weighted batch: inputs, targets, weights must have equal length");
  }
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw std::invalid_argument("weighted batch: negative weight");
  }
  if (spec.is_classifier()) {
    if (targets.kind() == Targets::Kind::Real) {
      throw std::invalid_argument("weighted batch: classifier given regression targets");
    }
    if (targets.kind() == Targets::Kind::Hard &&
        targets.count() > 0 && targets.hard_labels().maxCoeff() >= spec.output_dim) {
      throw std::invalid_argument("weighted batch: hard label out of range");
    }
  } else if (targets.kind() != Targets::Kind::Real) {
    throw std::invalid_argument("weighted batch: regression model given class targets");
  }
}

}  // namespace

ParamVector zero_params(const ModelSpec& spec) { return make_param_vector(spec); }

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  ParamVector p = make_param_vector(spec);
  Rng rng(seed);
  const auto dims = spec.layer_dims();
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    const Eigen::Index count = static_cast<Eigen::Index>(dims[l]) * dims[l + 1] + dims[l + 1];
    for (Eigen::Index i = 0; i < count; ++i) {
      p.values[offset + i] = bound * (2.0 * rng.uniform() - 1.0);
    }
    offset += count;
  }
  return p;
}

Targets Targets::hard(Eigen::VectorXi labels) {
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw std::invalid_argument("Targets: negative class index");
  }
  Targets t;
  t.kind_ = Kind::Hard;
  t.hard_ = std::move(labels);
  return t;
}

Targets Targets::soft(Eigen::MatrixXd rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (rows(i, j) < 0.0) throw std::invalid_argument("Targets: soft row has negative entry");
      sum += rows(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("Targets: soft row does not sum to 1");
    }
  }
  Targets t;
  t.kind_ = Kind::Soft;
  t.dense_ = std::move(rows);
  return t;
}

Targets Targets::regression(Eigen::MatrixXd values) {
  Targets t;
  t.kind_ = Kind::Real;
  t.dense_ = std::move(values);
  return t;
}

Eigen::Index Targets::count() const {
  return kind_ == Kind::Hard ? hard_.size() : dense_.rows();
}

const Eigen::VectorXi& Targets::hard_labels() const {
  if (kind_ != Kind::Hard) throw std::logic_error("Targets: not hard labels");
  return hard_;
}

const Eigen::MatrixXd& Targets::soft_rows() const {
  if (kind_ != Kind::Soft) throw std::logic_error("Targets: not soft rows");
  return dense_;
}

const Eigen::MatrixXd& Targets::real_values() const {
  if (kind_ != Kind::Real) throw std::logic_error("Targets: not regression values");
  return dense_;
}

Targets Targets::select(const std::vector<int>& indices) const {
  Targets t;
  t.kind_ = kind_;
  if (kind_ == Kind::Hard) {
    t.hard_.resize(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) t.hard_[static_cast<Eigen::Index>(i)] = hard_[indices[i]];
  } else {
    t.dense_.resize(static_cast<Eigen::Index>(indices.size()), dense_.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) t.dense_.row(static_cast<Eigen::Index>(i)) = dense_.row(indices[i]);
  }
  return t;
}

Targets Targets::as_soft(int num_classes) const {
  if (kind_ == Kind::Soft) return *this;
  if (kind_ != Kind::Hard) throw std::logic_error("Targets: cannot lift regression to soft");
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(hard_.size(), num_classes);
  for (Eigen::Index i = 0; i < hard_.size(); ++i) {
    if (hard_[i] >= num_classes) throw std::invalid_argument("Targets: label out of range");
    rows(i, hard_[i]) = 1.0;
  }
  return soft(std::move(rows));
}

Eigen::MatrixXd forward(const ModelSpec& spec, const ParamVector& params,
                        const Eigen::MatrixXd& inputs) {
  check_forward_args(spec, params, inputs);
  return run_forward(spec, params, inputs).outputs;
}

Eigen::MatrixXd predict(const ModelSpec& spec, const ParamVector& params,
                        const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd out = forward(spec, params, inputs);
  if (spec.is_classifier()) return row_softmax(out);
  return out;
}

double weighted_loss(const ModelSpec& spec, const ParamVector& params,
                     const Eigen::MatrixXd& inputs, const Targets& targets,
                     const Eigen::VectorXd& weights) {
  check_forward_args(spec, params, inputs);
  check_batch_args(spec, inputs, targets, weights);
  if (inputs.rows() == 0) return 0.0;
  const Eigen::MatrixXd outputs = run_forward(spec, params, inputs).outputs;

  double loss = 0.0;
  if (spec.is_classifier()) {
    const Eigen::VectorXd lse = row_log_sum_exp(outputs);
    if (targets.kind() == Targets::Kind::Hard) {
      const auto& y = targets.hard_labels();
      for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
        loss += weights[i] * (lse[i] - outputs(i, y[i]));
      }
    } else {
      const auto& p = targets.soft_rows();
      for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
        loss += weights[i] * (lse[i] - p.row(i).dot(outputs.row(i)));
      }
    }
  } else {
    const auto& y = targets.real_values();
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
      loss += weights[i] * 0.5 * (outputs.row(i) - y.row(i)).squaredNorm();
    }
  }
  return loss;
}

ParamVector weighted_grad(const ModelSpec& spec, const ParamVector& params,
                          const Eigen::MatrixXd& inputs, const Targets& targets,
                          const Eigen::VectorXd& weights) {
  check_forward_args(spec, params, inputs);
  check_batch_args(spec, inputs, targets, weights);
  ParamVector grad = make_param_vector(spec);
  if (inputs.rows() == 0) return grad;

  const ForwardCache cache = run_forward(spec, params, inputs);

  // dL/d(outputs), already weighted per example.
  Eigen::MatrixXd delta;
  if (spec.is_classifier()) {
    delta = row_softmax(cache.outputs);
    if (targets.kind() == Targets::Kind::Hard) {
      const auto& y = targets.hard_labels();
      for (Eigen::Index i = 0; i < delta.rows(); ++i) delta(i, y[i]) -= 1.0;
    } else {
      delta -= targets.soft_rows();
    }
  } else {
    delta = cache.outputs - targets.real_values();
  }
  delta.array().colwise() *= weights.array();

  const auto dims = spec.layer_dims();
  std::vector<Eigen::Index> offsets(dims.size() - 1);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    offsets[l] = offset;
    offset += static_cast<Eigen::Index>(dims[l]) * dims[l + 1] + dims[l + 1];
  }

  for (std::size_t l = dims.size() - 1; l-- > 0;) {
    auto gview = layer_view_mut(grad.values, offsets[l], dims[l], dims[l + 1]);
    gview.weight = delta.transpose() * cache.post[l];
    gview.bias = delta.colwise().sum();
    if (l > 0) {
      const auto view = layer_view(params.values, offsets[l], dims[l], dims[l + 1]);
      delta = (delta * view.weight).cwiseProduct(activation_grad(cache.pre[l - 1], spec.activation));
    }
  }
  return grad;
}

PenaltyResult l2sp_penalty(const ParamVector& params, const ParamVector& anchor, double beta) {
  if (params.size() != anchor.size()) {
    throw std::invalid_argument("l2sp_penalty: parameter/anchor length mismatch");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("l2sp_penalty: beta must be positive");
  PenaltyResult r;
  const Eigen::VectorXd diff = params.values - anchor.values;
  r.value = diff.squaredNorm() / (2.0 * beta);
  r.gradient = diff / beta;
  return r;
}

// --- serialization ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'N', 'P', 'T', 'L', 'P', 'R', 'M', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw std::runtime_error("param file: truncated");
  return value;
}

}  // namespace

void save_params(const ParamVector& params, const ModelSpec& spec, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_params: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kFormatVersion);
  write_pod(os, spec.hash());
  write_pod(os, static_cast<std::uint64_t>(params.size()));
  write_pod(os, static_cast<std::uint64_t>(params.phi_span.end));
  os.write(reinterpret_cast<const char*>(params.values.data()),
           static_cast<std::streamsize>(sizeof(double)) * params.size());
  if (!os) throw std::runtime_error("save_params: write failed for " + path);
}

ParamVector load_params(const ModelSpec& spec, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_params: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("load_params: bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kFormatVersion) throw std::runtime_error("load_params: unsupported version in " + path);
  const auto hash = read_pod<std::uint64_t>(is);
  if (hash != spec.hash()) {
    throw std::runtime_error("load_params: model spec hash mismatch in " + path);
  }
  const auto length = read_pod<std::uint64_t>(is);
  const auto phi_end = read_pod<std::uint64_t>(is);
  if (length != static_cast<std::uint64_t>(spec.param_count()) ||
      phi_end != static_cast<std::uint64_t>(spec.head_offset())) {
    throw std::runtime_error("load_params: layout mismatch in " + path);
  }
  ParamVector p = zero_params(spec);
  is.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(sizeof(double)) * p.values.size());
  if (!is) throw std::runtime_error("load_params: truncated file " + path);
  return p;
}

void export_params_text(const ParamVector& params, const ModelSpec& spec, std::ostream& os) {
  os << "nptl-params-text 1\n" << spec.canonical_string() << "\n" << params.size() << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a\n", params.values[i]);
    os << buf;
  }
}

ParamVector import_params_text(const ModelSpec& spec, std::istream& is) {
  std::string header, version;
  is >> header >> version;
  if (header != "nptl-params-text" || version != "1") {
    throw std::runtime_error("import_params_text: bad header");
  }
  std::string spec_line;
  std::getline(is, spec_line);  // rest of version line
  std::getline(is, spec_line);
  if (spec_line != spec.canonical_string()) {
    throw std::runtime_error("import_params_text: model spec mismatch");
  }
  Eigen::Index count = 0;
  is >> count;
  if (count != spec.param_count()) throw std::runtime_error("import_params_text: length mismatch");
  ParamVector p = zero_params(spec);
  for (Eigen::Index i = 0; i < count; ++i) {
    std::string token;
    is >> token;
    if (!is) throw std::runtime_error("import_params_text: truncated");
    p.values[i] = std::strtod(token.c_str(), nullptr);
  }
  return p;
}

}  // namespace nptl
