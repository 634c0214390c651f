#pragma once

// Minimal reverse-mode building blocks. Every layer has three entry points:
//   forward()  - training pass, caches what backward() needs
//   infer()    - const, cache-free; safe to call concurrently on a frozen layer
//   backward() - accumulates (+=) parameter gradients, returns d(loss)/d(input)

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "inrlab/errors.hpp"

namespace inrlab {

namespace debug {

/// Test hook: a factor != 1 scales every Linear weight-gradient contribution,
/// producing a deliberately wrong backward rule. Not thread-safe; tests only.
inline double& gradient_corruption() {
  static double factor = 1.0;
  return factor;
}

}  // namespace debug

/// Row-major dense matrix; rows are samples, columns are features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Parameter storage. Over-aligned so that Eigen kernels reading it through a
/// Map always start on the same vector boundary; with plain malloc alignment
/// the peeling (and thus the summation order) would depend on the address and
/// identical runs could differ in the last bit.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

/// Optimizer group. Hash/table entries typically train with a larger step.
enum class ParamGroup { network, table };

/// A named flat buffer of trainable values with a paired gradient buffer.
struct Parameter {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  ParamGroup group = ParamGroup::network;
  Buffer values;
  Buffer grads;

  Parameter() = default;
  Parameter(std::string n, std::size_t r, std::size_t c, ParamGroup g = ParamGroup::network)
      : name(std::move(n)), rows(r), cols(c), group(g), values(r * c, 0.0), grads(r * c, 0.0) {}

  [[nodiscard]] std::size_t size() const { return values.size(); }

  void zero_grads() { std::fill(grads.begin(), grads.end(), 0.0); }

  [[nodiscard]] bool finite() const {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i]) || !std::isfinite(grads[i])) return false;
    }
    return true;
  }

  [[nodiscard]] ConstMatrixMap value_matrix() const {
    return {values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }
  MatrixMap value_matrix() {
    return {values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }
  MatrixMap grad_matrix() {
    return {grads.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }
};

/// Elementwise nonlinearity: relu, sin(w0 * x), or identity.
struct Activation {
  enum class Kind { relu, sine, identity };
  Kind kind = Kind::identity;
  double w0 = 0.0;

  static Activation relu() { return {Kind::relu, 0.0}; }
  static Activation identity() { return {Kind::identity, 0.0}; }
  static Activation sine(double w0) {
    if (!(w0 > 0.0)) throw ConfigError("sine activation requires w0 > 0");
    return {Kind::sine, w0};
  }

  [[nodiscard]] double apply(double x) const {
    switch (kind) {
      case Kind::relu: return x > 0.0 ? x : 0.0;
      case Kind::sine: return std::sin(w0 * x);
      case Kind::identity: break;
    }
    return x;
  }

  // relu'(0) is taken as 0.
  [[nodiscard]] double derivative(double x) const {
    switch (kind) {
      case Kind::relu: return x > 0.0 ? 1.0 : 0.0;
      case Kind::sine: return w0 * std::cos(w0 * x);
      case Kind::identity: break;
    }
    return 1.0;
  }
};

/// Dense layer y = x W^T + b with W stored out x in.
class Linear {
 public:
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out)
      : weight(name + ".weight", out, in), bias(name + ".bias", 1, out) {}

  [[nodiscard]] std::size_t in_features() const { return weight.cols; }
  [[nodiscard]] std::size_t out_features() const { return weight.rows; }

  [[nodiscard]] Matrix infer(const Matrix& input) const {
    if (static_cast<std::size_t>(input.cols()) != in_features()) {
      throw ConfigError(weight.name + ": expected " + std::to_string(in_features()) +
                        " input columns, got " + std::to_string(input.cols()));
    }
    Matrix out = input * weight.value_matrix().transpose();
    out.rowwise() += bias.value_matrix().row(0);
    return out;
  }

  /// Takes the input by value so callers can hand over temporaries without a copy.
  Matrix forward(Matrix input) {
    Matrix out = infer(input);
    cached_input_ = std::move(input);
    return out;
  }

  Matrix backward(const Matrix& upstream) {
    if (!cached_input_) throw UsageError(weight.name + ": backward called without forward");
    const Matrix& input = *cached_input_;
    if (upstream.rows() != input.rows() ||
        static_cast<std::size_t>(upstream.cols()) != out_features()) {
      throw ConfigError(weight.name + ": upstream gradient shape mismatch");
    }
    weight.grad_matrix().noalias() += debug::gradient_corruption() * (upstream.transpose() * input);
    bias.grad_matrix().row(0) += upstream.colwise().sum();
    return upstream * weight.value_matrix();
  }

  void clear_cache() { cached_input_.reset(); }

 private:
  std::optional<Matrix> cached_input_;
};

/// Elementwise activation with cached pre-activations.
class ActivationLayer {
 public:
  ActivationLayer() = default;
  explicit ActivationLayer(Activation a) : act_(a) {}

  [[nodiscard]] const Activation& activation() const { return act_; }

  [[nodiscard]] Matrix infer(const Matrix& input) const {
    switch (act_.kind) {
      case Activation::Kind::relu: return input.cwiseMax(0.0);
      case Activation::Kind::sine: return (input * act_.w0).array().sin().matrix();
      case Activation::Kind::identity: break;
    }
    return input;
  }

  Matrix forward(Matrix input) {
    Matrix out = infer(input);
    cached_input_ = std::move(input);
    return out;
  }

  Matrix backward(const Matrix& upstream) {
    if (!cached_input_) throw UsageError("activation: backward called without forward");
    if (upstream.rows() != cached_input_->rows() || upstream.cols() != cached_input_->cols()) {
      throw ConfigError("activation: upstream gradient shape mismatch");
    }
    const Matrix& x = *cached_input_;
    switch (act_.kind) {
      case Activation::Kind::relu: return (x.array() > 0.0).select(upstream, 0.0);
      case Activation::Kind::sine:
        return (upstream.array() * act_.w0 * (x * act_.w0).array().cos()).matrix();
      case Activation::Kind::identity: break;
    }
    return upstream;
  }

  /// Pre-activation values of the last forward pass (used for kink guards in gradient checks).
  [[nodiscard]] const std::optional<Matrix>& cached_input() const { return cached_input_; }

  void clear_cache() { cached_input_.reset(); }

 private:
  Activation act_ = Activation::identity();
  std::optional<Matrix> cached_input_;
};

/// Column-wise join, a's columns first.
inline Matrix concat_columns(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ConfigError("concat: row count mismatch (" + std::to_string(a.rows()) + " vs " +
                      std::to_string(b.rows()) + ")");
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

/// Inverse routing of concat_columns: columns [0,p) go to a, the rest to b.
inline std::pair<Matrix, Matrix> split_columns(const Matrix& upstream, Eigen::Index p) {
  if (p < 0 || p > upstream.cols()) throw ConfigError("split: column index out of range");
  return {upstream.leftCols(p), upstream.rightCols(upstream.cols() - p)};
}

struct LossResult {
  double loss = 0.0;
  Matrix grad;
};

/// Mean squared error over all n*d entries and its gradient w.r.t. pred.
inline LossResult mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() == 0) throw UsageError("mse_loss: empty batch");
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ConfigError("mse_loss: shape mismatch");
  }
  const double count = static_cast<double>(pred.size());
  Matrix diff = pred - target;
  LossResult r;
  r.loss = diff.squaredNorm() / count;
  r.grad = diff * (2.0 / count);
  return r;
}

}  // namespace inrlab
