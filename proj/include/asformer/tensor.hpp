#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace asformer {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_string(Index rows, Index cols);

/// Shared handle to a dense 2-D value that may take part in reverse-mode
/// differentiation. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor make(Matrix value, bool requires_grad);

  bool defined() const noexcept { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::string shape() const { return shape_string(rows(), cols()); }

  const Matrix& value() const { return node_->value; }
  // Direct write access, for optimizers and finite-difference probes only.
  Matrix& mutable_value() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }
  const Matrix& grad() const;
  void zero_grad();

  // Zero-initializes the gradient buffer on first access. Handle semantics:
  // constness of the handle does not extend to the shared node.
  Matrix& grad_buffer() const;

  double item() const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
  };

  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

/// Ordered log of differentiable operations. Confined to one thread.
class Tape {
 public:
  struct Record {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // A disabled tape records nothing; use it for inference.
  static Tape inference();

  bool enabled() const noexcept { return enabled_; }
  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<Record>& records() const noexcept { return records_; }

  // Records only when at least one input requires a gradient.
  bool wants(std::initializer_list<const Tensor*> inputs) const;
  void record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1, runs every record in reverse order, and
  /// clears the tape. Gradients accumulate into existing buffers.
  void backward(const Tensor& loss);

  void clear() { records_.clear(); }

 private:
  std::vector<Record> records_;
  bool enabled_ = true;
};

}  // namespace asformer
