#include "asformer/tensor.hpp"

#include "asformer/errors.hpp"

namespace asformer {

std::string shape_string(Index rows, Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = Matrix::Zero(rows, cols);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::make(Matrix value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

const Matrix& Tensor::grad() const {
  if (!node_->has_grad) {
    throw InternalError("gradient requested for tensor " + shape() + " that has none");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.resize(0, 0);
  node_->has_grad = false;
}

Matrix& Tensor::grad_buffer() const {
  if (!node_->has_grad) {
    node_->grad = Matrix::Zero(rows(), cols());
    node_->has_grad = true;
  }
  return node_->grad;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    throw DimensionError("item() needs a [1x1] tensor, got " + shape());
  }
  return node_->value(0, 0);
}

Tape Tape::inference() {
  Tape tape;
  tape.enabled_ = false;
  return tape;
}

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!enabled_) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backward) {
  records_.push_back(Record{std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw InternalError("backward() needs a scalar loss, got " +
                        (loss.defined() ? loss.shape() : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    records_.clear();
    return;
  }
  for (auto& rec : records_) {
    for (auto& in : rec.inputs) {
      if (in.requires_grad()) in.grad_buffer();
    }
    rec.output.grad_buffer();
  }
  Tensor seed = loss;
  seed.grad_buffer()(0, 0) += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    it->backward();
  }
  records_.clear();
}

}  // namespace asformer
