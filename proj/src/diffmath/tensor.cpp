#include "ipp3d/diffmath/tensor.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

#include "ipp3d/errors.hpp"

namespace ipp3d::dm {

std::vector<double>& TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value,
                    bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->rows = rows;
  impl->cols = cols;
  impl->data.assign(rows * cols, value);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
  if (values.size() != rows * cols) {
    throw ShapeError("tensor buffer length does not match shape");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->rows = rows;
  impl->cols = cols;
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from(r, c, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from(1, 1, {v}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on a tensor with more than one element");
  return impl_->data[0];
}

void Tensor::set_requires_grad(bool on) {
  if (!impl_->is_leaf()) throw StateError("requires_grad can only be set on leaves");
  impl_->requires_grad = on;
}

double Tensor::grad_at(std::size_t r, std::size_t c) const {
  if (impl_->grad.empty()) return 0.0;
  return impl_->grad[r * impl_->cols + c];
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::backward() {
  if (size() != 1) throw ShapeError("backward requires a 1 x 1 loss");
  if (impl_->backward_done) throw StateError("backward already ran on this graph");
  if (!impl_->requires_grad) {
    throw StateError("loss does not depend on any tensor that requires a gradient");
  }

  // Iterative post-order DFS gives a topological order with parents first.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorImpl* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->data.size(), 0.0);
  }
  impl_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (!node->is_leaf()) node->backward_fn(*node);
  }
  impl_->backward_done = true;
}

Tensor Tensor::detach() const {
  return from(rows(), cols(), impl_->data, false);
}

Tensor Tensor::clone() const {
  return from(rows(), cols(), impl_->data, impl_->requires_grad);
}

}  // namespace ipp3d::dm
