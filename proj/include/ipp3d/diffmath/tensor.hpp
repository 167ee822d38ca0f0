#pragma once

// Rank-2 double tensors with a dynamic reverse-mode tape.
//
// A Tensor is a shared handle. Operations in ops.hpp record their inputs and
// a backward closure on the output whenever any input requires a gradient, so
// the graph is built as the forward pass runs. Vectors are 1 x n rows.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

namespace ipp3d::dm {

struct TensorImpl {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorImpl&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value,
                     bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }
  std::size_t rows() const { return impl_->rows; }
  std::size_t cols() const { return impl_->cols; }
  std::size_t size() const { return impl_->data.size(); }
  std::vector<std::size_t> shape() const { return {impl_->rows, impl_->cols}; }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::span<double> values() { return impl_->data; }
  std::span<const double> values() const { return impl_->data; }
  double& at(std::size_t r, std::size_t c) { return impl_->data[r * impl_->cols + c]; }
  double at(std::size_t r, std::size_t c) const {
    return impl_->data[r * impl_->cols + c];
  }
  // Value of a 1 x 1 tensor.
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return !impl_->grad.empty(); }
  // Empty span when no gradient has been accumulated.
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->ensure_grad(); }
  double grad_at(std::size_t r, std::size_t c) const;
  void zero_grad();

  // Reverse-mode accumulation from a 1 x 1 loss. Leaf gradients accumulate
  // across separate graphs; calling backward twice on one graph throws
  // StateError, a non-scalar loss throws ShapeError.
  void backward();

  // Same values, no history, no gradient requirement.
  Tensor detach() const;
  // Fresh leaf with the same values and requires_grad flag.
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

}  // namespace ipp3d::dm
