#pragma once

// Differentiable primitives. Shapes are explicit: the only broadcast is
// add_row_bias, which adds a 1 x n row to every row of an m x n tensor.
// Every mismatch throws ShapeError.

#include <cstddef>
#include <span>

#include "ipp3d/diffmath/tensor.hpp"

namespace ipp3d::dm {

inline constexpr double kLayerNormEps = 1e-5;

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor neg(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
// Throws DomainError on a non-positive input.
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);
// Elementwise minimum; ties send the gradient to a.
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
// Copy of base with one row replaced by src (1 x cols).
Tensor set_row(const Tensor& base, std::size_t row, const Tensor& src);

Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);
// Per-row normalization over columns followed by gain * x_hat + bias, where
// gain and bias are 1 x cols.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace ipp3d::dm
