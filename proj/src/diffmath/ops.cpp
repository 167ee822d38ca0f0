#include "ipp3d/diffmath/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ipp3d/errors.hpp"
#include "ipp3d/simd/kernels.hpp"

namespace ipp3d::dm {
namespace {

Tensor make(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor::from(rows, cols, std::move(data), false);
}

template <class Fn>
Tensor record(Tensor out, std::span<const Tensor> inputs, Fn&& fn) {
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (!any) return out;
  TensorImpl* impl = out.impl();
  impl->requires_grad = true;
  impl->parents.reserve(inputs.size());
  for (const auto& t : inputs) impl->parents.push_back(t.shared());
  impl->backward_fn = std::forward<Fn>(fn);
  return out;
}

template <class Fn>
Tensor record(Tensor out, std::initializer_list<Tensor> inputs, Fn&& fn) {
  return record(std::move(out), std::span<const Tensor>(inputs.begin(), inputs.size()),
                std::forward<Fn>(fn));
}

// Gradient buffer of parent i, or nullptr if it does not need one.
double* pgrad(TensorImpl& self, std::size_t i) {
  TensorImpl* p = self.parents[i].get();
  if (!p->requires_grad) return nullptr;
  return p->ensure_grad().data();
}

const double* pdata(TensorImpl& self, std::size_t i) {
  return self.parents[i]->data.data();
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                     "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                     "x" + std::to_string(b.cols()));
  }
}

template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
  require_defined(x, "unary");
  std::vector<double> out(x.size());
  const double* xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xd[i]);
  return record(make(x.rows(), x.cols(), std::move(out)), {x},
                [df](TensorImpl& self) {
                  double* gx = pgrad(self, 0);
                  const double* xv = pdata(self, 0);
                  for (std::size_t i = 0; i < self.data.size(); ++i) {
                    gx[i] += self.grad[i] * df(xv[i], self.data[i]);
                  }
                });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.rows()) + " differ");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  simd::kernels().gemm_nn(m, n, k, 1.0, a.data(), k, b.data(), n, out.data(), n);
  return record(make(m, n, std::move(out)), {a, b}, [m, n, k](TensorImpl& self) {
    const auto& ks = simd::kernels();
    const double* g = self.grad.data();
    if (double* ga = pgrad(self, 0)) {
      ks.gemm_nt(m, k, n, 1.0, g, n, pdata(self, 1), n, ga, k);
    }
    if (double* gb = pgrad(self, 1)) {
      ks.gemm_tn(k, n, m, 1.0, pdata(self, 0), k, g, n, gb, n);
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul_nt");
  require_defined(b, "matmul_nt");
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n, 0.0);
  simd::kernels().gemm_nt(m, n, k, 1.0, a.data(), k, b.data(), k, out.data(), n);
  return record(make(m, n, std::move(out)), {a, b}, [m, n, k](TensorImpl& self) {
    const auto& ks = simd::kernels();
    const double* g = self.grad.data();
    if (double* ga = pgrad(self, 0)) {
      ks.gemm_nn(m, k, n, 1.0, g, n, pdata(self, 1), k, ga, k);
    }
    if (double* gb = pgrad(self, 1)) {
      ks.gemm_tn(n, k, m, 1.0, g, n, pdata(self, 0), k, gb, k);
    }
  });
}

Tensor transpose(const Tensor& x) {
  require_defined(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.at(i, j);
  }
  return record(make(c, r, std::move(out)), {x}, [r, c](TensorImpl& self) {
    double* gx = pgrad(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[j * r + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return record(make(a.rows(), a.cols(), std::move(out)), {a, b}, [](TensorImpl& self) {
    const std::size_t n = self.data.size();
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = pgrad(self, p)) {
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return record(make(a.rows(), a.cols(), std::move(out)), {a, b}, [](TensorImpl& self) {
    const std::size_t n = self.data.size();
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
    if (double* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return record(make(a.rows(), a.cols(), std::move(out)), {a, b}, [](TensorImpl& self) {
    const std::size_t n = self.data.size();
    const double* av = pdata(self, 0);
    const double* bv = pdata(self, 1);
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_defined(x, "add_row_bias");
  require_defined(bias, "add_row_bias");
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw ShapeError("add_row_bias: bias must be 1 x " + std::to_string(x.cols()));
  }
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i, j) + bias.data()[j];
  }
  return record(make(r, c, std::move(out)), {x, bias}, [r, c](TensorImpl& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < r * c; ++i) g[i] += self.grad[i];
    }
    if (double* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
      }
    }
  });
}

Tensor scale(const Tensor& x, double s) {
  return unary(
      x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(
      x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  require_defined(x, "log");
  for (double v : x.values()) {
    if (!(v > 0.0)) throw DomainError("log of a non-positive value");
  }
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw DomainError("clamp: lo > hi");
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "minimum");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::min(a.data()[i], b.data()[i]);
  }
  return record(make(a.rows(), a.cols(), std::move(out)), {a, b}, [](TensorImpl& self) {
    const std::size_t n = self.data.size();
    const double* av = pdata(self, 0);
    const double* bv = pdata(self, 1);
    double* ga = pgrad(self, 0);
    double* gb = pgrad(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (av[i] <= bv[i]) {
        if (ga) ga[i] += self.grad[i];
      } else if (gb) {
        gb[i] += self.grad[i];
      }
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_defined(p, "concat_cols");
    if (p.rows() != r) throw ShapeError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(r * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(p.data() + i * p.cols(), p.cols(), out.data() + i * total + off);
    }
    off += p.cols();
  }
  return record(make(r, total, std::move(out)), parts,
                [r, total, widths](TensorImpl& self) {
                  std::size_t o = 0;
                  for (std::size_t p = 0; p < widths.size(); ++p) {
                    const std::size_t w = widths[p];
                    if (double* g = pgrad(self, p)) {
                      for (std::size_t i = 0; i < r; ++i) {
                        for (std::size_t j = 0; j < w; ++j) {
                          g[i * w + j] += self.grad[i * total + o + j];
                        }
                      }
                    }
                    o += w;
                  }
                });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::vector<std::size_t> sizes;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_defined(p, "concat_rows");
    if (p.cols() != c) throw ShapeError("concat_rows: column counts differ");
    sizes.push_back(p.size());
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * c);
  for (const auto& p : parts) out.insert(out.end(), p.data(), p.data() + p.size());
  return record(make(rows, c, std::move(out)), parts, [sizes](TensorImpl& self) {
    std::size_t o = 0;
    for (std::size_t p = 0; p < sizes.size(); ++p) {
      if (double* g = pgrad(self, p)) {
        for (std::size_t i = 0; i < sizes[p]; ++i) g[i] += self.grad[o + i];
      }
      o += sizes[p];
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_defined(x, "gather_rows");
  const std::size_t c = x.cols();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(x.data() + idx[i] * c, c, out.data() + i * c);
  }
  const std::size_t n = idx.size();
  return record(make(n, c, std::move(out)), {x},
                [idx = std::move(idx), c](TensorImpl& self) {
                  double* g = pgrad(self, 0);
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    const double* src = self.grad.data() + i * c;
                    double* dst = g + idx[i] * c;
                    for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                  }
                });
}

Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols) {
  require_defined(x, "gather_cols");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  for (std::size_t j : idx) {
    if (j >= c) throw ShapeError("gather_cols: index out of range");
  }
  const std::size_t n = idx.size();
  std::vector<double> out(r * n);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.at(i, idx[j]);
  }
  return record(make(r, n, std::move(out)), {x},
                [idx = std::move(idx), r, c](TensorImpl& self) {
                  double* g = pgrad(self, 0);
                  const std::size_t n = idx.size();
                  for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                      g[i * c + idx[j]] += self.grad[i * n + j];
                    }
                  }
                });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_defined(x, "slice_cols");
  if (start + count > x.cols()) throw ShapeError("slice_cols: range out of bounds");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(x.data() + i * c + start, count, out.data() + i * count);
  }
  return record(make(r, count, std::move(out)), {x},
                [r, c, start, count](TensorImpl& self) {
                  double* g = pgrad(self, 0);
                  for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < count; ++j) {
                      g[i * c + start + j] += self.grad[i * count + j];
                    }
                  }
                });
}

Tensor set_row(const Tensor& base, std::size_t row, const Tensor& src) {
  require_defined(base, "set_row");
  require_defined(src, "set_row");
  if (row >= base.rows()) throw ShapeError("set_row: row out of range");
  if (src.rows() != 1 || src.cols() != base.cols()) {
    throw ShapeError("set_row: source must be 1 x " + std::to_string(base.cols()));
  }
  const std::size_t c = base.cols();
  std::vector<double> out(base.values().begin(), base.values().end());
  std::copy_n(src.data(), c, out.data() + row * c);
  return record(make(base.rows(), c, std::move(out)), {base, src},
                [row, c](TensorImpl& self) {
                  if (double* g = pgrad(self, 0)) {
                    for (std::size_t i = 0; i < self.data.size(); ++i) {
                      if (i / c != row) g[i] += self.grad[i];
                    }
                  }
                  if (double* g = pgrad(self, 1)) {
                    for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[row * c + j];
                  }
                });
}

Tensor softmax_rows(const Tensor& x) {
  require_defined(x, "softmax_rows");
  if (x.cols() == 0) throw ShapeError("softmax_rows: empty rows");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* xr = x.data() + i * c;
    double* yr = out.data() + i * c;
    const double mx = *std::max_element(xr, xr + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < c; ++j) yr[j] /= z;
  }
  return record(make(r, c, std::move(out)), {x}, [r, c](TensorImpl& self) {
    double* g = pgrad(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = self.data.data() + i * c;
      const double* gy = self.grad.data() + i * c;
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += gy[j] * y[j];
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - s);
    }
  });
}

Tensor log_softmax_rows(const Tensor& x) {
  require_defined(x, "log_softmax_rows");
  if (x.cols() == 0) throw ShapeError("log_softmax_rows: empty rows");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* xr = x.data() + i * c;
    const double mx = *std::max_element(xr, xr + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(xr[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xr[j] - lse;
  }
  return record(make(r, c, std::move(out)), {x}, [r, c](TensorImpl& self) {
    double* g = pgrad(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = self.data.data() + i * c;
      const double* gy = self.grad.data() + i * c;
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += gy[j];
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += gy[j] - std::exp(y[j]) * s;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require_defined(x, "layer_norm");
  const std::size_t r = x.rows(), c = x.cols();
  if (c < 2) throw ShapeError("layer_norm: need at least 2 columns");
  if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c) {
    throw ShapeError("layer_norm: gain and bias must be 1 x " + std::to_string(c));
  }
  std::vector<double> xhat(r * c), inv(r), out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* xr = x.data() + i * c;
    double m = 0.0;
    for (std::size_t j = 0; j < c; ++j) m += xr[j];
    m /= static_cast<double>(c);
    double v = 0.0;
    for (std::size_t j = 0; j < c; ++j) v += (xr[j] - m) * (xr[j] - m);
    v /= static_cast<double>(c);
    inv[i] = 1.0 / std::sqrt(v + kLayerNormEps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (xr[j] - m) * inv[i];
      out[i * c + j] = gain.data()[j] * xhat[i * c + j] + bias.data()[j];
    }
  }
  return record(
      make(r, c, std::move(out)), {x, gain, bias},
      [r, c, xhat = std::move(xhat), inv = std::move(inv)](TensorImpl& self) {
        const double* gy = self.grad.data();
        const double* gv = pdata(self, 1);
        if (double* gx = pgrad(self, 0)) {
          const double n = static_cast<double>(c);
          std::vector<double> dxh(c);
          for (std::size_t i = 0; i < r; ++i) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              dxh[j] = gy[i * c + j] * gv[j];
              s1 += dxh[j];
              s2 += dxh[j] * xhat[i * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) {
              gx[i * c + j] += inv[i] / n * (n * dxh[j] - s1 - xhat[i * c + j] * s2);
            }
          }
        }
        if (double* gg = pgrad(self, 1)) {
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) gg[j] += gy[i * c + j] * xhat[i * c + j];
          }
        }
        if (double* gb = pgrad(self, 2)) {
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) gb[j] += gy[i * c + j];
          }
        }
      });
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double s = 0.0;
  for (double v : x.values()) s += v;
  return record(make(1, 1, {s}), {x}, [](TensorImpl& self) {
    double* g = pgrad(self, 0);
    const std::size_t n = self.parents[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  if (x.size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace ipp3d::dm
