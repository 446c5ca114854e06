#include "trinity/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "trinity/error.hpp"

namespace trinity {

namespace {

size_t shape_product(const Shape& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

void check_positive_dims(const Shape& shape) {
  for (size_t d : shape) {
    if (d == 0) throw DimensionError("zero-sized dimension in shape " + shape_to_string(shape));
  }
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_positive_dims(shape);
  if (shape_product(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " expects " +
                         std::to_string(shape_product(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
  impl_->track = requires_grad;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape_product(shape), 0.0), requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape_product(shape), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->shape;
}

size_t Tensor::size() const { return values().size(); }

const std::vector<double>& Tensor::values() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->values;
}

std::vector<double>& Tensor::mutable_values() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->values;
}

double Tensor::operator()(size_t i) const { return values().at(i); }

double Tensor::operator()(size_t i, size_t j) const {
  const Shape& s = shape();
  if (s.size() != 2) throw DimensionError("2-index access on tensor of shape " + shape_to_string(s));
  return impl_->values[i * s[1] + j];
}

double Tensor::operator()(size_t i, size_t j, size_t k) const {
  const Shape& s = shape();
  if (s.size() != 3) throw DimensionError("3-index access on tensor of shape " + shape_to_string(s));
  return impl_->values[(i * s[1] + j) * s[2] + k];
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor of shape " + shape_to_string(shape()));
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

bool Tensor::has_grad() const { return impl_ && impl_->grad.size() == impl_->values.size(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw ContractError("grad accessed before backward()");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.assign(impl_->values.size(), 0.0);
}

Tensor Tensor::clone_detached(bool requires_grad) const {
  return Tensor(shape(), values(), requires_grad);
}

// Builds an op output node; parents/backward_fn are dropped when no input
// tracks gradients so inference builds no graph.
Tensor make_op_output(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                      std::function<void(detail::TensorImpl&)> backward_fn) {
  Tensor out(std::move(shape), std::move(values));
  bool track = false;
  for (const Tensor& p : parents) track = track || (p.defined() && p.impl()->track);
  if (track) {
    out.impl()->track = true;
    out.impl()->parents.reserve(parents.size());
    for (const Tensor& p : parents) out.impl()->parents.push_back(p.impl_ptr());
    out.impl()->backward_fn = std::move(backward_fn);
  }
  return out;
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op_output(a.shape(), std::move(out), {a, b}, [](detail::TensorImpl& self) {
    for (int p = 0; p < 2; ++p) {
      auto& parent = *self.parents[p];
      if (!parent.track) continue;
      parent.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) parent.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op_output(a.shape(), std::move(out), {a, b}, [](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.track) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.track) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op_output(a.shape(), std::move(out), {a, b}, [](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.track) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.values[i];
    }
    if (pb.track) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.values[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  return make_op_output(a.shape(), std::move(out), {a}, [s](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    if (!pa.track) return;
    pa.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * s;
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  if (bias.rank() != 1 || a.rank() == 0 || a.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) +
                         " does not match trailing dim of " + shape_to_string(a.shape()));
  }
  const size_t d = bias.dim(0);
  std::vector<double> out(a.size());
  const auto& av = a.values();
  const auto& bv = bias.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % d];
  return make_op_output(a.shape(), std::move(out), {a, bias}, [d](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.track) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.track) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i % d] += self.grad[i];
    }
  });
}

namespace {

// c[m,n] += a[m,k] * b[k,n], optionally transposing either input view.
void gemm_acc(std::vector<double>& c, const std::vector<double>& a, const std::vector<double>& b,
              size_t m, size_t k, size_t n, bool trans_a, bool trans_b) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      if (!trans_b) {
        const double* brow = b.data() + p * n;
        for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_acc(out, a.values(), b.values(), m, k, n, false, false);
  return make_op_output({m, n}, std::move(out), {a, b}, [m, k, n](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.track) {
      pa.ensure_grad();
      // dA += dC * B^T
      gemm_acc(pa.grad, self.grad, pb.values, m, n, k, false, true);
    }
    if (pb.track) {
      pb.ensure_grad();
      // dB += A^T * dC
      gemm_acc(pb.grad, pa.values, self.grad, k, m, n, true, false);
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose expects rank 2, got " + shape_to_string(a.shape()));
  const size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto& av = a.values();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_op_output({n, m}, std::move(out), {a}, [m, n](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    if (!pa.track) return;
    pa.ensure_grad();
    for (size_t j = 0; j < n; ++j)
      for (size_t i = 0; i < m; ++i) pa.grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor reshape(const Tensor& a, Shape new_shape) {
  check_positive_dims(new_shape);
  if (shape_product(new_shape) != a.size()) {
    throw DimensionError("reshape: " + shape_to_string(a.shape()) + " to " +
                         shape_to_string(new_shape) + " changes element count");
  }
  return make_op_output(std::move(new_shape), a.values(), {a}, [](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    if (!pa.track) return;
    pa.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

Tensor concat0(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0) {
    throw DimensionError("concat0: ranks differ: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  for (size_t i = 1; i < a.rank(); ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw DimensionError("concat0: trailing dims differ: " + shape_to_string(a.shape()) + " vs " +
                           shape_to_string(b.shape()));
    }
  }
  Shape out_shape = a.shape();
  out_shape[0] += b.dim(0);
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const size_t na = a.size();
  return make_op_output(std::move(out_shape), std::move(out), {a, b}, [na](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.track) {
      pa.ensure_grad();
      for (size_t i = 0; i < na; ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.track) {
      pb.ensure_grad();
      for (size_t i = na; i < self.grad.size(); ++i) pb.grad[i - na] += self.grad[i];
    }
  });
}

Tensor slice0(const Tensor& a, size_t begin, size_t end) {
  if (a.rank() == 0 || begin > end || end > a.dim(0) || begin == end) {
    throw DimensionError("slice0: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for shape " + shape_to_string(a.shape()));
  }
  const size_t row = a.size() / a.dim(0);
  Shape out_shape = a.shape();
  out_shape[0] = end - begin;
  std::vector<double> out(a.values().begin() + begin * row, a.values().begin() + end * row);
  return make_op_output(std::move(out_shape), std::move(out), {a}, [begin, row](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    if (!pa.track) return;
    pa.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[begin * row + i] += self.grad[i];
  });
}

Tensor group_mean0(const Tensor& a, const std::vector<size_t>& group_of, size_t n_groups) {
  if (a.rank() == 0 || group_of.size() != a.dim(0)) {
    throw DimensionError("group_mean0: group map size " + std::to_string(group_of.size()) +
                         " vs rows " + std::to_string(a.rank() ? a.dim(0) : 0));
  }
  if (n_groups == 0) throw ContractError("group_mean0: n_groups must be positive");
  std::vector<size_t> counts(n_groups, 0);
  for (size_t g : group_of) {
    if (g >= n_groups) throw ContractError("group_mean0: group id " + std::to_string(g) + " out of range");
    counts[g]++;
  }
  for (size_t g = 0; g < n_groups; ++g) {
    if (counts[g] == 0) throw ContractError("group_mean0: empty channel " + std::to_string(g));
  }
  const size_t row = a.size() / a.dim(0);
  Shape out_shape = a.shape();
  out_shape[0] = n_groups;
  std::vector<double> out(n_groups * row, 0.0);
  const auto& av = a.values();
  for (size_t r = 0; r < group_of.size(); ++r) {
    const size_t g = group_of[r];
    const double inv = 1.0 / static_cast<double>(counts[g]);
    for (size_t j = 0; j < row; ++j) out[g * row + j] += av[r * row + j] * inv;
  }
  return make_op_output(std::move(out_shape), std::move(out), {a},
                        [group_of, counts, row](detail::TensorImpl& self) {
                          auto& pa = *self.parents[0];
                          if (!pa.track) return;
                          pa.ensure_grad();
                          for (size_t r = 0; r < group_of.size(); ++r) {
                            const size_t g = group_of[r];
                            const double inv = 1.0 / static_cast<double>(counts[g]);
                            for (size_t j = 0; j < row; ++j)
                              pa.grad[r * row + j] += self.grad[g * row + j] * inv;
                          }
                        });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_op_output({1}, {total}, {a}, [](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    if (!pa.track) return;
    pa.ensure_grad();
    const double g = self.grad[0];
    for (size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
  });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * kInvSqrt2));
  return make_op_output(a.shape(), std::move(out), {a}, [](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    if (!pa.track) return;
    pa.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double x = pa.values[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      pa.grad[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

Tensor softmax(const Tensor& a, size_t axis) {
  if (axis >= a.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(a.shape()));
  }
  const size_t n = a.dim(axis);
  size_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= a.dim(i);
  for (size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);

  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (size_t o = 0; o < outer; ++o) {
    for (size_t in = 0; in < inner; ++in) {
      const size_t base = o * n * inner + in;
      double mx = av[base];
      for (size_t j = 1; j < n; ++j) mx = std::max(mx, av[base + j * inner]);
      double denom = 0.0;
      for (size_t j = 0; j < n; ++j) {
        const double e = std::exp(av[base + j * inner] - mx);
        out[base + j * inner] = e;
        denom += e;
      }
      for (size_t j = 0; j < n; ++j) out[base + j * inner] /= denom;
    }
  }
  return make_op_output(a.shape(), std::move(out), {a},
                        [n, outer, inner](detail::TensorImpl& self) {
                          auto& pa = *self.parents[0];
                          if (!pa.track) return;
                          pa.ensure_grad();
                          for (size_t o = 0; o < outer; ++o) {
                            for (size_t in = 0; in < inner; ++in) {
                              const size_t base = o * n * inner + in;
                              double dot = 0.0;
                              for (size_t j = 0; j < n; ++j) {
                                const size_t idx = base + j * inner;
                                dot += self.grad[idx] * self.values[idx];
                              }
                              for (size_t j = 0; j < n; ++j) {
                                const size_t idx = base + j * inner;
                                pa.grad[idx] += self.values[idx] * (self.grad[idx] - dot);
                              }
                            }
                          }
                        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const size_t d = x.shape().back();
  if (d == 0) throw DimensionError("layer_norm: zero-sized last dim");
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gain/bias must be [" + std::to_string(d) + "], got " +
                         shape_to_string(gain.shape()) + " and " + shape_to_string(bias.shape()));
  }
  const size_t rows = x.size() / d;
  std::vector<double> out(x.size());
  std::vector<double> mean(rows), rstd(rows);
  const auto& xv = x.values();
  const auto& gv = gain.values();
  const auto& bv = bias.values();
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mu = 0.0;
    for (size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    mean[r] = mu;
    rstd[r] = rs;
    for (size_t j = 0; j < d; ++j) out[r * d + j] = gv[j] * (xr[j] - mu) * rs + bv[j];
  }
  return make_op_output(
      x.shape(), std::move(out), {x, gain, bias},
      [d, rows, mean = std::move(mean), rstd = std::move(rstd)](detail::TensorImpl& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        if (px.track) px.ensure_grad();
        if (pg.track) pg.ensure_grad();
        if (pb.track) pb.ensure_grad();
        std::vector<double> h(d), xhat(d);
        for (size_t r = 0; r < rows; ++r) {
          const double* xr = px.values.data() + r * d;
          const double* gr = self.grad.data() + r * d;
          double h_mean = 0.0, hx_mean = 0.0;
          for (size_t j = 0; j < d; ++j) {
            xhat[j] = (xr[j] - mean[r]) * rstd[r];
            h[j] = gr[j] * pg.values[j];
            h_mean += h[j];
            hx_mean += h[j] * xhat[j];
          }
          h_mean /= static_cast<double>(d);
          hx_mean /= static_cast<double>(d);
          if (px.track) {
            for (size_t j = 0; j < d; ++j)
              px.grad[r * d + j] += rstd[r] * (h[j] - h_mean - xhat[j] * hx_mean);
          }
          if (pg.track) {
            for (size_t j = 0; j < d; ++j) pg.grad[j] += gr[j] * xhat[j];
          }
          if (pb.track) {
            for (size_t j = 0; j < d; ++j) pb.grad[j] += gr[j];
          }
        }
      });
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) ||
      k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: incompatible q " + shape_to_string(q.shape()) + ", k " +
                         shape_to_string(k.shape()) + ", v " + shape_to_string(v.shape()));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
  Tensor weights = softmax(scores, 1);
  return matmul(weights, v);
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets,
                     const std::vector<double>& class_weights) {
  if (logits.rank() != 2) {
    throw DimensionError("cross_entropy: logits must be [n,c], got " + shape_to_string(logits.shape()));
  }
  const size_t n = logits.dim(0), c = logits.dim(1);
  if (c < 2) throw DimensionError("cross_entropy: needs >= 2 classes, got " + std::to_string(c));
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
  }
  if (!class_weights.empty() && class_weights.size() != c) {
    throw DimensionError("cross_entropy: weight vector size " + std::to_string(class_weights.size()) +
                         " vs " + std::to_string(c) + " classes");
  }
  for (int64_t t : targets) {
    if (t != kIgnoreLabel && (t < 0 || t >= static_cast<int64_t>(c))) {
      throw ValueError("cross_entropy: label " + std::to_string(t) + " outside [0," +
                       std::to_string(c) + ")");
    }
  }

  // probs are saved for the backward pass.
  std::vector<double> probs(n * c);
  std::vector<double> row_weight(n, 0.0);
  const auto& lv = logits.values();
  double loss = 0.0, weight_total = 0.0;
  for (size_t r = 0; r < n; ++r) {
    if (targets[r] == kIgnoreLabel) continue;
    const double* row = lv.data() + r * c;
    double mx = row[0];
    for (size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (size_t j = 0; j < c; ++j) {
      probs[r * c + j] = std::exp(row[j] - mx);
      denom += probs[r * c + j];
    }
    for (size_t j = 0; j < c; ++j) probs[r * c + j] /= denom;
    const double w = class_weights.empty() ? 1.0 : class_weights[targets[r]];
    row_weight[r] = w;
    weight_total += w;
    loss += w * (std::log(denom) + mx - row[targets[r]]);
  }
  if (weight_total == 0.0) throw ValueError("cross_entropy: degenerate input, all rows ignored");
  loss /= weight_total;

  return make_op_output(
      {1}, {loss}, {logits},
      [n, c, targets, probs = std::move(probs), row_weight = std::move(row_weight),
       weight_total](detail::TensorImpl& self) {
        auto& pl = *self.parents[0];
        if (!pl.track) return;
        pl.ensure_grad();
        const double g = self.grad[0] / weight_total;
        for (size_t r = 0; r < n; ++r) {
          if (targets[r] == kIgnoreLabel) continue;
          const double wg = row_weight[r] * g;
          for (size_t j = 0; j < c; ++j) pl.grad[r * c + j] += wg * probs[r * c + j];
          pl.grad[r * c + targets[r]] -= wg;
        }
      });
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
  if (targets.size() != logits.size()) {
    throw DimensionError("bce_with_logits: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(logits.size()) + " logits");
  }
  const auto& lv = logits.values();
  const size_t n = lv.size();
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double x = lv[i];
    loss += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  loss /= static_cast<double>(n);
  return make_op_output({1}, {loss}, {logits}, [targets](detail::TensorImpl& self) {
    auto& pl = *self.parents[0];
    if (!pl.track) return;
    pl.ensure_grad();
    const double g = self.grad[0] / static_cast<double>(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-pl.values[i]));
      pl.grad[i] += g * (s - targets[i]);
    }
  });
}

namespace {

// align-corners-false source coordinate and blend weights for one output index.
struct Tap {
  size_t lo, hi;
  double w_hi;  // weight of hi; lo gets (1 - w_hi)
};

std::vector<Tap> make_taps(size_t in, size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    const double max_src = static_cast<double>(in - 1);
    if (src > max_src) src = max_src;
    const size_t lo = static_cast<size_t>(src);
    taps[i].lo = lo;
    taps[i].hi = std::min(lo + 1, in - 1);
    taps[i].w_hi = src - static_cast<double>(lo);
  }
  return taps;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, size_t out_h, size_t out_w) {
  if (x.rank() != 3) {
    throw DimensionError("bilinear_upsample expects [c,h,w], got " + shape_to_string(x.shape()));
  }
  if (out_h == 0 || out_w == 0) throw DimensionError("bilinear_upsample: zero target size");
  const size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (out_h < h || out_w < w) {
    throw DimensionError("bilinear_upsample: target " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " smaller than source " + std::to_string(h) + "x" +
                         std::to_string(w));
  }
  const std::vector<Tap> ty = make_taps(h, out_h);
  const std::vector<Tap> tx = make_taps(w, out_w);
  std::vector<double> out(c * out_h * out_w);
  const auto& xv = x.values();
  for (size_t ch = 0; ch < c; ++ch) {
    const double* plane = xv.data() + ch * h * w;
    double* oplane = out.data() + ch * out_h * out_w;
    for (size_t i = 0; i < out_h; ++i) {
      const Tap& ry = ty[i];
      for (size_t j = 0; j < out_w; ++j) {
        const Tap& rx = tx[j];
        const double v00 = plane[ry.lo * w + rx.lo];
        const double v01 = plane[ry.lo * w + rx.hi];
        const double v10 = plane[ry.hi * w + rx.lo];
        const double v11 = plane[ry.hi * w + rx.hi];
        const double top = v00 + (v01 - v00) * rx.w_hi;
        const double bot = v10 + (v11 - v10) * rx.w_hi;
        oplane[i * out_w + j] = top + (bot - top) * ry.w_hi;
      }
    }
  }
  return make_op_output(
      {c, out_h, out_w}, std::move(out), {x},
      [c, h, w, out_h, out_w, ty, tx](detail::TensorImpl& self) {
        auto& px = *self.parents[0];
        if (!px.track) return;
        px.ensure_grad();
        for (size_t ch = 0; ch < c; ++ch) {
          double* gplane = px.grad.data() + ch * h * w;
          const double* oplane = self.grad.data() + ch * out_h * out_w;
          for (size_t i = 0; i < out_h; ++i) {
            const Tap& ry = ty[i];
            for (size_t j = 0; j < out_w; ++j) {
              const Tap& rx = tx[j];
              const double g = oplane[i * out_w + j];
              gplane[ry.lo * w + rx.lo] += g * (1.0 - ry.w_hi) * (1.0 - rx.w_hi);
              gplane[ry.lo * w + rx.hi] += g * (1.0 - ry.w_hi) * rx.w_hi;
              gplane[ry.hi * w + rx.lo] += g * ry.w_hi * (1.0 - rx.w_hi);
              gplane[ry.hi * w + rx.hi] += g * ry.w_hi * rx.w_hi;
            }
          }
        }
      });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward expects a scalar loss");
  }
  detail::TensorImpl* root = loss.impl();
  if (root->backward_done) {
    throw ContractError("backward already called for this loss; reset the graph first");
  }
  root->backward_done = true;
  if (!root->track) return;

  // Iterative post-order DFS; 'order' ends up topological (inputs first).
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      detail::TensorImpl* child = node->parents[next_child].get();
      ++next_child;
      if (child->track && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
}

}  // namespace trinity
