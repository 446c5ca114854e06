#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace trinity {

using Shape = std::vector<size_t>;

std::string shape_to_string(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated lazily by backward()
  bool requires_grad = false;
  bool track = false;  // true if this node or any ancestor requires grad
  bool backward_done = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Pulls this node's grad into the parents' grads. Only set on op outputs
  // that participate in a tracked graph.
  std::function<void(TensorImpl&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

// Dense row-major f64 tensor with reverse-mode autodiff. Copies are shallow
// (shared storage); tensors are immutable after construction except for grad
// accumulation and in-place optimizer updates on leaf parameters.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  size_t rank() const { return shape().size(); }
  size_t dim(size_t axis) const { return shape().at(axis); }
  size_t size() const;

  const std::vector<double>& values() const;
  // In-place access for optimizer updates; never call on a tensor that is
  // part of a live graph.
  std::vector<double>& mutable_values();

  double operator()(size_t i) const;
  double operator()(size_t i, size_t j) const;
  double operator()(size_t i, size_t j, size_t k) const;
  double item() const;  // scalar tensors only

  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  // Deep copy with fresh storage, detached from any graph.
  Tensor clone_detached(bool requires_grad = false) const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;

  friend Tensor make_op_output(Shape shape, std::vector<double> values,
                               std::vector<Tensor> parents,
                               std::function<void(detail::TensorImpl&)> backward_fn);
};

// Sentinel target value skipped by cross_entropy.
inline constexpr int64_t kIgnoreLabel = -1;

// ---- elementwise and structural ops ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// bias is added along the trailing dimension of a.
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape new_shape);
Tensor concat0(const Tensor& a, const Tensor& b);
Tensor slice0(const Tensor& a, size_t begin, size_t end);
// Mean of rows sharing a group id; every group in [0, n_groups) must own
// at least one row.
Tensor group_mean0(const Tensor& a, const std::vector<size_t>& group_of, size_t n_groups);
Tensor sum(const Tensor& a);

// ---- nonlinearities and normalization ----
Tensor gelu(const Tensor& a);
Tensor softmax(const Tensor& a, size_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// ---- composite / loss ops ----
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets,
                     const std::vector<double>& class_weights = {});
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);
Tensor bilinear_upsample(const Tensor& x, size_t out_h, size_t out_w);

// Reverse-mode sweep from a scalar loss. Populates grad on every tracked
// tensor reachable from it; a second call on the same loss is an error.
void backward(const Tensor& loss);

constexpr double kLayerNormEps = 1e-5;

}  // namespace trinity
