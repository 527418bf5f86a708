#pragma once

// Minimal dense tensor with reverse-mode automatic differentiation.
//
// Tensors are row-major and shared by handle. An op whose inputs require
// gradients records its parents and a backward closure; `backward(loss)` walks
// the recorded DAG in reverse topological order exactly once per node.
//
// Layout conventions used by the ops:
//   sequences  [B, C, L]  (conv1d, batchnorm1d, maxpool1d)
//   tokens     [B, T, D]  (linear, layer_norm, attention)

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "snz/random.hpp"

namespace snz {

using Shape = std::vector<Eigen::Index>;

Eigen::Index shape_numel(const Shape& s) noexcept;
std::string shape_string(const Shape& s);

template <typename Scalar>
struct TensorNode {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Shape shape;
  Vector value;
  Vector grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  void accumulate(const Vector& g);
};

template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Node = TensorNode<Scalar>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor constant(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from(Shape shape, Vector values, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  /// Extent along `axis`; negative axes count from the back.
  Eigen::Index dim(int axis) const;
  Eigen::Index numel() const { return node_->value.size(); }

  Vector& value() { return node_->value; }
  const Vector& value() const { return node_->value; }
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_->grad.size() != 0; }
  /// Gradient buffer; zeros when nothing has been accumulated.
  Vector grad() const;
  Vector& grad_buffer() { return node_->grad; }
  void zero_grad() { node_->grad.resize(0); }

  /// Same values, no history.
  Tensor detach() const;
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& handle() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording for its lifetime (inference, optimizer updates).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

/// Populate gradients of every requires-grad tensor reachable from the scalar `loss`.
template <typename Scalar>
void backward(const Tensor<Scalar>& loss);

// ---- elementwise / structural ----------------------------------------------------------

template <typename Scalar> Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar> Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar> Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s);
template <typename Scalar> Tensor<Scalar> sum(const Tensor<Scalar>& a);
template <typename Scalar> Tensor<Scalar> relu(const Tensor<Scalar>& a);
template <typename Scalar> Tensor<Scalar> reshape(const Tensor<Scalar>& a, Shape shape);
/// [B, A, C] -> [B, C, A].
template <typename Scalar> Tensor<Scalar> transpose12(const Tensor<Scalar>& a);
template <typename Scalar> Tensor<Scalar> concat(const std::vector<Tensor<Scalar>>& parts, int axis);
/// x[B, T, D] + table[T, D], broadcast over B; the table carries no gradient.
template <typename Scalar>
Tensor<Scalar> add_broadcast_constant(const Tensor<Scalar>& x, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& table);

template <typename Scalar> Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return add(a, b); }
template <typename Scalar> Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return mul(a, b); }

// ---- layers ----------------------------------------------------------------------------

inline Eigen::Index conv_out_length(Eigen::Index length, Eigen::Index kernel, Eigen::Index stride, Eigen::Index padding) {
  return (length + 2 * padding - kernel) / stride + 1;
}

/// x[B, Cin, L] * w[Cout, Cin, K] (+ bias[Cout]); bias may be empty.
template <typename Scalar>
Tensor<Scalar> conv1d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& bias, Eigen::Index stride, Eigen::Index padding);

template <typename Scalar>
struct BatchNormStats {
  Tensor<Scalar> running_mean;
  Tensor<Scalar> running_var;
};

/// Per-channel normalization of x[B, C, L]. Train mode uses batch statistics and
/// updates `stats` (unbiased variance); eval mode uses `stats` as frozen constants.
template <typename Scalar>
Tensor<Scalar> batchnorm1d(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                           BatchNormStats<Scalar>& stats, bool train, Scalar momentum = Scalar(0.1), Scalar eps = Scalar(1e-5));

/// Max over windows, padding acts as -inf; ties go to the earliest index.
template <typename Scalar>
Tensor<Scalar> maxpool1d(const Tensor<Scalar>& x, Eigen::Index kernel, Eigen::Index stride, Eigen::Index padding);

/// x[..., in] -> x W^T + b, w[out, in]; bias may be empty.
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& bias);

template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta, Scalar eps = Scalar(1e-5));

/// Max-subtracted softmax along `axis`.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& x, int axis);

/// Inverted dropout; identity when `train` is false or p == 0.
template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double p, bool train, KeyedRng& rng);

/// Multi-head scaled dot-product attention core over q, k, v [B, T, D] (no mask).
/// Dropout with probability `p` is applied to the attention weights in train mode.
template <typename Scalar>
Tensor<Scalar> attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v, int heads,
                         double p, bool train, KeyedRng& rng);

/// -sum_t log(max(p[t, y_t], 1e-12)) over probabilities [..., C].
template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& probs, const std::vector<int>& labels);

/// Same loss evaluated from logits through log-softmax (no clamp needed).
template <typename Scalar>
Tensor<Scalar> cross_entropy_logits(const Tensor<Scalar>& logits, const std::vector<int>& labels);

}  // namespace snz
