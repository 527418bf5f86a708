#include "snz/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "snz/error.hpp"

namespace snz {

Eigen::Index shape_numel(const Shape& s) noexcept {
  Eigen::Index n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ']';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename Scalar>
void TensorNode<Scalar>::accumulate(const Vector& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

// ---- Tensor ------------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::from(Shape shape, Vector values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    fail(ErrorCode::shape, "tensor shape " + shape_string(shape) + " does not match " + std::to_string(values.size()) + " values");
  }
  for (auto d : shape) {
    if (d < 1) fail(ErrorCode::shape, "tensor shape " + shape_string(shape) + " has a non-positive extent");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::zeros(Shape shape, bool requires_grad) {
  const Eigen::Index n = shape_numel(shape);
  return from(std::move(shape), Vector::Zero(n), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::constant(Shape shape, Scalar value, bool requires_grad) {
  const Eigen::Index n = shape_numel(shape);
  return from(std::move(shape), Vector::Constant(n, value), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::scalar(Scalar value, bool requires_grad) {
  return from({}, Vector::Constant(1, value), requires_grad);
}

template <typename Scalar>
Eigen::Index Tensor<Scalar>::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) fail(ErrorCode::shape, "axis " + std::to_string(axis) + " out of range for " + shape_string(shape()));
  return node_->shape[static_cast<std::size_t>(a)];
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  if (numel() != 1) fail(ErrorCode::shape, "item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

template <typename Scalar>
typename Tensor<Scalar>::Vector Tensor<Scalar>::grad() const {
  return has_grad() ? node_->grad : Vector::Zero(numel());
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::detach() const {
  return from(shape(), value(), false);
}

// ---- graph -------------------------------------------------------------------------------

namespace {

template <typename Scalar>
using NodePtr = std::shared_ptr<TensorNode<Scalar>>;

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using MapMat = Eigen::Map<RowMat<Scalar>>;

template <typename Scalar>
using CMapMat = Eigen::Map<const RowMat<Scalar>>;

template <typename Scalar>
using StridedMat = Eigen::Map<RowMat<Scalar>, 0, Eigen::OuterStride<>>;

template <typename Scalar>
using CStridedMat = Eigen::Map<const RowMat<Scalar>, 0, Eigen::OuterStride<>>;

// Creates the result node; records history only when some input needs a gradient.
template <typename Scalar, typename Backward>
Tensor<Scalar> make_result(Shape shape, typename Tensor<Scalar>::Vector value,
                           std::initializer_list<const Tensor<Scalar>*> inputs, Backward&& bw) {
  auto node = std::make_shared<TensorNode<Scalar>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (grad_enabled()) {
    for (const Tensor<Scalar>* in : inputs) {
      if (in && *in && in->requires_grad()) node->requires_grad = true;
    }
  }
  if (node->requires_grad) {
    for (const Tensor<Scalar>* in : inputs) {
      if (in && *in) node->parents.push_back(in->handle());
    }
    node->backward = std::forward<Backward>(bw);
  }
  return Tensor<Scalar>(std::move(node));
}

template <typename Scalar>
bool wants_grad(const Tensor<Scalar>& t) {
  return t && t.requires_grad();
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::shape, what);
}

}  // namespace

template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  if (!loss) fail(ErrorCode::invalid_backward, "backward on an empty tensor");
  if (loss.numel() != 1) fail(ErrorCode::invalid_backward, "backward root must be scalar, got " + shape_string(loss.shape()));
  if (!loss.requires_grad()) fail(ErrorCode::no_grad_path, "loss is not connected to any tensor that requires a gradient");

  using Node = TensorNode<Scalar>;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->accumulate(Node::Vector::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
}

// ---- elementwise ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  return make_result<Scalar>(a.shape(), a.value() + b.value(), {&a, &b}, [](TensorNode<Scalar>& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->accumulate(self.grad);
    }
  });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  return make_result<Scalar>(a.shape(), a.value().cwiseProduct(b.value()), {&a, &b}, [](TensorNode<Scalar>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(pb->value));
    if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(pa->value));
  });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s) {
  return make_result<Scalar>(a.shape(), a.value() * s, {&a}, [s](TensorNode<Scalar>& self) {
    self.parents[0]->accumulate(self.grad * s);
  });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  using Vector = typename Tensor<Scalar>::Vector;
  return make_result<Scalar>({}, Vector::Constant(1, a.value().sum()), {&a}, [](TensorNode<Scalar>& self) {
    auto& p = self.parents[0];
    p->accumulate(Vector::Constant(p->value.size(), self.grad[0]));
  });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  return make_result<Scalar>(a.shape(), a.value().cwiseMax(Scalar(0)), {&a}, [](TensorNode<Scalar>& self) {
    auto& p = self.parents[0];
    // d relu / dx at exactly 0 is taken as 0.
    p->accumulate((p->value.array() > Scalar(0)).select(self.grad.array(), Scalar(0)).matrix());
  });
}

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& a, Shape shape) {
  require(shape_numel(shape) == a.numel(), "reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  return make_result<Scalar>(std::move(shape), a.value(), {&a}, [](TensorNode<Scalar>& self) {
    self.parents[0]->accumulate(self.grad);
  });
}

template <typename Scalar>
Tensor<Scalar> transpose12(const Tensor<Scalar>& a) {
  require(a.rank() == 3, "transpose12: expected rank 3, got " + shape_string(a.shape()));
  const Eigen::Index b = a.dim(0), r = a.dim(1), c = a.dim(2);
  using Vector = typename Tensor<Scalar>::Vector;
  auto swap = [b, r, c](const Vector& in, Eigen::Index rows, Eigen::Index cols) {
    Vector out(in.size());
    for (Eigen::Index i = 0; i < b; ++i) {
      MapMat<Scalar>(out.data() + i * r * c, cols, rows) = CMapMat<Scalar>(in.data() + i * r * c, rows, cols).transpose();
    }
    return out;
  };
  return make_result<Scalar>({b, c, r}, swap(a.value(), r, c), {&a}, [swap, r, c](TensorNode<Scalar>& self) {
    self.parents[0]->accumulate(swap(self.grad, c, r));
  });
}

template <typename Scalar>
Tensor<Scalar> concat(const std::vector<Tensor<Scalar>>& parts, int axis) {
  require(!parts.empty(), "concat: no inputs");
  const int r = parts[0].rank();
  const int ax = axis < 0 ? axis + r : axis;
  require(ax >= 0 && ax < r, "concat: axis out of range");
  Shape out_shape = parts[0].shape();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    require(static_cast<int>(s.size()) == r, "concat: rank mismatch");
    s[static_cast<std::size_t>(ax)] = out_shape[static_cast<std::size_t>(ax)];
    require(s == out_shape, "concat: shape mismatch " + shape_string(p.shape()) + " vs " + shape_string(parts[0].shape()));
    total += p.dim(ax);
  }
  out_shape[static_cast<std::size_t>(ax)] = total;
  Eigen::Index outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= out_shape[static_cast<std::size_t>(i)];
  for (int i = ax + 1; i < r; ++i) inner *= out_shape[static_cast<std::size_t>(i)];

  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) widths.push_back(p.dim(ax) * inner);
  const Eigen::Index row = total * inner;
  typename Tensor<Scalar>::Vector out(outer * row);
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    MapMat<Scalar>(out.data(), outer, row).middleCols(offset, widths[k]) = CMapMat<Scalar>(parts[k].value().data(), outer, widths[k]);
    offset += widths[k];
  }

  auto node = std::make_shared<TensorNode<Scalar>>();
  node->shape = out_shape;
  node->value = std::move(out);
  if (grad_enabled()) {
    for (const auto& p : parts) node->requires_grad |= p.requires_grad();
  }
  if (node->requires_grad) {
    for (const auto& p : parts) node->parents.push_back(p.handle());
    node->backward = [widths, outer, row](TensorNode<Scalar>& self) {
      Eigen::Index off = 0;
      for (std::size_t k = 0; k < self.parents.size(); ++k) {
        auto& p = self.parents[k];
        if (p->requires_grad) {
          typename Tensor<Scalar>::Vector g(outer * widths[k]);
          MapMat<Scalar>(g.data(), outer, widths[k]) = CMapMat<Scalar>(self.grad.data(), outer, row).middleCols(off, widths[k]);
          p->accumulate(g);
        }
        off += widths[k];
      }
    };
  }
  return Tensor<Scalar>(std::move(node));
}

template <typename Scalar>
Tensor<Scalar> add_broadcast_constant(const Tensor<Scalar>& x, const RowMat<Scalar>& table) {
  require(x.rank() == 3 && x.dim(1) == table.rows() && x.dim(2) == table.cols(),
          "add_broadcast_constant: " + shape_string(x.shape()) + " vs table " + std::to_string(table.rows()) + "x" +
              std::to_string(table.cols()));
  typename Tensor<Scalar>::Vector out = x.value();
  const Eigen::Index block = table.size();
  for (Eigen::Index b = 0; b < x.dim(0); ++b) {
    MapMat<Scalar>(out.data() + b * block, table.rows(), table.cols()) += table;
  }
  return make_result<Scalar>(x.shape(), std::move(out), {&x}, [](TensorNode<Scalar>& self) {
    self.parents[0]->accumulate(self.grad);
  });
}

// ---- convolution ------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> conv1d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& bias, Eigen::Index stride,
                      Eigen::Index padding) {
  require(x.rank() == 3 && w.rank() == 3, "conv1d: expected x[B, C, L] and w[Cout, Cin, K], got " + shape_string(x.shape()) +
                                              " and " + shape_string(w.shape()));
  const Eigen::Index batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const Eigen::Index cout = w.dim(0), k = w.dim(2);
  require(w.dim(1) == cin, "conv1d: input has " + std::to_string(cin) + " channels, weight " + shape_string(w.shape()));
  require(!bias || (bias.rank() == 1 && bias.dim(0) == cout), "conv1d: bias shape " + (bias ? shape_string(bias.shape()) : ""));
  require(stride >= 1 && padding >= 0, "conv1d: invalid stride/padding");
  const Eigen::Index lout = conv_out_length(len, k, stride, padding);
  require(lout >= 1, "conv1d: input length " + std::to_string(len) + " too short for kernel " + std::to_string(k));

  // Columns [Cin*K, B*Lout]: col(c*K + j, b*Lout + t) = x[b, c, t*stride + j - padding].
  const Eigen::Index rows = cin * k, cols = batch * lout;
  auto col = std::make_shared<RowMat<Scalar>>(rows, cols);
  const Scalar* xv = x.value().data();
  for (Eigen::Index c = 0; c < cin; ++c) {
    for (Eigen::Index j = 0; j < k; ++j) {
      Scalar* dst = col->data() + (c * k + j) * cols;
      for (Eigen::Index b = 0; b < batch; ++b) {
        const Scalar* src = xv + (b * cin + c) * len;
        for (Eigen::Index t = 0; t < lout; ++t) {
          const Eigen::Index pos = t * stride + j - padding;
          dst[b * lout + t] = (pos >= 0 && pos < len) ? src[pos] : Scalar(0);
        }
      }
    }
  }
  const RowMat<Scalar> prod = CMapMat<Scalar>(w.value().data(), cout, rows) * (*col);
  typename Tensor<Scalar>::Vector out(batch * cout * lout);
  for (Eigen::Index b = 0; b < batch; ++b) {
    MapMat<Scalar> ob(out.data() + b * cout * lout, cout, lout);
    ob = prod.middleCols(b * lout, lout);
    if (bias) ob.colwise() += bias.value();
  }

  const bool track_x = wants_grad(x);
  return make_result<Scalar>({batch, cout, lout}, std::move(out), {&x, &w, &bias},
                             [=](TensorNode<Scalar>& self) {
    // Gather the output gradient back into [Cout, B*Lout].
    RowMat<Scalar> g(cout, cols);
    for (Eigen::Index b = 0; b < batch; ++b) {
      g.middleCols(b * lout, lout) = CMapMat<Scalar>(self.grad.data() + b * cout * lout, cout, lout);
    }
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    if (pw->requires_grad) {
      typename Tensor<Scalar>::Vector gw(cout * rows);
      MapMat<Scalar>(gw.data(), cout, rows).noalias() = g * col->transpose();
      pw->accumulate(gw);
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      self.parents[2]->accumulate(g.rowwise().sum());
    }
    if (track_x && px->requires_grad) {
      const RowMat<Scalar> gcol = CMapMat<Scalar>(pw->value.data(), cout, rows).transpose() * g;
      typename Tensor<Scalar>::Vector gx = Tensor<Scalar>::Vector::Zero(batch * cin * len);
      for (Eigen::Index c = 0; c < cin; ++c) {
        for (Eigen::Index j = 0; j < k; ++j) {
          const Scalar* src = gcol.data() + (c * k + j) * cols;
          for (Eigen::Index b = 0; b < batch; ++b) {
            Scalar* dst = gx.data() + (b * cin + c) * len;
            for (Eigen::Index t = 0; t < lout; ++t) {
              const Eigen::Index pos = t * stride + j - padding;
              if (pos >= 0 && pos < len) dst[pos] += src[b * lout + t];
            }
          }
        }
      }
      px->accumulate(gx);
    }
  });
}

// ---- normalization ------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> batchnorm1d(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                           BatchNormStats<Scalar>& stats, bool train, Scalar momentum, Scalar eps) {
  require(x.rank() == 3, "batchnorm1d: expected x[B, C, L], got " + shape_string(x.shape()));
  const Eigen::Index batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  require(gamma.numel() == ch && beta.numel() == ch, "batchnorm1d: affine parameters do not match " + std::to_string(ch) + " channels");
  using Vector = typename Tensor<Scalar>::Vector;
  const Eigen::Index count = batch * len;

  Vector mean(ch), invstd(ch);
  if (train) {
    require(count > 1, "batchnorm1d: need more than one value per channel in train mode");
    Vector var(ch);
    for (Eigen::Index c = 0; c < ch; ++c) {
      double s = 0, ss = 0;
      for (Eigen::Index b = 0; b < batch; ++b) {
        const auto seg = x.value().segment((b * ch + c) * len, len);
        s += static_cast<double>(seg.sum());
      }
      const double m = s / static_cast<double>(count);
      for (Eigen::Index b = 0; b < batch; ++b) {
        const auto seg = x.value().segment((b * ch + c) * len, len);
        ss += static_cast<double>((seg.array() - static_cast<Scalar>(m)).square().sum());
      }
      mean[c] = static_cast<Scalar>(m);
      var[c] = static_cast<Scalar>(ss / static_cast<double>(count));
    }
    invstd = (var.array() + eps).rsqrt();
    const Scalar unbias = static_cast<Scalar>(count) / static_cast<Scalar>(count - 1);
    stats.running_mean.value() = (Scalar(1) - momentum) * stats.running_mean.value() + momentum * mean;
    stats.running_var.value() = (Scalar(1) - momentum) * stats.running_var.value() + momentum * unbias * var;
  } else {
    mean = stats.running_mean.value();
    invstd = (stats.running_var.value().array() + eps).rsqrt();
  }

  Vector xhat(x.numel());
  Vector out(x.numel());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index c = 0; c < ch; ++c) {
      const Eigen::Index off = (b * ch + c) * len;
      xhat.segment(off, len) = (x.value().segment(off, len).array() - mean[c]) * invstd[c];
      out.segment(off, len) = xhat.segment(off, len).array() * gamma.value()[c] + beta.value()[c];
    }
  }

  return make_result<Scalar>(x.shape(), std::move(out), {&x, &gamma, &beta},
                             [=, xhat = std::move(xhat)](TensorNode<Scalar>& self) {
    auto& px = self.parents[0];
    auto& pg = self.parents[1];
    auto& pb = self.parents[2];
    Vector dgamma = Vector::Zero(ch), dbeta = Vector::Zero(ch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index c = 0; c < ch; ++c) {
        const Eigen::Index off = (b * ch + c) * len;
        dgamma[c] += self.grad.segment(off, len).dot(xhat.segment(off, len));
        dbeta[c] += self.grad.segment(off, len).sum();
      }
    }
    if (pg->requires_grad) pg->accumulate(dgamma);
    if (pb->requires_grad) pb->accumulate(dbeta);
    if (!px->requires_grad) return;
    Vector gx(self.grad.size());
    const Scalar n = static_cast<Scalar>(count);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index c = 0; c < ch; ++c) {
        const Eigen::Index off = (b * ch + c) * len;
        const Scalar g = pg->value[c];
        if (train) {
          // d/dx of gamma * xhat with batch statistics.
          gx.segment(off, len) = (g * invstd[c] / n) *
                                 (n * self.grad.segment(off, len).array() - dbeta[c] - xhat.segment(off, len).array() * dgamma[c]);
        } else {
          gx.segment(off, len) = self.grad.segment(off, len) * (g * invstd[c]);
        }
      }
    }
    px->accumulate(gx);
  });
}

template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta, Scalar eps) {
  const Eigen::Index d = x.dim(-1);
  require(gamma.numel() == d && beta.numel() == d, "layer_norm: affine parameters do not match width " + std::to_string(d));
  const Eigen::Index rows = x.numel() / d;
  using Vector = typename Tensor<Scalar>::Vector;
  RowMat<Scalar> xhat(rows, d);
  Vector invstd(rows);
  const CMapMat<Scalar> xm(x.value().data(), rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Scalar m = xm.row(r).mean();
    const Scalar var = (xm.row(r).array() - m).square().mean();
    invstd[r] = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (xm.row(r).array() - m) * invstd[r];
  }
  Vector out(x.numel());
  MapMat<Scalar> om(out.data(), rows, d);
  om = (xhat.array().rowwise() * gamma.value().transpose().array()).rowwise() + beta.value().transpose().array();

  return make_result<Scalar>(x.shape(), std::move(out), {&x, &gamma, &beta},
                             [=, xhat = std::move(xhat)](TensorNode<Scalar>& self) {
    auto& px = self.parents[0];
    auto& pg = self.parents[1];
    auto& pb = self.parents[2];
    const CMapMat<Scalar> g(self.grad.data(), rows, d);
    if (pg->requires_grad) pg->accumulate((g.array() * xhat.array()).colwise().sum().transpose().matrix());
    if (pb->requires_grad) pb->accumulate(g.colwise().sum().transpose());
    if (!px->requires_grad) return;
    const RowMat<Scalar> gh = g.array().rowwise() * pg->value.transpose().array();
    Vector gx(self.grad.size());
    MapMat<Scalar> gm(gx.data(), rows, d);
    const Scalar n = static_cast<Scalar>(d);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Scalar s1 = gh.row(r).sum();
      const Scalar s2 = gh.row(r).dot(xhat.row(r));
      gm.row(r) = (invstd[r] / n) * (n * gh.row(r).array() - s1 - xhat.row(r).array() * s2);
    }
    px->accumulate(gx);
  });
}

// ---- pooling ------------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> maxpool1d(const Tensor<Scalar>& x, Eigen::Index kernel, Eigen::Index stride, Eigen::Index padding) {
  require(x.rank() == 3, "maxpool1d: expected x[B, C, L], got " + shape_string(x.shape()));
  require(kernel >= 1 && stride >= 1 && padding >= 0 && 2 * padding <= kernel, "maxpool1d: invalid kernel/stride/padding");
  const Eigen::Index planes = x.dim(0) * x.dim(1), len = x.dim(2);
  const Eigen::Index lout = conv_out_length(len, kernel, stride, padding);
  require(lout >= 1, "maxpool1d: input too short");
  typename Tensor<Scalar>::Vector out(planes * lout);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(planes * lout));
  for (Eigen::Index p = 0; p < planes; ++p) {
    const Scalar* src = x.value().data() + p * len;
    for (Eigen::Index t = 0; t < lout; ++t) {
      Eigen::Index best = -1;
      Scalar best_v = -std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index j = 0; j < kernel; ++j) {
        const Eigen::Index pos = t * stride + j - padding;
        if (pos < 0 || pos >= len) continue;
        if (best < 0 || src[pos] > best_v) {
          best = pos;
          best_v = src[pos];
        }
      }
      out[p * lout + t] = best_v;
      arg[static_cast<std::size_t>(p * lout + t)] = p * len + best;
    }
  }
  return make_result<Scalar>({x.dim(0), x.dim(1), lout}, std::move(out), {&x},
                             [arg = std::move(arg)](TensorNode<Scalar>& self) {
    auto& px = self.parents[0];
    typename Tensor<Scalar>::Vector gx = Tensor<Scalar>::Vector::Zero(px->value.size());
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[static_cast<Eigen::Index>(i)];
    px->accumulate(gx);
  });
}

// ---- dense --------------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& bias) {
  require(w.rank() == 2, "linear: weight must be [out, in], got " + shape_string(w.shape()));
  const Eigen::Index in = w.dim(1), outf = w.dim(0);
  require(x.dim(-1) == in, "linear: input " + shape_string(x.shape()) + " vs weight " + shape_string(w.shape()));
  require(!bias || bias.numel() == outf, "linear: bias does not match " + std::to_string(outf) + " outputs");
  const Eigen::Index rows = x.numel() / in;
  typename Tensor<Scalar>::Vector out(rows * outf);
  MapMat<Scalar> om(out.data(), rows, outf);
  om.noalias() = CMapMat<Scalar>(x.value().data(), rows, in) * CMapMat<Scalar>(w.value().data(), outf, in).transpose();
  if (bias) om.rowwise() += bias.value().transpose();
  Shape shape = x.shape();
  shape.back() = outf;
  return make_result<Scalar>(std::move(shape), std::move(out), {&x, &w, &bias}, [=](TensorNode<Scalar>& self) {
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    const CMapMat<Scalar> g(self.grad.data(), rows, outf);
    if (px->requires_grad) {
      typename Tensor<Scalar>::Vector gx(rows * in);
      MapMat<Scalar>(gx.data(), rows, in).noalias() = g * CMapMat<Scalar>(pw->value.data(), outf, in);
      px->accumulate(gx);
    }
    if (pw->requires_grad) {
      typename Tensor<Scalar>::Vector gw(outf * in);
      MapMat<Scalar>(gw.data(), outf, in).noalias() = g.transpose() * CMapMat<Scalar>(px->value.data(), rows, in);
      pw->accumulate(gw);
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) self.parents[2]->accumulate(g.colwise().sum().transpose());
  });
}

// ---- softmax / dropout / attention --------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& x, int axis) {
  const int r = x.rank();
  const int ax = axis < 0 ? axis + r : axis;
  require(ax >= 0 && ax < r, "softmax: axis out of range for " + shape_string(x.shape()));
  Eigen::Index outer = 1, inner = 1;
  const Eigen::Index n = x.dim(ax);
  for (int i = 0; i < ax; ++i) outer *= x.dim(i);
  for (int i = ax + 1; i < r; ++i) inner *= x.dim(i);
  typename Tensor<Scalar>::Vector out(x.numel());
  for (Eigen::Index o = 0; o < outer; ++o) {
    for (Eigen::Index in = 0; in < inner; ++in) {
      const Scalar* src = x.value().data() + o * n * inner + in;
      Scalar* dst = out.data() + o * n * inner + in;
      Scalar m = src[0];
      for (Eigen::Index i = 1; i < n; ++i) m = std::max(m, src[i * inner]);
      Scalar z = 0;
      for (Eigen::Index i = 0; i < n; ++i) z += (dst[i * inner] = std::exp(src[i * inner] - m));
      for (Eigen::Index i = 0; i < n; ++i) dst[i * inner] /= z;
    }
  }
  auto saved = std::make_shared<typename Tensor<Scalar>::Vector>(out);
  return make_result<Scalar>(x.shape(), std::move(out), {&x}, [=](TensorNode<Scalar>& self) {
    typename Tensor<Scalar>::Vector gx(self.grad.size());
    for (Eigen::Index o = 0; o < outer; ++o) {
      for (Eigen::Index in = 0; in < inner; ++in) {
        const Eigen::Index base = o * n * inner + in;
        Scalar dot = 0;
        for (Eigen::Index i = 0; i < n; ++i) dot += self.grad[base + i * inner] * (*saved)[base + i * inner];
        for (Eigen::Index i = 0; i < n; ++i) gx[base + i * inner] = (*saved)[base + i * inner] * (self.grad[base + i * inner] - dot);
      }
    }
    self.parents[0]->accumulate(gx);
  });
}

template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double p, bool train, KeyedRng& rng) {
  if (!train || p <= 0) return x;
  if (p >= 1) fail(ErrorCode::invalid_config, "dropout probability must be < 1");
  using Vector = typename Tensor<Scalar>::Vector;
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - p));
  Vector mask(x.numel());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < p ? Scalar(0) : keep_scale;
  Vector out = x.value().cwiseProduct(mask);
  return make_result<Scalar>(x.shape(), std::move(out), {&x}, [mask = std::move(mask)](TensorNode<Scalar>& self) {
    self.parents[0]->accumulate(self.grad.cwiseProduct(mask));
  });
}

template <typename Scalar>
Tensor<Scalar> attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v, int heads, double p,
                         bool train, KeyedRng& rng) {
  require(q.rank() == 3 && q.shape() == k.shape() && q.shape() == v.shape(),
          "attention: q, k, v must share shape [B, T, D], got " + shape_string(q.shape()) + ", " + shape_string(k.shape()) + ", " +
              shape_string(v.shape()));
  const Eigen::Index batch = q.dim(0), steps = q.dim(1), d = q.dim(2);
  require(heads >= 1 && d % heads == 0, "attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  const Eigen::Index dh = d / heads;
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const bool use_dropout = train && p > 0;
  if (use_dropout && p >= 1) fail(ErrorCode::invalid_config, "dropout probability must be < 1");
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - p));

  const Eigen::Index tt = steps * steps;
  auto probs = std::make_shared<std::vector<RowMat<Scalar>>>();   // softmax weights per (b, h)
  auto masks = std::make_shared<std::vector<RowMat<Scalar>>>();   // scaled keep masks per (b, h)
  probs->reserve(static_cast<std::size_t>(batch * heads));
  typename Tensor<Scalar>::Vector out(q.numel());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Eigen::Index off = b * steps * d + h * dh;
      const CStridedMat<Scalar> qh(q.value().data() + off, steps, dh, Eigen::OuterStride<>(d));
      const CStridedMat<Scalar> kh(k.value().data() + off, steps, dh, Eigen::OuterStride<>(d));
      const CStridedMat<Scalar> vh(v.value().data() + off, steps, dh, Eigen::OuterStride<>(d));
      RowMat<Scalar> s = (qh * kh.transpose()) * inv_sqrt;
      for (Eigen::Index i = 0; i < steps; ++i) {
        s.row(i).array() = (s.row(i).array() - s.row(i).maxCoeff()).exp();
        s.row(i) /= s.row(i).sum();
      }
      StridedMat<Scalar> oh(out.data() + off, steps, dh, Eigen::OuterStride<>(d));
      if (use_dropout) {
        RowMat<Scalar> m(steps, steps);
        for (Eigen::Index i = 0; i < tt; ++i) m.data()[i] = rng.uniform() < p ? Scalar(0) : keep_scale;
        oh.noalias() = s.cwiseProduct(m) * vh;
        masks->push_back(std::move(m));
      } else {
        oh.noalias() = s * vh;
      }
      probs->push_back(std::move(s));
    }
  }

  return make_result<Scalar>(q.shape(), std::move(out), {&q, &k, &v}, [=](TensorNode<Scalar>& self) {
    using Vector = typename Tensor<Scalar>::Vector;
    auto& pq = self.parents[0];
    auto& pk = self.parents[1];
    auto& pv = self.parents[2];
    Vector gq = Vector::Zero(pq->value.size()), gk = Vector::Zero(pk->value.size()), gv = Vector::Zero(pv->value.size());
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index h = 0; h < heads; ++h) {
        const auto idx = static_cast<std::size_t>(b * heads + h);
        const Eigen::Index off = b * steps * d + h * dh;
        const CStridedMat<Scalar> qh(pq->value.data() + off, steps, dh, Eigen::OuterStride<>(d));
        const CStridedMat<Scalar> kh(pk->value.data() + off, steps, dh, Eigen::OuterStride<>(d));
        const CStridedMat<Scalar> vh(pv->value.data() + off, steps, dh, Eigen::OuterStride<>(d));
        const CStridedMat<Scalar> go(self.grad.data() + off, steps, dh, Eigen::OuterStride<>(d));
        const RowMat<Scalar>& pr = (*probs)[idx];
        RowMat<Scalar> gp = go * vh.transpose();
        if (use_dropout) {
          const RowMat<Scalar>& m = (*masks)[idx];
          StridedMat<Scalar>(gv.data() + off, steps, dh, Eigen::OuterStride<>(d)).noalias() += pr.cwiseProduct(m).transpose() * go;
          gp = gp.cwiseProduct(m);
        } else {
          StridedMat<Scalar>(gv.data() + off, steps, dh, Eigen::OuterStride<>(d)).noalias() += pr.transpose() * go;
        }
        // Softmax backward, row by row.
        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dots = gp.cwiseProduct(pr).rowwise().sum();
        RowMat<Scalar> gs = pr.cwiseProduct((gp.colwise() - dots)) * inv_sqrt;
        StridedMat<Scalar>(gq.data() + off, steps, dh, Eigen::OuterStride<>(d)).noalias() += gs * kh;
        StridedMat<Scalar>(gk.data() + off, steps, dh, Eigen::OuterStride<>(d)).noalias() += gs.transpose() * qh;
      }
    }
    if (pq->requires_grad) pq->accumulate(gq);
    if (pk->requires_grad) pk->accumulate(gk);
    if (pv->requires_grad) pv->accumulate(gv);
  });
}

// ---- losses -------------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& probs, const std::vector<int>& labels) {
  const Eigen::Index c = probs.dim(-1);
  const Eigen::Index rows = probs.numel() / c;
  require(static_cast<Eigen::Index>(labels.size()) == rows,
          "cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  constexpr Scalar floor_p = Scalar(1e-12);
  Scalar loss = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    require(y >= 0 && y < c, "cross_entropy: label out of range");
    loss -= std::log(std::max(probs.value()[r * c + y], floor_p));
  }
  using Vector = typename Tensor<Scalar>::Vector;
  return make_result<Scalar>({}, Vector::Constant(1, loss), {&probs}, [labels, rows, c](TensorNode<Scalar>& self) {
    auto& pp = self.parents[0];
    Vector g = Vector::Zero(pp->value.size());
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index i = r * c + labels[static_cast<std::size_t>(r)];
      if (pp->value[i] > floor_p) g[i] = -self.grad[0] / pp->value[i];
    }
    pp->accumulate(g);
  });
}

template <typename Scalar>
Tensor<Scalar> cross_entropy_logits(const Tensor<Scalar>& logits, const std::vector<int>& labels) {
  const Eigen::Index c = logits.dim(-1);
  const Eigen::Index rows = logits.numel() / c;
  require(static_cast<Eigen::Index>(labels.size()) == rows,
          "cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  using Vector = typename Tensor<Scalar>::Vector;
  auto soft = std::make_shared<RowMat<Scalar>>(rows, c);
  const CMapMat<Scalar> lm(logits.value().data(), rows, c);
  Scalar loss = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    require(y >= 0 && y < c, "cross_entropy: label out of range");
    const Scalar m = lm.row(r).maxCoeff();
    soft->row(r) = (lm.row(r).array() - m).exp();
    const Scalar z = soft->row(r).sum();
    soft->row(r) /= z;
    loss += m + std::log(z) - lm(r, y);
  }
  return make_result<Scalar>({}, Vector::Constant(1, loss), {&logits}, [soft, labels, rows, c](TensorNode<Scalar>& self) {
    Vector g(rows * c);
    MapMat<Scalar> gm(g.data(), rows, c);
    gm = *soft;
    for (Eigen::Index r = 0; r < rows; ++r) gm(r, labels[static_cast<std::size_t>(r)]) -= Scalar(1);
    self.parents[0]->accumulate(g * self.grad[0]);
  });
}

// ---- instantiation -------------------------------------------------------------------------

#define SNZ_INSTANTIATE(S)                                                                                                  \
  template struct TensorNode<S>;                                                                                            \
  template class Tensor<S>;                                                                                                 \
  template void backward<S>(const Tensor<S>&);                                                                              \
  template Tensor<S> add<S>(const Tensor<S>&, const Tensor<S>&);                                                            \
  template Tensor<S> mul<S>(const Tensor<S>&, const Tensor<S>&);                                                            \
  template Tensor<S> scale<S>(const Tensor<S>&, S);                                                                         \
  template Tensor<S> sum<S>(const Tensor<S>&);                                                                              \
  template Tensor<S> relu<S>(const Tensor<S>&);                                                                             \
  template Tensor<S> reshape<S>(const Tensor<S>&, Shape);                                                                   \
  template Tensor<S> transpose12<S>(const Tensor<S>&);                                                                      \
  template Tensor<S> concat<S>(const std::vector<Tensor<S>>&, int);                                                         \
  template Tensor<S> add_broadcast_constant<S>(const Tensor<S>&, const RowMat<S>&);                                         \
  template Tensor<S> conv1d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Eigen::Index, Eigen::Index);           \
  template Tensor<S> batchnorm1d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, BatchNormStats<S>&, bool, S, S);  \
  template Tensor<S> maxpool1d<S>(const Tensor<S>&, Eigen::Index, Eigen::Index, Eigen::Index);                              \
  template Tensor<S> linear<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);                                       \
  template Tensor<S> layer_norm<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);                                \
  template Tensor<S> softmax<S>(const Tensor<S>&, int);                                                                     \
  template Tensor<S> dropout<S>(const Tensor<S>&, double, bool, KeyedRng&);                                                 \
  template Tensor<S> attention<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, int, double, bool, KeyedRng&);      \
  template Tensor<S> cross_entropy<S>(const Tensor<S>&, const std::vector<int>&);                                           \
  template Tensor<S> cross_entropy_logits<S>(const Tensor<S>&, const std::vector<int>&);

SNZ_INSTANTIATE(float)
SNZ_INSTANTIATE(double)

#undef SNZ_INSTANTIATE

}  // namespace snz
