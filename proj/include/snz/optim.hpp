#pragma once

#include <string>
#include <utility>
#include <vector>

#include "snz/tensor.hpp"

namespace snz {

struct AdamWConfig {
  double lr = 1.1e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with decoupled weight decay: p <- p (1 - lr wd), then the bias-corrected
/// Adam step. Tensors without an accumulated gradient are treated as zero-gradient.
template <typename Scalar>
class AdamW {
 public:
  using Vector = typename Tensor<Scalar>::Vector;

  AdamW(std::vector<std::pair<std::string, Tensor<Scalar>>> params, AdamWConfig cfg);

  /// Throws non-finite-gradient (naming the tensor) before touching any value.
  void step();
  long steps() const { return steps_; }
  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  std::vector<std::pair<std::string, Tensor<Scalar>>> params_;
  std::vector<Vector> m_, v_;
  AdamWConfig cfg_;
  long steps_ = 0;
};

}  // namespace snz
