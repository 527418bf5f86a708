#include "snz/optim.hpp"

#include <cmath>

#include "snz/error.hpp"

namespace snz {

template <typename Scalar>
AdamW<Scalar>::AdamW(std::vector<std::pair<std::string, Tensor<Scalar>>> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr >= 0) || !(cfg_.weight_decay >= 0) || !(cfg_.beta1 >= 0 && cfg_.beta1 < 1) || !(cfg_.beta2 >= 0 && cfg_.beta2 < 1) ||
      !(cfg_.eps > 0)) {
    fail(ErrorCode::invalid_config, "AdamW: lr and weight decay must be >= 0, betas in [0, 1), eps > 0");
  }
  for (const auto& [name, t] : params_) {
    m_.push_back(Vector::Zero(t.numel()));
    v_.push_back(Vector::Zero(t.numel()));
  }
}

template <typename Scalar>
void AdamW<Scalar>::step() {
  for (const auto& [name, t] : params_) {
    if (t.has_grad() && !t.node()->grad.allFinite()) fail(ErrorCode::non_finite_gradient, "non-finite gradient in " + name);
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  const Scalar decay = static_cast<Scalar>(1.0 - cfg_.lr * cfg_.weight_decay);
  const Scalar b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
  const Scalar step_size = static_cast<Scalar>(cfg_.lr / bc1);
  const Scalar sqrt_bc2 = static_cast<Scalar>(std::sqrt(bc2));
  const Scalar eps = static_cast<Scalar>(cfg_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<Scalar>& p = params_[i].second;
    Vector& m = m_[i];
    Vector& v = v_[i];
    if (cfg_.weight_decay != 0) p.value() *= decay;
    if (!p.has_grad()) {
      m *= b1;
      v *= b2;
    } else {
      const Vector& g = p.node()->grad;
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    }
    p.value().array() -= step_size * m.array() / (v.array().sqrt() / sqrt_bc2 + eps);
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace snz
