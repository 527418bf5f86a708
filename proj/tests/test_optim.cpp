#include <doctest.h>

#include <cmath>

#include "snz/error.hpp"
#include "snz/optim.hpp"

using namespace snz;
using T = Tensor<double>;

TEST_CASE("zero gradients without decay leave parameters unchanged") {
  T p = T::from({3}, Eigen::Vector3d(1.5, -2, 0.25), true);
  const Eigen::VectorXd before = p.value();
  AdamW<double> opt({{"p", p}}, {0.1, 0.0});
  for (int i = 0; i < 5; ++i) {
    p.grad_buffer() = Eigen::VectorXd::Zero(3);
    opt.step();
  }
  CHECK(p.value() == before);
}

TEST_CASE("decoupled weight decay with zero gradient") {
  T p = T::from({3}, Eigen::Vector3d(1.5, -2, 0.25), true);
  const Eigen::VectorXd before = p.value();
  AdamW<double> opt({{"p", p}}, {1.1e-4, 1e-5});
  p.grad_buffer() = Eigen::VectorXd::Zero(3);
  opt.step();
  CHECK(p.value() == before * (1 - 1.1e-4 * 1e-5));
}

TEST_CASE("first step moves each element by lr against the gradient sign") {
  T p = T::from({2}, Eigen::Vector2d(1, 1), true);
  AdamW<double> opt({{"p", p}}, {0.01, 0.0});
  p.grad_buffer() = Eigen::Vector2d(3, -0.5);
  opt.step();
  CHECK(p.value()[0] == doctest::Approx(0.99).epsilon(1e-9));
  CHECK(p.value()[1] == doctest::Approx(1.01).epsilon(1e-9));
}

TEST_CASE("converges on a scalar quadratic") {
  T p = T::scalar(0.0, true);
  AdamW<double> opt({{"p", p}}, {0.1, 0.0});
  for (int i = 0; i < 500; ++i) {
    p.zero_grad();
    T d = add(p, T::scalar(-3.0));
    backward(mul(d, d));
    opt.step();
  }
  CHECK(std::abs(p.item() - 3.0) < 1e-2);
}

TEST_CASE("non-finite gradient names the parameter") {
  T a = T::scalar(1.0, true), b = T::scalar(1.0, true);
  AdamW<double> opt({{"encoder.0.ff1.weight", a}, {"head.fc2.bias", b}}, {});
  a.grad_buffer() = Eigen::VectorXd::Zero(1);
  b.grad_buffer() = Eigen::VectorXd::Constant(1, NAN);
  try {
    opt.step();
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::non_finite_gradient);
    CHECK(std::string(e.what()).find("head.fc2.bias") != std::string::npos);
  }
  CHECK(a.item() == 1.0);
}
