#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "test_util.hpp"
#include "vosmem/autograd.hpp"

namespace vosmem {
namespace {

using autograd::Var;
using testing::random_tensor;

// Scalar projection <w, x> with a fixed random w, so every output element
// contributes a distinct weight to the gradient.
Var<double> project(const Var<double>& x, const Tensor<double>& w) {
  Tensor<double> out(1, 1, 1);
  for (std::size_t i = 0; i < w.size(); ++i) out[0] += w[i] * x->value[i];
  return autograd::make_node<double>(std::move(out), {x}, [w](autograd::Node<double>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += self.grad[0] * w[i];
  });
}

using Op = std::function<Var<double>(const std::vector<Var<double>>&)>;

// Compares analytic gradients of <w, op(inputs)> against central differences
// for every element of every input.
void check_gradients(std::vector<Tensor<double>> inputs, const Op& op, double tol = 1e-7) {
  std::mt19937_64 rng(42);
  std::vector<Var<double>> vars;
  for (auto& t : inputs) vars.push_back(autograd::parameter(t));
  const auto out = op(vars);
  const auto w = random_tensor<double>(out->value.shape(), rng);
  autograd::backward(project(out, w));

  auto eval = [&](const std::vector<Tensor<double>>& in) {
    autograd::NoGradGuard guard;
    std::vector<Var<double>> v;
    for (const auto& t : in) v.push_back(autograd::constant(t));
    return project(op(v), w)->value[0];
  };
  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    ASSERT_TRUE(vars[k]->has_grad()) << "input " << k;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto up = inputs, down = inputs;
      up[k][i] += h;
      down[k][i] -= h;
      const double fd = (eval(up) - eval(down)) / (2 * h);
      EXPECT_NEAR(vars[k]->grad[i], fd, tol * std::max(1.0, std::abs(fd))) << "input " << k << " element " << i;
    }
  }
}

std::mt19937_64& rng() {
  static std::mt19937_64 r(7);
  return r;
}

TEST(AutogradOps, Conv2d) {
  for (int k : {1, 3, 5}) {
    check_gradients({random_tensor<double>({2, 5, 6}, rng()), random_tensor<double>({3, 2 * k * k, 1}, rng()),
                     random_tensor<double>({3, 1, 1}, rng())},
                    [k](const auto& v) { return autograd::conv2d(v[0], v[1], v[2], k); });
  }
}

TEST(AutogradOps, Elementwise) {
  auto x = random_tensor<double>({2, 3, 4}, rng(), -2, 2);
  for (auto& v : x.values()) {
    if (std::abs(v) < 0.05) v = 0.3;  // keep away from the ReLU kink
  }
  check_gradients({x}, [](const auto& v) { return autograd::relu(v[0]); });
  check_gradients({x}, [](const auto& v) { return autograd::sigmoid(v[0]); });
  check_gradients({x}, [](const auto& v) { return autograd::tanh(v[0]); });
  check_gradients({x}, [](const auto& v) { return autograd::scale(v[0], -2.5); });
  const auto y = random_tensor<double>({2, 3, 4}, rng());
  check_gradients({x, y}, [](const auto& v) { return autograd::add(v[0], v[1]); });
  check_gradients({x, y}, [](const auto& v) { return autograd::mul(v[0], v[1]); });
  check_gradients({x}, [](const auto& v) { return autograd::mul(v[0], v[0]); });
}

TEST(AutogradOps, PoolAndUpsample) {
  check_gradients({random_tensor<double>({2, 4, 6}, rng())}, [](const auto& v) { return autograd::maxpool2(v[0]); });
  check_gradients({random_tensor<double>({2, 3, 5}, rng())}, [](const auto& v) { return autograd::upsample2(v[0]); });
}

TEST(AutogradOps, ChannelOps) {
  const auto a = random_tensor<double>({2, 3, 3}, rng());
  const auto b = random_tensor<double>({3, 3, 3}, rng());
  check_gradients({a, b}, [](const auto& v) {
    std::vector<Var<double>> parts{v[0], v[1], v[0]};
    return autograd::concat<double>(parts);
  });
  check_gradients({b}, [](const auto& v) { return autograd::slice_channels(v[0], 1, 2); });
  check_gradients({random_tensor<double>({5, 2, 3}, rng(), -3, 3)},
                  [](const auto& v) { return autograd::softmax_channels(v[0]); });
  check_gradients({random_tensor<double>({4, 1, 1}, rng())}, [](const auto& v) { return autograd::softmax_all(v[0]); });
  check_gradients({a, random_tensor<double>({3, 1, 1}, rng())},
                  [](const auto& v) { return autograd::scale_by(v[0], v[1], 2); });
}

TEST(AutogradOps, SumScalarsAndSharedParents) {
  const auto s = random_tensor<double>({1, 1, 1}, rng());
  check_gradients({s, random_tensor<double>({1, 1, 1}, rng())}, [](const auto& v) {
    std::vector<Var<double>> parts{v[0], v[1], v[0], autograd::mul(v[0], v[1])};
    return autograd::sum_scalars<double>(parts);
  });
}

TEST(AutogradOps, SoftmaxChannelsSumsToOne) {
  auto x = autograd::constant(random_tensor<double>({6, 4, 5}, rng(), -40, 40));
  const auto p = autograd::softmax_channels(x);
  for (int y = 0; y < 4; ++y) {
    for (int xx = 0; xx < 5; ++xx) {
      double s = 0;
      for (int c = 0; c < 6; ++c) s += p->value.at(c, y, xx);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Autograd, NoGradGuardSkipsRecording) {
  auto p = autograd::parameter(random_tensor<double>({1, 2, 2}, rng()));
  {
    autograd::NoGradGuard guard;
    EXPECT_FALSE(autograd::grad_enabled());
    const auto y = autograd::sigmoid(p);
    EXPECT_FALSE(y->requires_grad);
    EXPECT_TRUE(y->parents.empty());
  }
  EXPECT_TRUE(autograd::grad_enabled());
  EXPECT_TRUE(autograd::sigmoid(p)->requires_grad);
}

TEST(Autograd, BackwardRequiresScalarRoot) {
  auto p = autograd::parameter(Tensor<double>(2, 1, 1));
  EXPECT_THROW(autograd::backward(autograd::scale(p, 2.0)), ConfigError);
}

TEST(Autograd, GradientsAccumulateAcrossBackwardCalls) {
  auto p = autograd::parameter(Tensor<double>(1, 1, 1, 3.0));
  autograd::backward(autograd::mul(p, p));
  autograd::backward(autograd::mul(p, p));
  EXPECT_DOUBLE_EQ(p->grad[0], 12.0);
}

TEST(Autograd, ShapeMismatchIsConfigError) {
  auto a = autograd::constant(Tensor<double>(1, 2, 2)), b = autograd::constant(Tensor<double>(1, 2, 3));
  EXPECT_THROW(autograd::add(a, b), ConfigError);
}

TEST(Autograd, FingerprintTracksReluSides) {
  Tensor<double> x(1, 1, 3);
  x[0] = 1;
  x[1] = -1;
  x[2] = 2;
  std::uint64_t a, b, c;
  {
    autograd::ActivationFingerprint fp;
    autograd::relu(autograd::constant(x));
    a = fp.value();
  }
  {
    autograd::ActivationFingerprint fp;
    autograd::relu(autograd::constant(x));
    b = fp.value();
  }
  x[1] = 0.5;
  {
    autograd::ActivationFingerprint fp;
    autograd::relu(autograd::constant(x));
    c = fp.value();
  }
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

}  // namespace
}  // namespace vosmem
