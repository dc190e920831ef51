#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "levelnet/autograd.hpp"
#include "levelnet/layers.hpp"
#include "oracles.hpp"

using namespace levelnet;
using ag::Tensor;

namespace {

Tensor random_param(ag::Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(ag::numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::parameter(std::move(shape), std::move(v));
}

// Compares autograd gradients of f with central differences on every entry.
void check_gradients(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                     double tol = 1e-6) {
  const auto grads = ag::grad(f(), inputs);
  auto value = [&] {
    ag::GradModeGuard off(false);
    return f().item();
  };
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double fd = oracle::central_difference(inputs[k], i, value);
      EXPECT_NEAR(grads[k][i], fd, tol * std::max(1.0, std::abs(fd)))
          << "input " << k << " entry " << i;
    }
}

// Fixed random projection to a scalar so every output entry matters.
Tensor project(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  auto w = std::make_shared<std::vector<double>>(y.size());
  for (auto& x : *w) x = u(rng);
  return ag::sum_all(ag::mul_const(y, w));
}

}  // namespace

TEST(Autograd, ElementwiseOps) {
  std::mt19937_64 rng(1);
  auto a = random_param({3, 4}, rng, 0.5, 2.0), b = random_param({3, 4}, rng, 0.5, 2.0);
  check_gradients([&] { return project(ag::div(ag::mul(a, ag::exp(b)), ag::sqrt(a + b)), 1); },
                  {a, b});
  check_gradients([&] { return project(ag::log(ag::square(a) - b * 0.1), 2); }, {a, b});
  check_gradients([&] { return project(ag::leaky_relu(a - b, 0.2), 3); }, {a, b});
}

TEST(Autograd, ReductionsAndStructure) {
  std::mt19937_64 rng(2);
  auto a = random_param({2, 3, 4}, rng), v = random_param({4}, rng);
  check_gradients([&] { return project(ag::expand_last(ag::sum_last(a), 5), 4); }, {a});
  check_gradients([&] { return project(ag::add_bias(a, v), 5); }, {a, v});
  check_gradients([&] { return project(ag::expand_rows(ag::sum_rows(a), {3, 4}), 6); }, {a});
  check_gradients([&] { return ag::mean_all(ag::square(ag::reshape(a, {6, 4}))); }, {a});
  check_gradients(
      [&] {
        return project(ag::concat_last({ag::slice_last(a, 1, 2), a, ag::embed_last(a, 2, 7)}), 7);
      },
      {a});
}

TEST(Autograd, MatmulAndSoftmax) {
  std::mt19937_64 rng(3);
  auto a = random_param({3, 5}, rng), b = random_param({5, 2}, rng);
  check_gradients([&] { return project(ag::matmul(a, b), 8); }, {a, b});
  check_gradients([&] { return project(ag::transpose2d(a), 9); }, {a});
  check_gradients([&] { return project(ag::softmax_last(a), 10); }, {a});
}

TEST(Autograd, SoftmaxFibersSumToOne) {
  std::mt19937_64 rng(4);
  auto a = random_param({4, 9}, rng, -30, 30);
  const auto s = ag::softmax_last(a);
  for (int r = 0; r < 4; ++r) {
    double t = 0;
    for (int c = 0; c < 9; ++c) t += s[r * 9 + c];
    EXPECT_NEAR(t, 1.0, 1e-12);
  }
}

TEST(Autograd, ConvolutionsStridedAndTransposed) {
  std::mt19937_64 rng(5);
  auto x = random_param({2, 5, 7, 3}, rng), w = random_param({3, 3, 3, 4}, rng);
  const auto g = ag::ConvGeom::same(5, 7, 3, 3, 2, 2);
  EXPECT_EQ(g.out_h, 3);
  EXPECT_EQ(g.out_w, 4);
  check_gradients([&] { return project(ag::conv2d(x, w, g), 11); }, {x, w});
  auto gy = random_param({2, 3, 4, 4}, rng);
  check_gradients([&] { return project(ag::conv2d_input_grad(gy, w, g), 12); }, {gy, w});
  check_gradients([&] { return project(ag::conv2d_weight_grad(x, gy, g), 13); }, {x, gy});
}

TEST(Autograd, ConvolutionMatchesDirectSum) {
  std::mt19937_64 rng(6);
  auto x = random_param({1, 4, 6, 2}, rng), w = random_param({3, 3, 2, 3}, rng);
  const auto g = ag::ConvGeom::same(4, 6, 3, 3, 1, 1);
  const auto y = ag::conv2d(x, w, g);
  for (int oh = 0; oh < 4; ++oh)
    for (int ow = 0; ow < 6; ++ow)
      for (int co = 0; co < 3; ++co) {
        double s = 0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            const int ih = oh + i - 1, iw = ow + j - 1;
            if (ih < 0 || ih >= 4 || iw < 0 || iw >= 6) continue;
            for (int ci = 0; ci < 2; ++ci)
              s += x[(ih * 6 + iw) * 2 + ci] * w[((i * 3 + j) * 2 + ci) * 3 + co];
          }
        EXPECT_NEAR(y[(oh * 6 + ow) * 3 + co], s, 1e-12);
      }
}

TEST(Autograd, PoolingUpsamplingGatherScatter) {
  std::mt19937_64 rng(7);
  auto x = random_param({2, 5, 6, 2}, rng);
  check_gradients([&] { return project(nn::max_pool(x, 3, 2), 14); }, {x});
  check_gradients([&] { return project(nn::upsample_nearest(x, 9, 11), 15); }, {x});
  auto idx = std::make_shared<std::vector<int>>(std::vector<int>{3, 0, 3, 7, 1});
  auto v = random_param({8}, rng);
  check_gradients([&] { return project(ag::gather(v, idx, {5}), 16); }, {v});
  auto s = random_param({5}, rng);
  check_gradients([&] { return project(ag::scatter_add(s, idx, {8}), 17); }, {s});
}

TEST(Autograd, BatchNormTrainingMode) {
  std::mt19937_64 rng(8);
  nn::BatchNorm bn(3);
  auto x = random_param({4, 2, 2, 3}, rng);
  nn::ForwardContext ctx;
  ctx.training = true;
  check_gradients([&] { return project(bn.forward(x, ctx), 18); }, {x, bn.gamma, bn.beta}, 1e-5);
}

TEST(Autograd, SecondOrderGradient) {
  // d/dw of ||d f / d x||^2 for f = sum(tanh-free smooth net) checked by
  // differencing the first-order gradient norm.
  std::mt19937_64 rng(9);
  auto x = random_param({2, 4}, rng), w = random_param({4, 3}, rng);
  auto f = [&] { return ag::sum_all(ag::exp(ag::scale(ag::matmul(x, w), 0.5))); };
  auto penalty = [&] {
    const auto gx = ag::grad(f(), {x}, true)[0];
    return ag::sum_all(ag::square(gx));
  };
  const auto gw = ag::grad(penalty(), {w})[0];
  auto value = [&] { return penalty().item(); };
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double fd = oracle::central_difference(w, i, value);
    EXPECT_NEAR(gw[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Autograd, NoGradModeRecordsNothing) {
  std::mt19937_64 rng(10);
  auto a = random_param({3}, rng);
  ag::GradModeGuard off(false);
  EXPECT_FALSE(ag::square(a).requires_grad());
}

TEST(Autograd, UnreachableInputsGetZeros) {
  std::mt19937_64 rng(11);
  auto a = random_param({3}, rng), b = random_param({2}, rng);
  const auto g = ag::grad(ag::sum_all(a), {a, b});
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(g[1][i], 0.0);
  EXPECT_EQ(g[0][0], 1.0);
}
