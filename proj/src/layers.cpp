#include "levelnet/layers.hpp"

#include <cmath>
#include <limits>

#include "levelnet/error.hpp"

namespace levelnet::nn {

using ag::ConvGeom;
using ag::Shape;

std::vector<double> fan_in_init(std::size_t count, int fan_in, std::mt19937_64& rng) {
  // Std of a unit normal truncated to [-2, 2].
  constexpr double kTruncStd = 0.87962566103423978;
  const double std = std::sqrt(1.0 / std::max(fan_in, 1)) / kTruncStd;
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(count);
  for (auto& x : v) {
    double s;
    do s = n(rng);
    while (std::abs(s) > 2.0);
    x = s * std;
  }
  return v;
}

Dense::Dense(int in, int out, std::mt19937_64& rng)
    : weight(Tensor::parameter({in, out}, fan_in_init(static_cast<std::size_t>(in) * out, in, rng))),
      bias(Tensor::parameter({out}, std::vector<double>(out, 0.0))) {}

Dense::Dense(Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)) {}

Tensor Dense::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_features())
    throw ShapeError("dense layer expects (B, " + std::to_string(in_features()) + "), got " +
                     ag::to_string(x.shape()));
  return ag::add_bias(ag::matmul(x, weight), bias);
}

void Dense::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Conv2d::Conv2d(int in_channels, int out_channels, int k, int s, std::mt19937_64& rng)
    : kernel(k),
      stride(s),
      weight(Tensor::parameter(
          {k, k, in_channels, out_channels},
          fan_in_init(static_cast<std::size_t>(k) * k * in_channels * out_channels,
                      k * k * in_channels, rng))),
      bias(Tensor::parameter({out_channels}, std::vector<double>(out_channels, 0.0))) {}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.rank() != 4) throw ShapeError("conv expects NHWC input, got " + ag::to_string(x.shape()));
  auto g = ConvGeom::same(x.dim(1), x.dim(2), kernel, kernel, stride, stride);
  return ag::add_bias(ag::conv2d(x, weight, g), bias);
}

void Conv2d::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int k, int s,
                                 std::mt19937_64& rng)
    : kernel(k),
      stride(s),
      weight(Tensor::parameter(
          {k, k, out_channels, in_channels},
          fan_in_init(static_cast<std::size_t>(k) * k * in_channels * out_channels,
                      k * k * in_channels, rng))),
      bias(Tensor::parameter({out_channels}, std::vector<double>(out_channels, 0.0))) {}

Tensor ConvTranspose2d::forward(const Tensor& x, int out_h, int out_w) const {
  if (x.rank() != 4) throw ShapeError("transposed conv expects NHWC input");
  auto g = ConvGeom::same(out_h, out_w, kernel, kernel, stride, stride);
  if (g.out_h != x.dim(1) || g.out_w != x.dim(2))
    throw ShapeError("transposed conv cannot map " + std::to_string(x.dim(1)) + "x" +
                     std::to_string(x.dim(2)) + " to " + std::to_string(out_h) + "x" +
                     std::to_string(out_w) + " with stride " + std::to_string(stride));
  return ag::add_bias(ag::conv2d_input_grad(x, weight, g), bias);
}

void ConvTranspose2d::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

BatchNorm::BatchNorm(int channels, double m, double eps)
    : momentum(m),
      epsilon(eps),
      gamma(Tensor::parameter({channels}, std::vector<double>(channels, 1.0))),
      beta(Tensor::parameter({channels}, std::vector<double>(channels, 0.0))),
      running_mean(Tensor::zeros({channels})),
      running_var(Tensor::full({channels}, 1.0)) {}

Tensor BatchNorm::forward(const Tensor& x, const ForwardContext& ctx) {
  const int c = x.shape().back();
  if (c != gamma.dim(0)) throw ShapeError("batchnorm channel mismatch");
  const Shape shape = x.shape();
  if (ctx.training) {
    const double n = static_cast<double>(x.size() / c);
    Tensor mean = ag::scale(ag::sum_rows(x), 1.0 / n);
    Tensor centered = ag::sub(x, ag::expand_rows(mean, shape));
    Tensor var = ag::scale(ag::sum_rows(ag::square(centered)), 1.0 / n);
    Tensor inv = ag::div(Tensor::full({c}, 1.0), ag::sqrt(ag::add_scalar(var, epsilon)));
    if (ctx.update_stats) {
      auto& rm = running_mean.mutable_values();
      auto& rv = running_var.mutable_values();
      for (int k = 0; k < c; ++k) {
        rm[k] = momentum * rm[k] + (1 - momentum) * mean[k];
        rv[k] = momentum * rv[k] + (1 - momentum) * var[k];
      }
    }
    Tensor y = ag::mul(centered, ag::expand_rows(ag::mul(inv, gamma), shape));
    return ag::add_bias(y, beta);
  }
  std::vector<double> inv(c);
  for (int k = 0; k < c; ++k) inv[k] = 1.0 / std::sqrt(running_var[k] + epsilon);
  Tensor centered = ag::sub(x, ag::expand_rows(running_mean, shape));
  Tensor factor = ag::mul(gamma, Tensor::constant({c}, std::move(inv)));
  return ag::add_bias(ag::mul(centered, ag::expand_rows(factor, shape)), beta);
}

void BatchNorm::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

void BatchNorm::collect_buffers(std::vector<NamedTensor>& out, const std::string& prefix) const {
  out.push_back({prefix + ".running_mean", running_mean});
  out.push_back({prefix + ".running_var", running_var});
}

Tensor max_pool(const Tensor& x, int kernel, int stride) {
  if (x.rank() != 4) throw ShapeError("max_pool expects NHWC input");
  const int B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  auto g = ConvGeom::same(H, W, kernel, kernel, stride, stride);
  auto idx = std::make_shared<std::vector<int>>(static_cast<std::size_t>(B) * g.out_h * g.out_w * C);
  const auto& v = x.values();
  std::size_t k = 0;
  for (int b = 0; b < B; ++b)
    for (int oh = 0; oh < g.out_h; ++oh)
      for (int ow = 0; ow < g.out_w; ++ow)
        for (int c = 0; c < C; ++c) {
          int best = -1;
          double best_v = -std::numeric_limits<double>::infinity();
          for (int i = 0; i < kernel; ++i) {
            int ih = oh * stride + i - g.pad_t;
            if (ih < 0 || ih >= H) continue;
            for (int j = 0; j < kernel; ++j) {
              int iw = ow * stride + j - g.pad_l;
              if (iw < 0 || iw >= W) continue;
              int flat = ((b * H + ih) * W + iw) * C + c;
              if (best < 0 || v[flat] > best_v) {
                best = flat;
                best_v = v[flat];
              }
            }
          }
          (*idx)[k++] = best;
        }
  return ag::gather(x, std::move(idx), {B, g.out_h, g.out_w, C});
}

Tensor upsample_nearest(const Tensor& x, int out_h, int out_w) {
  if (x.rank() != 4) throw ShapeError("upsample expects NHWC input");
  const int B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  if (H == out_h && W == out_w) return x;
  auto idx = std::make_shared<std::vector<int>>(static_cast<std::size_t>(B) * out_h * out_w * C);
  std::size_t k = 0;
  for (int b = 0; b < B; ++b)
    for (int oh = 0; oh < out_h; ++oh) {
      const int ih = oh * H / out_h;
      for (int ow = 0; ow < out_w; ++ow) {
        const int iw = ow * W / out_w;
        for (int c = 0; c < C; ++c) (*idx)[k++] = ((b * H + ih) * W + iw) * C + c;
      }
    }
  return ag::gather(x, std::move(idx), {B, out_h, out_w, C});
}

Tensor dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  if (!ctx.training || rate <= 0.0) return x;
  if (!ctx.rng) throw ShapeError("dropout in training mode needs an rng");
  std::bernoulli_distribution keep(1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  const double s = 1.0 / (1.0 - rate);
  for (auto& m : *mask) m = keep(*ctx.rng) ? s : 0.0;
  return ag::mul_const(x, std::move(mask));
}

Tensor gaussian_noise(const Tensor& x, double sigma, const ForwardContext& ctx) {
  if (!ctx.noise || sigma <= 0.0) return x;
  if (!ctx.rng) throw ShapeError("noise layer needs an rng");
  std::normal_distribution<double> n(0.0, sigma);
  auto noise = std::make_shared<std::vector<double>>(x.size());
  for (auto& v : *noise) v = n(*ctx.rng);
  return ag::add_const(x, std::move(noise));
}

InceptionBlock::InceptionBlock(int in, int width, int stride, double slope, std::mt19937_64& rng)
    : width_(width),
      stride_(stride),
      slope_(slope),
      b1_(in, width, 1, stride, rng),
      b2_reduce_(in, width, 1, 1, rng),
      b2_(width, width, 3, stride, rng),
      b3_reduce_(in, width, 1, 1, rng),
      b3_(width, width, 5, stride, rng),
      b4_(in, width, 1, 1, rng) {}

Tensor InceptionBlock::forward(const Tensor& x) const {
  Tensor a = b1_.forward(x);
  Tensor b = b2_.forward(ag::leaky_relu(b2_reduce_.forward(x), slope_));
  Tensor c = b3_.forward(ag::leaky_relu(b3_reduce_.forward(x), slope_));
  Tensor d = b4_.forward(max_pool(x, 3, stride_));
  return ag::concat_last({a, b, c, d});
}

void InceptionBlock::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  b1_.collect(out, prefix + ".b1");
  b2_reduce_.collect(out, prefix + ".b2_reduce");
  b2_.collect(out, prefix + ".b2");
  b3_reduce_.collect(out, prefix + ".b3_reduce");
  b3_.collect(out, prefix + ".b3");
  b4_.collect(out, prefix + ".b4");
}

TransposedInceptionBlock::TransposedInceptionBlock(int in, int width, int stride, double slope,
                                                   std::mt19937_64& rng)
    : width_(width),
      stride_(stride),
      slope_(slope),
      b1_(in, width, 1, 1, rng),
      b2_reduce_(in, width, 1, 1, rng),
      b2_(width, width, 3, stride, rng),
      b3_reduce_(in, width, 1, 1, rng),
      b3_(width, width, 5, stride, rng),
      b4_(in, width, 1, 1, rng) {}

Tensor TransposedInceptionBlock::forward(const Tensor& x, int out_h, int out_w) const {
  const int h = x.dim(1), w = x.dim(2);
  Tensor a = b1_.forward(upsample_nearest(x, out_h, out_w), out_h, out_w);
  Tensor b = b2_.forward(ag::leaky_relu(b2_reduce_.forward(x, h, w), slope_), out_h, out_w);
  Tensor c = b3_.forward(ag::leaky_relu(b3_reduce_.forward(x, h, w), slope_), out_h, out_w);
  Tensor d = b4_.forward(upsample_nearest(max_pool(x, 3, 1), out_h, out_w), out_h, out_w);
  return ag::concat_last({a, b, c, d});
}

void TransposedInceptionBlock::collect(std::vector<NamedTensor>& out,
                                       const std::string& prefix) const {
  b1_.collect(out, prefix + ".b1");
  b2_reduce_.collect(out, prefix + ".b2_reduce");
  b2_.collect(out, prefix + ".b2");
  b3_reduce_.collect(out, prefix + ".b3_reduce");
  b3_.collect(out, prefix + ".b3");
  b4_.collect(out, prefix + ".b4");
}

}  // namespace levelnet::nn
