#pragma once

#include <random>
#include <string>
#include <vector>

#include "levelnet/autograd.hpp"

namespace levelnet::nn {

using ag::Tensor;

/// Per-call switches for stochastic layers.
struct ForwardContext {
  bool training = false;      // dropout active, batchnorm uses batch statistics
  bool noise = false;         // discriminator input noise
  bool update_stats = false;  // batchnorm running statistics are updated
  std::mt19937_64* rng = nullptr;

  static ForwardContext eval() { return {}; }
  static ForwardContext train(std::mt19937_64& rng) { return {true, true, true, &rng}; }
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Truncated normal (cut at two standard deviations) scaled by 1/sqrt(fan_in).
std::vector<double> fan_in_init(std::size_t count, int fan_in, std::mt19937_64& rng);

class Dense {
 public:
  Dense() = default;
  Dense(int in, int out, std::mt19937_64& rng);
  /// Wraps existing parameter tensors; the layer aliases them.
  Dense(Tensor weight, Tensor bias);

  /// x (B, in) -> (B, out).
  Tensor forward(const Tensor& x) const;
  int in_features() const { return weight.dim(0); }
  int out_features() const { return weight.dim(1); }
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;

  Tensor weight;  // (in, out)
  Tensor bias;    // (out)
};

/// "same"-padded 2-D convolution.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;

  int kernel = 1, stride = 1;
  Tensor weight;  // (k, k, in, out)
  Tensor bias;
};

/// Transposed convolution producing an explicit output size; the matching
/// forward convolution must map that size back onto the input.
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride,
                  std::mt19937_64& rng);
  Tensor forward(const Tensor& x, int out_h, int out_w) const;
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;

  int kernel = 1, stride = 1;
  Tensor weight;  // (k, k, out, in)
  Tensor bias;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(int channels, double momentum = 0.99, double epsilon = 1e-3);
  /// Normalizes over every axis but the last.
  Tensor forward(const Tensor& x, const ForwardContext& ctx);
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;
  void collect_buffers(std::vector<NamedTensor>& out, const std::string& prefix) const;

  double momentum = 0.99, epsilon = 1e-3;
  Tensor gamma, beta;
  Tensor running_mean, running_var;  // non-trainable
};

/// 3x3 max pooling with "same" padding.
Tensor max_pool(const Tensor& x, int kernel, int stride);
/// Nearest-neighbour resampling of an NHWC map.
Tensor upsample_nearest(const Tensor& x, int out_h, int out_w);
/// Inverted dropout; identity outside training.
Tensor dropout(const Tensor& x, double rate, const ForwardContext& ctx);
/// Additive N(0, sigma^2) noise when ctx.noise is set.
Tensor gaussian_noise(const Tensor& x, double sigma, const ForwardContext& ctx);

/// Four parallel branches (1x1; 1x1->3x3; 1x1->5x5; 3x3 pool->1x1), each with
/// `width` filters, concatenated along channels. Stride applies to every branch.
class InceptionBlock {
 public:
  InceptionBlock() = default;
  InceptionBlock(int in_channels, int width, int stride, double slope, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  int out_channels() const { return 4 * width_; }
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;

 private:
  int width_ = 0, stride_ = 1;
  double slope_ = 0.0;
  Conv2d b1_, b2_reduce_, b2_, b3_reduce_, b3_, b4_;
};

/// Mirror of InceptionBlock built from transposed convolutions; the pooling
/// branch upsamples with nearest neighbour.
class TransposedInceptionBlock {
 public:
  TransposedInceptionBlock() = default;
  TransposedInceptionBlock(int in_channels, int width, int stride, double slope,
                           std::mt19937_64& rng);
  Tensor forward(const Tensor& x, int out_h, int out_w) const;
  int out_channels() const { return 4 * width_; }
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;

 private:
  int width_ = 0, stride_ = 1;
  double slope_ = 0.0;
  ConvTranspose2d b1_, b2_reduce_, b2_, b3_reduce_, b3_, b4_;
};

}  // namespace levelnet::nn
