#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "levelnet/image.hpp"
#include "levelnet/layers.hpp"
#include "levelnet/tile_repr.hpp"

namespace levelnet {

using ag::Tensor;
using nn::ForwardContext;
using nn::NamedTensor;

/// The six model configurations compared in the evaluation table.
enum class Variant { ours, original_vaegan, gan, vae, vaegan_text, vae_text };
enum class InputMode { pixels, text };

std::string to_string(Variant v);
/// Throws BadVariantError.
Variant variant_from_string(const std::string& s);
std::string to_string(InputMode m);
InputMode input_mode_for(Variant v);
const std::vector<Variant>& all_variants();

bool has_encoder(Variant v);
bool has_generator_network(Variant v);  // a network separate from the decoder
bool has_discriminator(Variant v);
/// Generator shares its second dense layer with the encoder mean layer.
bool shares_mean_layer(Variant v);

struct HyperParams {
  int latent_dim = 128;
  double leaky_slope = 0.1473;
  int f_vae = 2;
  int f_gen = 2;
  int f_disc = 8;
  double dropout_vae = 0.2426;
  double dropout_gen = 0.2400;
  double dropout_disc = 0.4684;
  double gan_lr = 1e-4;
  double vae_lr = 1e-4;
  int n_disc = 10;
  double gp_lambda = 10.0;
  int batch = 8;
  int epochs = 300;
  double noise_sigma = 0.05;
  double kl_weight = 1.0;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  /// Weight of the reconstruction term in the unified decoder/generator update
  /// of the original VAE-GAN baseline.
  double recon_gen_coeff = 1e-6;
  /// Filters per Inception branch = f * branch_width.
  int branch_width = 1;
  /// Channels of the dense seed map that starts the decoder/generator stacks.
  int seed_channels = 32;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct LatentDistribution {
  Tensor mu;       // (B, d)
  Tensor log_var;  // (B, d)
};

/// z = mu + exp(log_var / 2) * eps, eps ~ N(0, I) drawn from rng.
Tensor reparameterize(const LatentDistribution& dist, std::mt19937_64& rng);

class Encoder {
 public:
  Encoder(const HyperParams& hp, InputMode mode, std::mt19937_64& rng);

  /// x is (B, 50, 75, 3) pixels or (B, 10, 15, 9) one-hot grids.
  LatentDistribution encode(const Tensor& x, const ForwardContext& ctx);
  /// Distribution plus a reparameterized sample.
  std::pair<LatentDistribution, Tensor> forward(const Tensor& x, const ForwardContext& ctx,
                                                std::mt19937_64& rng);

  InputMode mode() const { return mode_; }
  /// Width of the flattened feature vector feeding the mean/variance layers.
  int feature_width() const { return feature_width_; }
  nn::Dense& mean_layer() { return mean_; }
  const nn::Dense& mean_layer() const { return mean_; }

  std::vector<NamedTensor> parameters() const;
  std::vector<NamedTensor> buffers() const;

 private:
  InputMode mode_;
  double slope_, dropout_;
  int feature_width_ = 0;
  nn::InceptionBlock blocks_[3];
  nn::BatchNorm norms_[3];
  nn::Dense mean_, log_var_;
};

/// Dense seed map followed by three transposed Inception blocks
/// (2x2 -> 3x4 -> 5x8 -> 10x15) and a 9-filter transposed convolution with a
/// per-cell softmax.
class Decoder {
 public:
  Decoder(const HyperParams& hp, int filters, double dropout, std::mt19937_64& rng);
  /// z (B, d) -> (B, 10, 15, 9) probabilities.
  Tensor forward(const Tensor& z, const ForwardContext& ctx) const;
  /// Same path without the final softmax.
  Tensor logits(const Tensor& z, const ForwardContext& ctx) const;
  std::vector<NamedTensor> parameters(const std::string& prefix = "decoder") const;

 private:
  int latent_dim_, seed_channels_;
  double slope_, dropout_;
  nn::Dense seed_;
  nn::TransposedInceptionBlock blocks_[3];
  nn::ConvTranspose2d out_;
};

/// dense1 (d -> feature width) -> dense2 (feature width -> d) -> decoder-like
/// stack. dense2 may alias the encoder mean layer.
class Generator {
 public:
  Generator(const HyperParams& hp, int feature_width, std::mt19937_64& rng);
  /// Replaces dense2 with a layer aliasing `shared`.
  void bind_second_dense(const nn::Dense& shared);
  Tensor forward(const Tensor& z, const ForwardContext& ctx) const;

  const nn::Dense& dense1() const { return dense1_; }
  const nn::Dense& dense2() const { return dense2_; }
  std::vector<NamedTensor> parameters() const;

 private:
  double slope_;
  nn::Dense dense1_, dense2_;
  Decoder body_;
};

/// WGAN critic: noise -> conv -> minibatch stddev -> two strided convs with
/// leaky ReLU and dropout -> linear dense to one score.
class Discriminator {
 public:
  Discriminator(const HyperParams& hp, std::mt19937_64& rng);
  /// g (B, 10, 15, 9) -> (B). Throws BatchTooSmallError for B < 2 in training.
  Tensor forward(const Tensor& g, const ForwardContext& ctx) const;
  std::vector<NamedTensor> parameters() const;

 private:
  double slope_, dropout_, noise_sigma_;
  nn::Conv2d conv1_, conv2_, conv3_;
  nn::Dense out_;
};

/// Appends one channel holding the batch mean of per-position standard
/// deviations (exactly 0 for identical batch items).
Tensor minibatch_stddev(const Tensor& x);

/// The networks of one variant plus its hyperparameters.
class ModelBundle {
 public:
  ModelBundle(Variant variant, HyperParams hp, std::uint64_t seed);
  ModelBundle(ModelBundle&&) = default;
  ModelBundle& operator=(ModelBundle&&) = default;
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;

  Variant variant() const { return variant_; }
  InputMode input_mode() const { return input_mode_for(variant_); }
  const HyperParams& hp() const { return hp_; }
  std::uint64_t seed() const { return seed_; }

  std::optional<Encoder> encoder;
  std::optional<Decoder> decoder;
  std::optional<Generator> generator;
  std::optional<Discriminator> discriminator;

  /// Sampling network: the generator, or the decoder for variants without one.
  /// Throws MissingNetworkError.
  Tensor generate(const Tensor& z, const ForwardContext& ctx) const;
  bool can_generate() const { return generator.has_value() || decoder.has_value(); }

  /// Parameters updated by the generation step (stage 3).
  std::vector<NamedTensor> generator_parameters() const;
  std::vector<NamedTensor> encoder_parameters() const;
  std::vector<NamedTensor> decoder_parameters() const;
  std::vector<NamedTensor> discriminator_parameters() const;
  /// Every distinct trainable tensor, aliases listed once.
  std::vector<NamedTensor> all_parameters() const;

  /// Human-readable description of the weight-sharing link ("" when none).
  std::string shared_binding() const;
  /// (network, parameter count) with aliased tensors counted in each network.
  std::vector<std::pair<std::string, std::size_t>> parameter_counts() const;

 private:
  Variant variant_;
  HyperParams hp_;
  std::uint64_t seed_;
};

/// Throws BadVariantError when `mode` disagrees with the variant.
ModelBundle build_models(const HyperParams& hp, Variant variant, InputMode mode,
                         std::uint64_t seed = 0);
ModelBundle build_models(const HyperParams& hp, Variant variant, std::uint64_t seed = 0);

/// Batch helpers between value types and network tensors.
Tensor frames_to_tensor(const std::vector<const Image*>& frames);
Tensor grids_to_tensor(const std::vector<OneHotGrid>& grids);
std::vector<OneHotGrid> tensor_to_grids(const Tensor& t, GridMode mode = GridMode::probabilities);

}  // namespace levelnet
