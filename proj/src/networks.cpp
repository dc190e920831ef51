#include "levelnet/networks.hpp"

#include <cmath>
#include <set>

#include "levelnet/dataset.hpp"
#include "levelnet/error.hpp"

namespace levelnet {

namespace {

constexpr int kSeedRows = 2;
constexpr int kSeedCols = 2;
// Decoder/generator spatial schedule after the seed map.
constexpr int kUpRows[3] = {3, 5, kSegmentRows};
constexpr int kUpCols[3] = {4, 8, kSegmentCols};

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::ours: return "ours";
    case Variant::original_vaegan: return "original_vaegan";
    case Variant::gan: return "gan";
    case Variant::vae: return "vae";
    case Variant::vaegan_text: return "vaegan_text";
    case Variant::vae_text: return "vae_text";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (auto v : all_variants())
    if (to_string(v) == s) return v;
  throw BadVariantError("unknown model variant '" + s +
                        "' (expected ours, original_vaegan, gan, vae, vaegan_text or vae_text)");
}

std::string to_string(InputMode m) { return m == InputMode::pixels ? "pixels" : "text"; }

InputMode input_mode_for(Variant v) {
  return (v == Variant::vaegan_text || v == Variant::vae_text) ? InputMode::text
                                                               : InputMode::pixels;
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::ours, Variant::original_vaegan, Variant::gan,
                                         Variant::vae,  Variant::vaegan_text,     Variant::vae_text};
  return v;
}

bool has_encoder(Variant v) { return v != Variant::gan; }
bool has_generator_network(Variant v) {
  return v == Variant::ours || v == Variant::gan || v == Variant::vaegan_text;
}
bool has_discriminator(Variant v) { return v != Variant::vae && v != Variant::vae_text; }
bool shares_mean_layer(Variant v) { return v == Variant::ours || v == Variant::vaegan_text; }

void HyperParams::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("bad hyperparameter: " + what); };
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  if (!(leaky_slope > 0 && leaky_slope < 1)) fail("leaky_slope must lie in (0,1)");
  if (f_vae < 1 || f_gen < 1 || f_disc < 1) fail("filter counts must be positive");
  for (double d : {dropout_vae, dropout_gen, dropout_disc})
    if (!(d >= 0 && d < 1)) fail("dropout rates must lie in [0,1)");
  if (!(gan_lr > 0) || !(vae_lr > 0)) fail("learning rates must be positive");
  if (n_disc < 1) fail("n_disc must be >= 1");
  if (gp_lambda < 0) fail("gp_lambda must be non-negative");
  if (batch < 1) fail("batch must be >= 1");
  if (epochs < 0) fail("epochs must be non-negative");
  if (noise_sigma < 0) fail("noise_sigma must be non-negative");
  if (kl_weight < 0) fail("kl_weight must be non-negative");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
    fail("Adam betas must lie in [0,1)");
  if (branch_width < 1 || seed_channels < 1) fail("architecture widths must be positive");
}

Tensor reparameterize(const LatentDistribution& dist, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> eps(dist.mu.size());
  for (auto& e : eps) e = n(rng);
  Tensor sigma = ag::exp(ag::scale(dist.log_var, 0.5));
  return ag::add(dist.mu, ag::mul(sigma, Tensor::constant(dist.mu.shape(), std::move(eps))));
}

// ---------------------------------------------------------------------------

Encoder::Encoder(const HyperParams& hp, InputMode mode, std::mt19937_64& rng)
    : mode_(mode), slope_(hp.leaky_slope), dropout_(hp.dropout_vae) {
  const int width = hp.f_vae * hp.branch_width;
  int channels = mode == InputMode::pixels ? Image::kChannels : kTileClasses;
  int h = mode == InputMode::pixels ? kFrameHeight : kSegmentRows;
  int w = mode == InputMode::pixels ? kFrameWidth : kSegmentCols;
  for (int i = 0; i < 3; ++i) {
    blocks_[i] = nn::InceptionBlock(channels, width, 2, slope_, rng);
    channels = blocks_[i].out_channels();
    norms_[i] = nn::BatchNorm(channels);
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  feature_width_ = h * w * channels;
  mean_ = nn::Dense(feature_width_, hp.latent_dim, rng);
  log_var_ = nn::Dense(feature_width_, hp.latent_dim, rng);
}

LatentDistribution Encoder::encode(const Tensor& x, const ForwardContext& ctx) {
  const bool pixels = mode_ == InputMode::pixels;
  const ag::Shape expected = pixels ? ag::Shape{x.rank() ? x.dim(0) : 0, kFrameHeight, kFrameWidth,
                                                Image::kChannels}
                                    : ag::Shape{x.rank() ? x.dim(0) : 0, kSegmentRows,
                                                kSegmentCols, kTileClasses};
  if (x.shape() != expected)
    throw ShapeError("encoder (" + to_string(mode_) + ") expects " + ag::to_string(expected) +
                     ", got " + ag::to_string(x.shape()));
  Tensor h = x;
  for (int i = 0; i < 3; ++i) {
    h = blocks_[i].forward(h);
    h = norms_[i].forward(h, ctx);
    h = ag::leaky_relu(h, slope_);
    h = nn::dropout(h, dropout_, ctx);
  }
  h = ag::reshape(h, {x.dim(0), feature_width_});
  return {mean_.forward(h), log_var_.forward(h)};
}

std::pair<LatentDistribution, Tensor> Encoder::forward(const Tensor& x, const ForwardContext& ctx,
                                                       std::mt19937_64& rng) {
  auto dist = encode(x, ctx);
  Tensor z = reparameterize(dist, rng);
  return {std::move(dist), std::move(z)};
}

std::vector<NamedTensor> Encoder::parameters() const {
  std::vector<NamedTensor> out;
  for (int i = 0; i < 3; ++i) {
    blocks_[i].collect(out, "encoder.block" + std::to_string(i));
    norms_[i].collect(out, "encoder.bn" + std::to_string(i));
  }
  mean_.collect(out, "encoder.mean");
  log_var_.collect(out, "encoder.log_var");
  return out;
}

std::vector<NamedTensor> Encoder::buffers() const {
  std::vector<NamedTensor> out;
  for (int i = 0; i < 3; ++i) norms_[i].collect_buffers(out, "encoder.bn" + std::to_string(i));
  return out;
}

// ---------------------------------------------------------------------------

Decoder::Decoder(const HyperParams& hp, int filters, double dropout, std::mt19937_64& rng)
    : latent_dim_(hp.latent_dim),
      seed_channels_(hp.seed_channels),
      slope_(hp.leaky_slope),
      dropout_(dropout),
      seed_(hp.latent_dim, kSeedRows * kSeedCols * hp.seed_channels, rng) {
  const int width = filters * hp.branch_width;
  int channels = seed_channels_;
  for (int i = 0; i < 3; ++i) {
    const int stride = 2;
    blocks_[i] = nn::TransposedInceptionBlock(channels, width, stride, slope_, rng);
    channels = blocks_[i].out_channels();
  }
  out_ = nn::ConvTranspose2d(channels, kTileClasses, 3, 1, rng);
}

Tensor Decoder::logits(const Tensor& z, const ForwardContext& ctx) const {
  if (z.rank() != 2 || z.dim(1) != latent_dim_)
    throw ShapeError("decoder expects (B, " + std::to_string(latent_dim_) + "), got " +
                     ag::to_string(z.shape()));
  const int batch = z.dim(0);
  Tensor h = ag::leaky_relu(seed_.forward(z), slope_);
  h = ag::reshape(h, {batch, kSeedRows, kSeedCols, seed_channels_});
  for (int i = 0; i < 3; ++i) {
    h = blocks_[i].forward(h, kUpRows[i], kUpCols[i]);
    h = ag::leaky_relu(h, slope_);
    h = nn::dropout(h, dropout_, ctx);
  }
  return out_.forward(h, kSegmentRows, kSegmentCols);
}

Tensor Decoder::forward(const Tensor& z, const ForwardContext& ctx) const {
  return ag::softmax_last(logits(z, ctx));
}

std::vector<NamedTensor> Decoder::parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  seed_.collect(out, prefix + ".seed");
  for (int i = 0; i < 3; ++i) blocks_[i].collect(out, prefix + ".block" + std::to_string(i));
  out_.collect(out, prefix + ".out");
  return out;
}

// ---------------------------------------------------------------------------

Generator::Generator(const HyperParams& hp, int feature_width, std::mt19937_64& rng)
    : slope_(hp.leaky_slope),
      dense1_(hp.latent_dim, feature_width, rng),
      dense2_(feature_width, hp.latent_dim, rng),
      body_(hp, hp.f_gen, hp.dropout_gen, rng) {}

void Generator::bind_second_dense(const nn::Dense& shared) {
  if (shared.in_features() != dense2_.in_features() ||
      shared.out_features() != dense2_.out_features())
    throw ShapeError("shared layer " + ag::to_string(shared.weight.shape()) +
                     " does not fit generator dense2 " + ag::to_string(dense2_.weight.shape()));
  dense2_ = nn::Dense(shared.weight, shared.bias);
}

Tensor Generator::forward(const Tensor& z, const ForwardContext& ctx) const {
  if (z.rank() != 2 || z.dim(1) != dense1_.in_features())
    throw ShapeError("generator expects (B, " + std::to_string(dense1_.in_features()) +
                     "), got " + ag::to_string(z.shape()));
  Tensor h = ag::leaky_relu(dense1_.forward(z), slope_);
  h = dense2_.forward(h);
  return body_.forward(h, ctx);
}

std::vector<NamedTensor> Generator::parameters() const {
  std::vector<NamedTensor> out;
  dense1_.collect(out, "generator.dense1");
  dense2_.collect(out, "generator.dense2");
  auto body = body_.parameters("generator.body");
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

// ---------------------------------------------------------------------------

Tensor minibatch_stddev(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("minibatch stddev expects NHWC input");
  const int B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const int F = H * W * C;
  constexpr double kEps = 1e-8;
  Tensor flat = ag::reshape(x, {B, F});
  Tensor mean = ag::scale(ag::sum_rows(flat), 1.0 / B);
  Tensor centered = ag::sub(flat, ag::expand_rows(mean, {B, F}));
  Tensor var = ag::scale(ag::sum_rows(ag::square(centered)), 1.0 / B);
  // Shifted so that zero variance maps to exactly zero with a finite slope.
  Tensor sd = ag::add_scalar(ag::sqrt(ag::add_scalar(var, kEps)), -std::sqrt(kEps));
  Tensor map = ag::expand_scalar(ag::mean_all(sd), {B, H, W, 1});
  return ag::concat_last({x, map});
}

Discriminator::Discriminator(const HyperParams& hp, std::mt19937_64& rng)
    : slope_(hp.leaky_slope),
      dropout_(hp.dropout_disc),
      noise_sigma_(hp.noise_sigma),
      conv1_(kTileClasses, hp.f_disc, 3, 1, rng),
      conv2_(hp.f_disc + 1, hp.f_disc, 3, 2, rng),
      conv3_(hp.f_disc, hp.f_disc, 3, 2, rng),
      out_(3 * 4 * hp.f_disc, 1, rng) {}

Tensor Discriminator::forward(const Tensor& g, const ForwardContext& ctx) const {
  if (g.rank() != 4 || g.dim(1) != kSegmentRows || g.dim(2) != kSegmentCols ||
      g.dim(3) != kTileClasses)
    throw ShapeError("discriminator expects (B, 10, 15, 9), got " + ag::to_string(g.shape()));
  const int batch = g.dim(0);
  if (ctx.training && batch < 2)
    throw BatchTooSmallError("minibatch stddev needs at least 2 samples in training mode");
  Tensor h = nn::gaussian_noise(g, noise_sigma_, ctx);
  h = ag::leaky_relu(conv1_.forward(h), slope_);
  h = minibatch_stddev(h);
  h = nn::dropout(ag::leaky_relu(conv2_.forward(h), slope_), dropout_, ctx);
  h = nn::dropout(ag::leaky_relu(conv3_.forward(h), slope_), dropout_, ctx);
  h = ag::reshape(h, {batch, h.dim(1) * h.dim(2) * h.dim(3)});
  return ag::reshape(out_.forward(h), {batch});
}

std::vector<NamedTensor> Discriminator::parameters() const {
  std::vector<NamedTensor> out;
  conv1_.collect(out, "discriminator.conv1");
  conv2_.collect(out, "discriminator.conv2");
  conv3_.collect(out, "discriminator.conv3");
  out_.collect(out, "discriminator.out");
  return out;
}

// ---------------------------------------------------------------------------

ModelBundle::ModelBundle(Variant variant, HyperParams hp, std::uint64_t seed)
    : variant_(variant), hp_(std::move(hp)), seed_(seed) {
  hp_.validate();
  std::mt19937_64 rng(seed);
  const InputMode mode = input_mode_for(variant);
  if (has_encoder(variant)) {
    encoder.emplace(hp_, mode, rng);
    decoder.emplace(hp_, hp_.f_vae, hp_.dropout_vae, rng);
  }
  if (has_generator_network(variant)) {
    // Without an encoder the dense1 width follows the pixel encoder layout.
    const int feature_width =
        encoder ? encoder->feature_width() : Encoder(hp_, InputMode::pixels, rng).feature_width();
    generator.emplace(hp_, feature_width, rng);
    if (shares_mean_layer(variant)) generator->bind_second_dense(encoder->mean_layer());
  }
  if (has_discriminator(variant)) discriminator.emplace(hp_, rng);
}

Tensor ModelBundle::generate(const Tensor& z, const ForwardContext& ctx) const {
  if (generator) return generator->forward(z, ctx);
  if (decoder) return decoder->forward(z, ctx);
  throw MissingNetworkError("variant " + to_string(variant_) + " has no sampling network");
}

std::vector<NamedTensor> ModelBundle::generator_parameters() const {
  if (generator) return generator->parameters();
  if (variant_ == Variant::original_vaegan && decoder) return decoder->parameters();
  return {};
}

std::vector<NamedTensor> ModelBundle::encoder_parameters() const {
  return encoder ? encoder->parameters() : std::vector<NamedTensor>{};
}

std::vector<NamedTensor> ModelBundle::decoder_parameters() const {
  return decoder ? decoder->parameters() : std::vector<NamedTensor>{};
}

std::vector<NamedTensor> ModelBundle::discriminator_parameters() const {
  return discriminator ? discriminator->parameters() : std::vector<NamedTensor>{};
}

std::vector<NamedTensor> ModelBundle::all_parameters() const {
  std::vector<NamedTensor> out;
  std::set<const ag::Node*> seen;
  auto add = [&](const std::vector<NamedTensor>& ps) {
    for (const auto& p : ps)
      if (seen.insert(p.tensor.id()).second) out.push_back(p);
  };
  add(encoder_parameters());
  add(decoder_parameters());
  if (generator) add(generator->parameters());
  add(discriminator_parameters());
  return out;
}

std::string ModelBundle::shared_binding() const {
  return shares_mean_layer(variant_) ? "generator.dense2 = encoder.mean" : "";
}

std::vector<std::pair<std::string, std::size_t>> ModelBundle::parameter_counts() const {
  auto count = [](const std::vector<NamedTensor>& ps) {
    std::size_t n = 0;
    for (const auto& p : ps) n += p.tensor.size();
    return n;
  };
  std::vector<std::pair<std::string, std::size_t>> out;
  if (encoder) out.emplace_back("encoder", count(encoder->parameters()));
  if (decoder) out.emplace_back("decoder", count(decoder->parameters()));
  if (generator) out.emplace_back("generator", count(generator->parameters()));
  if (discriminator) out.emplace_back("discriminator", count(discriminator->parameters()));
  return out;
}

ModelBundle build_models(const HyperParams& hp, Variant variant, InputMode mode,
                         std::uint64_t seed) {
  if (mode != input_mode_for(variant))
    throw BadVariantError("variant " + to_string(variant) + " takes " +
                          to_string(input_mode_for(variant)) + " input, not " + to_string(mode));
  return ModelBundle(variant, hp, seed);
}

ModelBundle build_models(const HyperParams& hp, Variant variant, std::uint64_t seed) {
  return ModelBundle(variant, hp, seed);
}

// ---------------------------------------------------------------------------

Tensor frames_to_tensor(const std::vector<const Image*>& frames) {
  if (frames.empty()) throw ShapeError("empty frame batch");
  std::vector<double> v;
  v.reserve(frames.size() * kFrameHeight * kFrameWidth * Image::kChannels);
  for (const Image* f : frames) {
    if (f->width() != kFrameWidth || f->height() != kFrameHeight)
      throw ShapeError("frames must be 75x50, got " + std::to_string(f->width()) + "x" +
                       std::to_string(f->height()));
    v.insert(v.end(), f->data().begin(), f->data().end());
  }
  return Tensor::constant(
      {static_cast<int>(frames.size()), kFrameHeight, kFrameWidth, Image::kChannels},
      std::move(v));
}

Tensor grids_to_tensor(const std::vector<OneHotGrid>& grids) {
  if (grids.empty()) throw ShapeError("empty grid batch");
  std::vector<double> v;
  v.reserve(grids.size() * kSegmentCells * kTileClasses);
  for (const auto& g : grids) v.insert(v.end(), g.values.begin(), g.values.end());
  return Tensor::constant({static_cast<int>(grids.size()), kSegmentRows, kSegmentCols, kTileClasses},
                          std::move(v));
}

std::vector<OneHotGrid> tensor_to_grids(const Tensor& t, GridMode mode) {
  if (t.rank() != 4 || t.dim(1) != kSegmentRows || t.dim(2) != kSegmentCols ||
      t.dim(3) != kTileClasses)
    throw ShapeError("expected (B, 10, 15, 9), got " + ag::to_string(t.shape()));
  std::vector<OneHotGrid> out(t.dim(0));
  const std::size_t per = static_cast<std::size_t>(kSegmentCells) * kTileClasses;
  for (std::size_t b = 0; b < out.size(); ++b) {
    std::copy_n(t.values().begin() + b * per, per, out[b].values.begin());
    out[b].mode = mode;
  }
  return out;
}

}  // namespace levelnet
