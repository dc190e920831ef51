#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "levelnet/error.hpp"
#include "levelnet/losses.hpp"
#include "levelnet/networks.hpp"
#include "oracles.hpp"

using namespace levelnet;

namespace {

Tensor random_tensor(ag::Shape shape, std::mt19937_64& rng, double lo = 0, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(ag::numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::constant(std::move(shape), std::move(v));
}

Tensor random_z(int b, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  std::vector<double> v(static_cast<std::size_t>(b) * d);
  for (auto& x : v) x = n(rng);
  return Tensor::constant({b, d}, std::move(v));
}

Tensor random_grids(int b, std::mt19937_64& rng) {
  std::vector<OneHotGrid> g;
  for (int i = 0; i < b; ++i) g.push_back(one_hot(oracle::random_segment(rng)));
  return grids_to_tensor(g);
}

void expect_normalized(const Tensor& p) {
  ASSERT_EQ(p.rank(), 4);
  EXPECT_EQ(p.dim(1), 10);
  EXPECT_EQ(p.dim(2), 15);
  EXPECT_EQ(p.dim(3), 9);
  for (std::size_t cell = 0; cell < p.size() / 9; ++cell) {
    double s = 0;
    for (int k = 0; k < 9; ++k) {
      EXPECT_GE(p[cell * 9 + k], 0.0);
      s += p[cell * 9 + k];
    }
    ASSERT_NEAR(s, 1.0, 1e-5);
  }
}

// Five spread-out entries of each parameter tensor group checked against
// central differences.
void spot_check(const std::vector<NamedTensor>& params, const std::function<Tensor()>& loss) {
  std::vector<Tensor> tensors;
  for (const auto& p : params) tensors.push_back(p.tensor);
  const auto grads = ag::grad(loss(), tensors);
  auto value = [&] {
    ag::GradModeGuard off(false);
    return loss().item();
  };
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int attempt = 0; checked < 5 && attempt < 200; ++attempt) {
    const std::size_t k = rng() % tensors.size();
    const std::size_t i = rng() % tensors[k].size();
    const double fd = oracle::central_difference(tensors[k], i, value, 1e-6);
    const double an = grads[k][i];
    if (std::abs(fd) < 1e-7 && std::abs(an) < 1e-7) continue;  // dead unit, try another
    const double rel = std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
    EXPECT_LT(rel, 1e-2) << params[k].name << "[" << i << "] autograd " << an << " fd " << fd;
    ++checked;
  }
  EXPECT_EQ(checked, 5);
}

}  // namespace

TEST(Variants, NamesRoundTrip) {
  EXPECT_EQ(all_variants().size(), 6u);
  for (auto v : all_variants()) EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_THROW(variant_from_string("vaegan2"), BadVariantError);
  EXPECT_EQ(input_mode_for(Variant::vae_text), InputMode::text);
  EXPECT_EQ(input_mode_for(Variant::ours), InputMode::pixels);
}

TEST(HyperParams, Validation) {
  HyperParams hp;
  EXPECT_NO_THROW(hp.validate());
  hp.dropout_vae = 1.0;
  EXPECT_THROW(hp.validate(), ConfigError);
  hp = {};
  hp.latent_dim = 0;
  EXPECT_THROW(hp.validate(), ConfigError);
  hp = {};
  hp.leaky_slope = -0.1;
  EXPECT_THROW(hp.validate(), ConfigError);
}

TEST(BuildModels, NetworksPerVariant) {
  const HyperParams hp;
  for (auto v : all_variants()) {
    const auto b = build_models(hp, v, 1);
    const bool gan = v == Variant::gan;
    const bool vae = v == Variant::vae || v == Variant::vae_text;
    EXPECT_EQ(b.encoder.has_value(), !gan) << to_string(v);
    EXPECT_EQ(b.decoder.has_value(), !gan) << to_string(v);
    EXPECT_EQ(b.discriminator.has_value(), !vae) << to_string(v);
    EXPECT_EQ(b.generator.has_value(), gan || v == Variant::ours || v == Variant::vaegan_text)
        << to_string(v);
  }
  EXPECT_THROW(build_models(hp, Variant::ours, InputMode::text), BadVariantError);
  EXPECT_THROW(build_models(hp, Variant::vae_text, InputMode::pixels), BadVariantError);
}

TEST(BuildModels, SharedMeanLayerAliases) {
  auto b = build_models(HyperParams{}, Variant::ours, 3);
  EXPECT_EQ(b.encoder->mean_layer().weight.id(), b.generator->dense2().weight.id());
  EXPECT_EQ(b.encoder->mean_layer().bias.id(), b.generator->dense2().bias.id());
  EXPECT_FALSE(b.shared_binding().empty());
  b.encoder->mean_layer().weight.mutable_values()[5] = 42.0;
  EXPECT_EQ(b.generator->dense2().weight[5], 42.0);

  const auto gan = build_models(HyperParams{}, Variant::gan, 3);
  EXPECT_TRUE(gan.shared_binding().empty());
  std::set<const ag::Node*> ids;
  std::size_t listed = 0;
  for (const auto& p : gan.generator->parameters()) {
    ids.insert(p.tensor.id());
    ++listed;
  }
  for (const auto& p : gan.discriminator->parameters()) {
    ids.insert(p.tensor.id());
    ++listed;
  }
  EXPECT_EQ(ids.size(), listed);
}

TEST(BuildModels, OriginalVaeganUnifiesDecoderAndGenerator) {
  const auto b = build_models(HyperParams{}, Variant::original_vaegan, 3);
  const auto gen = b.generator_parameters();
  const auto dec = b.decoder_parameters();
  ASSERT_EQ(gen.size(), dec.size());
  for (std::size_t i = 0; i < gen.size(); ++i) EXPECT_EQ(gen[i].tensor.id(), dec[i].tensor.id());
}

TEST(BuildModels, GoldenParameterCounts) {
  std::ifstream in(std::string(LEVELNET_TEST_GOLDEN_DIR) + "/parameter_counts.txt");
  ASSERT_TRUE(in);
  std::map<std::pair<std::string, std::string>, std::size_t> golden;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string v, net;
    std::size_t n;
    ss >> v >> net >> n;
    golden[{v, net}] = n;
  }
  std::size_t seen = 0;
  for (auto v : all_variants()) {
    const auto b = build_models(HyperParams{}, v, 0);
    for (const auto& [net, n] : b.parameter_counts()) {
      EXPECT_EQ(golden.at({to_string(v), net}), n) << to_string(v) << " " << net;
      ++seen;
    }
  }
  EXPECT_EQ(seen, golden.size());
}

TEST(BuildModels, MeanLayerWidthFollowsStridedFeatureMap) {
  // 50x75 halves (rounding up) three times to 7x10 with 4 branches of f_vae.
  const HyperParams hp;
  const auto b = build_models(hp, Variant::vae, 0);
  const int width = 7 * 10 * 4 * hp.f_vae * hp.branch_width;
  EXPECT_EQ(b.encoder->feature_width(), width);
  EXPECT_EQ(b.encoder->mean_layer().weight.size(), static_cast<std::size_t>(width) * 128);
}

TEST(Encoder, ShapesAndReparameterization) {
  std::mt19937_64 rng(1);
  auto b = build_models(HyperParams{}, Variant::ours, 2);
  const Tensor x = random_tensor({3, 50, 75, 3}, rng);
  std::mt19937_64 r1(9), r2(9);
  const auto [d1, z1] = b.encoder->forward(x, ForwardContext::eval(), r1);
  const auto [d2, z2] = b.encoder->forward(x, ForwardContext::eval(), r2);
  for (const auto* t : {&d1.mu, &d1.log_var, &z1}) {
    EXPECT_EQ(t->dim(0), 3);
    EXPECT_EQ(t->dim(1), 128);
  }
  EXPECT_EQ(z1.values(), z2.values());

  const LatentDistribution degenerate{d1.mu, Tensor::full(d1.mu.shape(), -1e4)};
  std::mt19937_64 r3(5);
  EXPECT_EQ(reparameterize(degenerate, r3).values(), d1.mu.values());
}

TEST(Encoder, TextModeAndShapeErrors) {
  std::mt19937_64 rng(1);
  auto b = build_models(HyperParams{}, Variant::vae_text, 2);
  const auto d = b.encoder->encode(random_grids(2, rng), ForwardContext::eval());
  EXPECT_EQ(d.mu.dim(1), 128);
  EXPECT_THROW(b.encoder->encode(random_tensor({2, 50, 75, 3}, rng), ForwardContext::eval()),
               ShapeError);
}

TEST(Decoder, SoftmaxOutputs) {
  std::mt19937_64 rng(2);
  const auto b = build_models(HyperParams{}, Variant::ours, 4);
  const Tensor z = random_z(4, 128, rng);
  const auto p = b.decoder->forward(z, ForwardContext::eval());
  EXPECT_EQ(p.dim(0), 4);
  expect_normalized(p);
  expect_normalized(b.generator->forward(z, ForwardContext::eval()));
  const auto p2 = b.decoder->forward(ag::scale(z, 2.0), ForwardContext::eval());
  EXPECT_NE(p.values(), p2.values());
  EXPECT_THROW(b.decoder->forward(random_z(2, 64, rng), ForwardContext::eval()), ShapeError);
}

TEST(Networks, FiniteOverManyRandomBatches) {
  std::mt19937_64 rng(3);
  auto b = build_models(HyperParams{}, Variant::ours, 4);
  ag::GradModeGuard off(false);
  for (int i = 0; i < 1000; ++i) {
    const Tensor z = random_z(2, 128, rng);
    const auto g = b.generator->forward(z, ForwardContext::eval());
    const auto d = b.discriminator->forward(g, ForwardContext::eval());
    for (double v : g.values()) ASSERT_TRUE(std::isfinite(v));
    for (double v : d.values()) ASSERT_TRUE(std::isfinite(v));
    if (i % 50 == 0) {
      const auto e = b.encoder->encode(random_tensor({2, 50, 75, 3}, rng), ForwardContext::eval());
      for (double v : e.mu.values()) ASSERT_TRUE(std::isfinite(v));
      for (double v : e.log_var.values()) ASSERT_TRUE(std::isfinite(v));
    }
  }
}

TEST(Discriminator, UnboundedScoresNoActivation) {
  std::mt19937_64 rng(4);
  const auto b = build_models(HyperParams{}, Variant::gan, 6);
  const auto d = b.discriminator->forward(random_grids(64, rng), ForwardContext::eval());
  ASSERT_EQ(d.rank(), 1);
  EXPECT_EQ(d.dim(0), 64);
  bool negative = false, positive = false;
  for (double v : d.values()) (v < 0 ? negative : positive) = true;
  EXPECT_TRUE(negative && positive);
}

TEST(Discriminator, EvalModeIsDeterministic) {
  std::mt19937_64 rng(5);
  const auto b = build_models(HyperParams{}, Variant::gan, 6);
  std::vector<OneHotGrid> same(3, one_hot(oracle::random_segment(rng)));
  const auto d = b.discriminator->forward(grids_to_tensor(same), ForwardContext::eval());
  EXPECT_EQ(d[0], d[1]);
  EXPECT_EQ(d[1], d[2]);
}

TEST(Discriminator, BatchTooSmallInTraining) {
  std::mt19937_64 rng(6);
  const auto b = build_models(HyperParams{}, Variant::gan, 6);
  EXPECT_THROW(b.discriminator->forward(random_grids(1, rng), ForwardContext::train(rng)),
               BatchTooSmallError);
  EXPECT_NO_THROW(b.discriminator->forward(random_grids(1, rng), ForwardContext::eval()));
  EXPECT_THROW(b.discriminator->forward(random_tensor({2, 10, 15, 8}, rng), ForwardContext::eval()),
               ShapeError);
}

TEST(MinibatchStddev, ZeroForIdenticalItems) {
  std::mt19937_64 rng(7);
  const Tensor one = random_tensor({1, 3, 4, 2}, rng);
  std::vector<double> v;
  for (int i = 0; i < 4; ++i) v.insert(v.end(), one.values().begin(), one.values().end());
  const auto out = minibatch_stddev(Tensor::constant({4, 3, 4, 2}, v));
  ASSERT_EQ(out.dim(3), 3);
  for (std::size_t p = 0; p < out.size() / 3; ++p) EXPECT_EQ(out[p * 3 + 2], 0.0);
}

TEST(MinibatchStddev, MeanOfPerPositionDeviations) {
  const auto out = minibatch_stddev(Tensor::constant({2, 1, 1, 2}, {0.0, 1.0, 2.0, 1.0}));
  // Deviations 1 and 0, each as sqrt(var + 1e-8) - sqrt(1e-8).
  const double want = 0.5 * (std::sqrt(1.0 + 1e-8) - 1e-4);
  EXPECT_NEAR(out[2], want, 1e-12);
  EXPECT_NEAR(out[5], want, 1e-12);
}

TEST(GradientFlow, EncoderAndDecoderSpotChecks) {
  std::mt19937_64 rng(8);
  HyperParams hp;
  auto b = build_models(hp, Variant::ours, 9);
  const Tensor x = random_tensor({2, 50, 75, 3}, rng);
  const Tensor y = random_grids(2, rng);
  auto loss = [&] {
    const auto d = b.encoder->encode(x, ForwardContext::eval());
    return ag::add(kl_prior_loss(d), reconstruction_loss(b.decoder->forward(d.mu, ForwardContext::eval()), y));
  };
  spot_check(b.encoder->parameters(), loss);
  spot_check(b.decoder->parameters(), loss);
}

TEST(GradientFlow, GeneratorAndDiscriminatorSpotChecks) {
  std::mt19937_64 rng(10);
  auto b = build_models(HyperParams{}, Variant::ours, 11);
  const Tensor z = random_z(3, 128, rng);
  const Tensor real = random_grids(3, rng);
  auto gen_loss = [&] {
    return generator_loss(
        b.discriminator->forward(b.generator->forward(z, ForwardContext::eval()), ForwardContext::eval()));
  };
  spot_check(b.generator->parameters(), gen_loss);
  auto disc_loss = [&] {
    const auto fake = b.generator->forward(z, ForwardContext::eval()).detach();
    return discriminator_loss(b.discriminator->forward(fake, ForwardContext::eval()),
                              b.discriminator->forward(real, ForwardContext::eval()),
                              Tensor::scalar(0.0), 10.0);
  };
  spot_check(b.discriminator->parameters(), disc_loss);
}

TEST(BatchHelpers, FramesAndGrids) {
  std::mt19937_64 rng(12);
  const Image a = oracle::random_image(75, 50, rng), bad(10, 10);
  const auto t = frames_to_tensor({&a, &a});
  EXPECT_EQ(t.shape(), (ag::Shape{2, 50, 75, 3}));
  EXPECT_EQ(t[(7 * 75 + 3) * 3 + 1], a.at(7, 3, 1));
  EXPECT_THROW(frames_to_tensor({&bad}), ShapeError);
  const auto s = oracle::random_segment(rng);
  EXPECT_EQ(decode_grid(tensor_to_grids(grids_to_tensor({one_hot(s)}))[0]), s);
}

TEST(ModelBundle, SameSeedSameWeights) {
  const auto a = build_models(HyperParams{}, Variant::ours, 5);
  const auto b = build_models(HyperParams{}, Variant::ours, 5);
  const auto c = build_models(HyperParams{}, Variant::ours, 6);
  const auto pa = a.all_parameters(), pb = b.all_parameters(), pc = c.all_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(pa[i].tensor.values(), pb[i].tensor.values());
    differs |= pa[i].tensor.values() != pc[i].tensor.values();
  }
  EXPECT_TRUE(differs);
}
