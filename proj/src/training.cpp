#include "levelnet/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "levelnet/checkpoint.hpp"
#include "levelnet/error.hpp"

namespace levelnet {

namespace fs = std::filesystem;

std::string LossRecord::csv_header() {
  return "epoch,l_prior,l_reconstruction,l_disc,l_gen,gp,seconds";
}

std::string LossRecord::csv_row() const {
  std::ostringstream os;
  os << epoch << std::setprecision(10) << ',' << l_prior << ',' << l_reconstruction << ','
     << l_disc << ',' << l_gen << ',' << gp << ',' << std::setprecision(4) << std::fixed
     << seconds;
  return os.str();
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::vae: return "vae";
    case Stage::critic: return "critic";
    case Stage::generator: return "generator";
  }
  return "?";
}

TrainingSet load_split(const DatasetManifest& manifest, Split split) {
  TrainingSet out;
  for (const auto& r : manifest.records) {
    if (r.split != split) continue;
    out.frames.push_back(load_png(manifest.root / r.frame));
    std::ifstream in(manifest.root / r.label);
    if (!in) throw DiskError("cannot read label " + (manifest.root / r.label).string());
    std::stringstream ss;
    ss << in.rdbuf();
    out.labels.push_back(parse_segment(ss.str()));
    out.games.push_back(r.game);
  }
  return out;
}

Tensor batch_inputs(const TrainingSet& data, const std::vector<std::size_t>& idx,
                    InputMode mode) {
  if (mode == InputMode::text) return batch_targets(data, idx);
  std::vector<const Image*> frames;
  frames.reserve(idx.size());
  for (auto i : idx) frames.push_back(&data.frames.at(i));
  return frames_to_tensor(frames);
}

Tensor batch_targets(const TrainingSet& data, const std::vector<std::size_t>& idx) {
  std::vector<OneHotGrid> grids;
  grids.reserve(idx.size());
  for (auto i : idx) grids.push_back(one_hot(data.labels.at(i)));
  return grids_to_tensor(grids);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch,
                                                    std::size_t min_batch,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with an explicit draw so the order is the same on every
  // standard library.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += static_cast<std::size_t>(batch)) {
    const std::size_t e = std::min(n, s + static_cast<std::size_t>(batch));
    if (e - s < min_batch) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

namespace {

Tensor standard_normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(rows) * cols);
  for (auto& x : v) x = n(rng);
  return Tensor::constant({rows, cols}, std::move(v));
}

std::vector<NamedTensor> concat(std::vector<NamedTensor> a, const std::vector<NamedTensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

Trainer::Trainer(ModelBundle& bundle) : bundle_(bundle) {
  const HyperParams& hp = bundle.hp();
  const Variant v = bundle.variant();
  if (bundle.encoder) {
    // The unified decoder of the original VAE-GAN is trained in the
    // generation step; here only the encoder moves.
    auto params = v == Variant::original_vaegan
                      ? bundle.encoder_parameters()
                      : concat(bundle.encoder_parameters(), bundle.decoder_parameters());
    vae_opt_ = Adam(std::move(params), hp.vae_lr, hp.adam_beta1, hp.adam_beta2);
  }
  if (bundle.discriminator) {
    critic_opt_ = Adam(bundle.discriminator_parameters(), hp.gan_lr, hp.adam_beta1, hp.adam_beta2);
    gen_opt_ = Adam(bundle.generator_parameters(), hp.gan_lr, hp.adam_beta1, hp.adam_beta2);
  }
}

const std::vector<NamedTensor>& Trainer::stage_parameters(Stage s) const {
  switch (s) {
    case Stage::vae: return vae_opt_.params();
    case Stage::critic: return critic_opt_.params();
    case Stage::generator: return gen_opt_.params();
  }
  return vae_opt_.params();
}

void Trainer::check_finite(Stage s, double value, const char* what) const {
  if (std::isfinite(value)) return;
  std::ostringstream os;
  os << what << " became " << value << " in the " << to_string(s) << " stage (variant "
     << to_string(bundle_.variant()) << ", epoch " << epoch_ + 1 << ", batch " << batch_index_
     << ", updates so far vae=" << counters_.vae << " critic=" << counters_.critic
     << " generator=" << counters_.generator << ")";
  throw NanLossError(os.str());
}

std::pair<double, double> Trainer::vae_step(const Tensor& x, const Tensor& y, std::mt19937_64& rng) {
  const HyperParams& hp = bundle_.hp();
  ForwardContext ctx = ForwardContext::train(rng);
  ctx.noise = false;
  auto [dist, z] = bundle_.encoder->forward(x, ctx, rng);
  Tensor prior = kl_prior_loss(dist);
  Tensor recon = reconstruction_loss(bundle_.decoder->forward(z, ctx), y);
  Tensor loss = ag::scale(prior, hp.kl_weight) + recon;
  check_finite(Stage::vae, loss.item(), "VAE loss");
  auto grads = ag::grad(loss, vae_opt_.tensors());
  if (hook_) hook_(Stage::vae, false);
  vae_opt_.step(grads);
  ++counters_.vae;
  if (hook_) hook_(Stage::vae, true);
  return {prior.item(), recon.item()};
}

std::pair<double, double> Trainer::critic_step(const Tensor& real, std::mt19937_64& rng) {
  const HyperParams& hp = bundle_.hp();
  const int batch = real.dim(0);
  const ForwardContext ctx = ForwardContext::train(rng);
  Tensor fake;
  {
    ag::GradModeGuard no_grad(false);
    fake = bundle_.generate(standard_normal(batch, hp.latent_dim, rng), ctx);
  }
  const Discriminator& disc = *bundle_.discriminator;
  Tensor d_real = disc.forward(real, ctx);
  Tensor d_fake = disc.forward(fake, ctx);
  ForwardContext gp_ctx = ctx;
  gp_ctx.noise = false;
  Tensor gp = gradient_penalty(
      real, fake, [&](const Tensor& t) { return disc.forward(t, gp_ctx); }, rng);
  Tensor loss = discriminator_loss(d_fake, d_real, gp, hp.gp_lambda);
  check_finite(Stage::critic, loss.item(), "critic loss");
  auto grads = ag::grad(loss, critic_opt_.tensors());
  if (hook_) hook_(Stage::critic, false);
  critic_opt_.step(grads);
  ++counters_.critic;
  if (hook_) hook_(Stage::critic, true);
  return {loss.item(), gp.item()};
}

double Trainer::generator_step(const Tensor& x, const Tensor& y, std::mt19937_64& rng) {
  const HyperParams& hp = bundle_.hp();
  const ForwardContext ctx = ForwardContext::train(rng);
  Tensor fake = bundle_.generate(standard_normal(x.dim(0), hp.latent_dim, rng), ctx);
  Tensor loss = generator_loss(bundle_.discriminator->forward(fake, ctx));
  if (bundle_.variant() == Variant::original_vaegan) {
    ForwardContext enc_ctx = ctx;
    enc_ctx.update_stats = false;
    Tensor z;
    {
      ag::GradModeGuard no_grad(false);
      z = bundle_.encoder->forward(x, enc_ctx, rng).second;
    }
    Tensor recon = reconstruction_loss(bundle_.decoder->forward(z, ctx), y);
    loss = loss + ag::scale(recon, hp.recon_gen_coeff);
  }
  check_finite(Stage::generator, loss.item(), "generator loss");
  auto grads = ag::grad(loss, gen_opt_.tensors());
  if (hook_) hook_(Stage::generator, false);
  gen_opt_.step(grads);
  ++counters_.generator;
  if (hook_) hook_(Stage::generator, true);
  return loss.item();
}

LossRecord Trainer::train_epoch(const TrainingSet& data, std::mt19937_64& rng) {
  const auto start = std::chrono::steady_clock::now();
  const HyperParams& hp = bundle_.hp();
  const bool gan_stages = bundle_.discriminator.has_value();
  const bool vae_stage = bundle_.encoder.has_value();
  if (data.size() == 0) throw NoSamplesError("training set is empty");
  const auto batches = epoch_batches(data.size(), hp.batch, gan_stages ? 2 : 1, rng);
  if (batches.empty())
    throw BatchTooSmallError("no mini-batch of at least 2 samples can be formed from " +
                             std::to_string(data.size()) + " samples");

  LossRecord rec;
  rec.epoch = epoch_ + 1;
  long critic_steps = 0;
  for (batch_index_ = 0; batch_index_ < batches.size(); ++batch_index_) {
    const auto& idx = batches[batch_index_];
    Tensor y = batch_targets(data, idx);
    Tensor x = vae_stage ? batch_inputs(data, idx, bundle_.input_mode()) : y;
    if (vae_stage) {
      auto [prior, recon] = vae_step(x, y, rng);
      rec.l_prior += prior;
      rec.l_reconstruction += recon;
    }
    if (gan_stages) {
      for (int k = 0; k < hp.n_disc; ++k) {
        auto [l, gp] = critic_step(y, rng);
        rec.l_disc += l;
        rec.gp += gp;
        ++critic_steps;
      }
      rec.l_gen += generator_step(x, y, rng);
    }
  }
  const double nb = static_cast<double>(batches.size());
  rec.l_prior /= nb;
  rec.l_reconstruction /= nb;
  rec.l_gen /= nb;
  if (critic_steps) {
    rec.l_disc /= static_cast<double>(critic_steps);
    rec.gp /= static_cast<double>(critic_steps);
  }
  ++epoch_;
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<LevelSegment> translate_batch(ModelBundle& bundle, const Tensor& inputs) {
  if (!bundle.encoder || !bundle.decoder)
    throw MissingNetworkError("variant " + to_string(bundle.variant()) +
                              " cannot translate (no encoder)");
  ag::GradModeGuard no_grad(false);
  const ForwardContext ctx = ForwardContext::eval();
  auto dist = bundle.encoder->encode(inputs, ctx);
  auto grids = tensor_to_grids(bundle.decoder->forward(dist.mu, ctx));
  std::vector<LevelSegment> out;
  out.reserve(grids.size());
  for (const auto& g : grids) out.push_back(decode_grid(g));
  return out;
}

std::vector<LevelSegment> translate_all(ModelBundle& bundle, const TrainingSet& data,
                                        std::size_t chunk) {
  std::vector<LevelSegment> out;
  out.reserve(data.size());
  for (std::size_t s = 0; s < data.size(); s += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = s; i < std::min(data.size(), s + chunk); ++i) idx.push_back(i);
    auto part = translate_batch(bundle, batch_inputs(data, idx, bundle.input_mode()));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

namespace {

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw DiskError("cannot write " + file.string());
  out << text;
  if (!out) throw DiskError("failed writing " + file.string());
}

}  // namespace

TrainResult train(const TrainRunConfig& config) {
  const DatasetManifest manifest = DatasetManifest::load(config.manifest);
  return train(config, load_split(manifest, Split::train));
}

TrainResult train(const TrainRunConfig& config, const TrainingSet& data) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw DiskError("cannot create " + config.out_dir.string() + ": " + ec.message());

  ModelBundle bundle(config.variant, config.hp, config.seed);
  Trainer trainer(bundle);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  nlohmann::json run = {{"variant", to_string(config.variant)},
                        {"seed", config.seed},
                        {"epochs", config.hp.epochs},
                        {"batch", config.hp.batch},
                        {"train_samples", data.size()},
                        {"manifest", config.manifest.string()},
                        {"hyperparams", nlohmann::json::parse(hyperparams_json(config.hp))},
                        {"version", LEVELNET_VERSION}};
  write_text(config.out_dir / "run.json", run.dump(1) + "\n");

  TrainResult result;
  result.history_file = config.out_dir / "loss_history.csv";
  std::ofstream hist(result.history_file);
  if (!hist) throw DiskError("cannot write " + result.history_file.string());
  hist << LossRecord::csv_header() << "\n";
  for (int e = 0; e < config.hp.epochs; ++e) {
    LossRecord rec = trainer.train_epoch(data, rng);
    hist << rec.csv_row() << "\n" << std::flush;
    result.history.push_back(rec);
    if (config.on_epoch) config.on_epoch(rec);
    if (config.checkpoint_every > 0 && rec.epoch % config.checkpoint_every == 0)
      save_checkpoint(bundle, config.out_dir / ("checkpoint-epoch-" + std::to_string(rec.epoch)),
                      rec.epoch);
  }
  if (!hist) throw DiskError("failed writing " + result.history_file.string());
  result.checkpoint = config.out_dir / "checkpoint";
  save_checkpoint(bundle, result.checkpoint, trainer.epochs_done());
  return result;
}

}  // namespace levelnet
