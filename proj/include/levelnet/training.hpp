#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "levelnet/dataset.hpp"
#include "levelnet/losses.hpp"
#include "levelnet/networks.hpp"
#include "levelnet/optim.hpp"

namespace levelnet {

struct LossRecord {
  int epoch = 0;
  double l_prior = 0.0;
  double l_reconstruction = 0.0;
  double l_disc = 0.0;
  double l_gen = 0.0;
  double gp = 0.0;
  double seconds = 0.0;

  static std::string csv_header();
  std::string csv_row() const;
};

/// Frames and labels of one split, in manifest order.
struct TrainingSet {
  std::vector<Image> frames;  // 75x50
  std::vector<LevelSegment> labels;
  std::vector<GameTag> games;

  std::size_t size() const { return labels.size(); }
};

TrainingSet load_split(const DatasetManifest& manifest, Split split);

/// Network input for a batch: frames for pixel variants, one-hot labels for
/// text variants.
Tensor batch_inputs(const TrainingSet& data, const std::vector<std::size_t>& idx, InputMode mode);
Tensor batch_targets(const TrainingSet& data, const std::vector<std::size_t>& idx);

enum class Stage { vae, critic, generator };
std::string to_string(Stage s);

struct StageCounters {
  long vae = 0;
  long critic = 0;
  long generator = 0;
};

/// Called around every optimizer update with `after` false, then true.
using StageHook = std::function<void(Stage stage, bool after)>;

/// Owns the optimizers of one bundle and runs the three-stage update loop:
/// per mini-batch one VAE step, n_disc critic steps, one generator step,
/// each stage limited to the networks the variant has.
class Trainer {
 public:
  explicit Trainer(ModelBundle& bundle);

  LossRecord train_epoch(const TrainingSet& data, std::mt19937_64& rng);

  const StageCounters& counters() const { return counters_; }
  void set_stage_hook(StageHook hook) { hook_ = std::move(hook); }
  int epochs_done() const { return epoch_; }

  /// Parameters each stage is allowed to change.
  const std::vector<NamedTensor>& stage_parameters(Stage s) const;

 private:
  /// (prior, reconstruction).
  std::pair<double, double> vae_step(const Tensor& x, const Tensor& y, std::mt19937_64& rng);
  std::pair<double, double> critic_step(const Tensor& real, std::mt19937_64& rng);
  double generator_step(const Tensor& x, const Tensor& y, std::mt19937_64& rng);
  void check_finite(Stage s, double value, const char* what) const;

  ModelBundle& bundle_;
  Adam vae_opt_, critic_opt_, gen_opt_;
  StageCounters counters_;
  StageHook hook_;
  int epoch_ = 0;
  std::size_t batch_index_ = 0;
};

/// Index batches of one shuffled epoch. Trailing batches smaller than
/// `min_batch` are dropped.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch, std::size_t min_batch,
                                                    std::mt19937_64& rng);

struct TrainRunConfig {
  HyperParams hp;
  std::filesystem::path manifest;
  Variant variant = Variant::ours;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: final checkpoint only
  std::filesystem::path out_dir;
  std::function<void(const LossRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<LossRecord> history;
  std::filesystem::path checkpoint;
  std::filesystem::path history_file;
};

/// Full run: writes `<out>/checkpoint/`, `<out>/checkpoint-epoch-<n>/` at the
/// configured cadence, `<out>/loss_history.csv` and `<out>/run.json`.
TrainResult train(const TrainRunConfig& config);
/// Same loop over an in-memory set.
TrainResult train(const TrainRunConfig& config, const TrainingSet& data);

/// Argmax translation through the latent mean (no sampling, eval mode).
std::vector<LevelSegment> translate_batch(ModelBundle& bundle, const Tensor& inputs);
std::vector<LevelSegment> translate_all(ModelBundle& bundle, const TrainingSet& data,
                                        std::size_t chunk = 32);

}  // namespace levelnet
