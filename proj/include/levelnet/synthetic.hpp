#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "levelnet/dataset.hpp"
#include "levelnet/render.hpp"
#include "levelnet/training.hpp"

namespace levelnet {

/// Procedural platformer structure. "smb" draws a horizontal ground level
/// with gaps, pipes, floating blocks, enemies and coins; "ki" draws a
/// vertical climb of platforms, moving platforms, doors and hazards. Any
/// other tag uses the "smb" generator. Grids must be at least 10x15.
TileGrid random_level(const GameTag& game, int rows, int cols, std::mt19937_64& rng);
LevelSegment random_segment(const GameTag& game, std::mt19937_64& rng);

/// Renders, adds N(0, sigma^2) pixel noise and downsizes to 75x50.
Image synthetic_frame(const LevelSegment& seg, const Spritesheet& sheet, double noise_sigma,
                      std::mt19937_64& rng);

struct SyntheticOptions {
  std::size_t pairs = 32;
  std::vector<GameTag> games = {kSuperMarioBros, kKidIcarus};
  int levels_per_game = 4;
  double noise_sigma = 0.03;
  std::uint64_t seed = 0;
};

/// Frame/label pairs drawn in round-robin over games; pair k of a game is
/// attributed to level "synth-<k mod levels_per_game>".
std::vector<PairedSample> synthetic_pairs(const SyntheticOptions& opt);
TrainingSet to_training_set(const std::vector<PairedSample>& pairs);

struct SyntheticLayoutOptions {
  std::vector<GameTag> games = {kSuperMarioBros, kKidIcarus};
  int levels_per_game = 3;
  int frames_per_video = 24;
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;
};

/// Writes a builder input tree (levels in raw game characters, per-level
/// frame dumps, `builder.cfg`) under `out`. Returns the config path.
std::filesystem::path write_synthetic_layout(const std::filesystem::path& out,
                                             const SyntheticLayoutOptions& opt);

}  // namespace levelnet
