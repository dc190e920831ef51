#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "levelnet/config.hpp"
#include "levelnet/image.hpp"
#include "levelnet/template_match.hpp"
#include "levelnet/tile_repr.hpp"

namespace levelnet {

inline constexpr int kTilePx = 16;
inline constexpr int kFrameWidth = 75;
inline constexpr int kFrameHeight = 50;
/// Pixel size of a 10x15 tile window at 16 px per tile.
inline constexpr int kWindowWidthPx = kSegmentCols * kTilePx;
inline constexpr int kWindowHeightPx = kSegmentRows * kTilePx;

struct RawFrame {
  Image image;
  std::string video_id;
  double timestamp = 0.0;
};

/// A full level: image with 16x16 tiles and its unified tile grid.
struct AnnotatedLevel {
  Image image;
  TileGrid grid;
  GameTag game;
  std::string level_id;

  /// Throws DimensionError unless the image is exactly 16 px per tile.
  void validate() const;
};

enum class Split { train, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct PairedSample {
  Image frame;  // 75x50
  LevelSegment label;
  GameTag game;
  std::string level_id;
  Split split = Split::train;
  double score = 0.0;
  int tile_row = 0;
  int tile_col = 0;
  int offset_x = 0;
  int offset_y = 0;
  std::string video_id;
  double timestamp = 0.0;
};

/// Frames kept when sampling at `rate` frames per second: the first frame of
/// every 1/rate-second window, windows anchored at the first timestamp.
/// Throws EmptyStreamError, ConfigError (rate <= 0) or StreamOrderError.
std::vector<std::size_t> sample_frame_indices(std::span<const double> timestamps, double rate);
std::vector<RawFrame> sample_frames(const std::vector<RawFrame>& stream, double rate);

/// Bilinear rescale by 16 / native_tile_px. Throws BadTileSizeError.
RawFrame rescale_to_tile_size(const RawFrame& frame, int native_tile_px);

MatchLocation locate_in_level(const RawFrame& frame, const AnnotatedLevel& level);

/// Locates the frame, snaps to the nearest tile, and cuts the 10x15 label
/// window and the matching frame pixels (downsized to 75x50). Throws
/// LowScoreRejection or WindowOutOfBoundsError.
PairedSample pair_frame(const RawFrame& frame, const AnnotatedLevel& level, double threshold);

/// Indices into `train_games` forming a class-balanced training list: every
/// original index once, plus uniform with-replacement draws from each
/// minority game until all games match the majority count.
std::vector<std::size_t> balance_indices(const std::vector<GameTag>& train_games,
                                         std::uint64_t seed);

struct BuilderConfig {
  std::filesystem::path frames_dir;
  std::filesystem::path levels_dir;
  std::filesystem::path mapping_dir;  // empty: level text is already unified
  double threshold = 0.7;
  std::uint64_t seed = 0;
  std::vector<std::string> test_levels;  // "game/level-id"
  std::map<GameTag, double> fps;
  std::map<GameTag, int> native_tile_px;
  std::map<std::string, std::string> video_level;  // video id -> "game/level-id"
  std::map<std::string, double> video_fps;         // capture rate of frame dumps
  KeyValueConfig source;

  double fps_for(const GameTag& game) const;
  int tile_px_for(const GameTag& game) const;

  /// Relative paths resolve against `base_dir`.
  static BuilderConfig from(const KeyValueConfig& cfg, const std::filesystem::path& base_dir);
  static BuilderConfig load(const std::filesystem::path& file);
};

struct ManifestRecord {
  std::string frame;  // relative to the dataset root
  std::string label;
  GameTag game;
  std::string level_id;
  Split split = Split::train;
  int tile_row = 0;
  int tile_col = 0;
  int offset_x = 0;
  int offset_y = 0;
  double score = 0.0;
  std::string video_id;
  double timestamp = 0.0;
  bool upsampled = false;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::string config_hash;
  std::uint64_t seed = 0;
  double threshold = 0.0;
  std::map<std::string, std::string> config;
  std::filesystem::path root;  // directory holding manifest.json; not serialized

  std::size_t count(const GameTag& game, Split split) const;
  std::vector<GameTag> games() const;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text, const std::filesystem::path& root);
  static DatasetManifest load(const std::filesystem::path& manifest_file);
  void save(const std::filesystem::path& manifest_file) const;
};

struct BuildStats {
  std::size_t frames_seen = 0;
  std::size_t frames_sampled = 0;
  std::size_t rejected_low_score = 0;
  std::size_t rejected_out_of_bounds = 0;
};

/// Loads `levels/<game>/<level-id>.png` and `.txt`. Throws MissingLevelError.
AnnotatedLevel load_level(const BuilderConfig& cfg, const GameTag& game,
                          const std::string& level_id);

/// Runs the whole pipeline and writes `<out>/<split>/frames/<n>.png`,
/// `<out>/<split>/labels/<n>.txt` and `<out>/manifest.json`.
DatasetManifest build_dataset(const BuilderConfig& cfg, const std::filesystem::path& out_dir,
                              BuildStats* stats = nullptr);

/// Assembles and writes a dataset from already-paired samples (their `split`
/// field is recomputed from `test_levels`).
DatasetManifest write_dataset(std::vector<PairedSample> samples,
                              const std::vector<std::string>& test_levels, std::uint64_t seed,
                              const KeyValueConfig& config_echo, double threshold,
                              const std::filesystem::path& out_dir);

}  // namespace levelnet
