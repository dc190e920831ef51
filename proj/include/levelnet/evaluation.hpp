#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "levelnet/dataset.hpp"
#include "levelnet/metrics.hpp"
#include "levelnet/networks.hpp"
#include "levelnet/render.hpp"

namespace levelnet {

/// Decodes n prior samples z ~ N(0, I) drawn from `seed`, in order.
/// Throws MissingNetworkError.
std::vector<LevelSegment> generate_segments(const ModelBundle& bundle, std::size_t n,
                                            std::uint64_t seed);
/// `<dir>/<index>.txt` with zero-padded indices; optional PNG renders.
void write_segments(const std::filesystem::path& dir, const std::vector<LevelSegment>& segs,
                    const Spritesheet* sheet = nullptr);

struct TranslateOptions {
  bool auto_resize = false;
  int native_tile_px = kTilePx;
};

/// Brings an arbitrary frame to 75x50: rescale to 16 px tiles, centre crop
/// of the 240x160 window when the frame is larger, area downsizing.
Image prepare_frame(const Image& frame, int native_tile_px);

struct TranslationResult {
  std::vector<std::string> names;  // frame file stems
  std::vector<LevelSegment> segments;
  std::optional<double> accuracy;  // when labels were found for every frame
  std::size_t labelled = 0;
};

/// Translates every PNG of `frames_dir` (sorted by name). Labels are read
/// from `labels_dir/<stem>.txt` when that directory exists.
/// Throws ShapeError for frames that are not 75x50 unless auto-resizing.
TranslationResult translate_frames(ModelBundle& bundle, const std::filesystem::path& frames_dir,
                                   const std::filesystem::path& labels_dir,
                                   const TranslateOptions& opt = {});

struct EvaluationRow {
  std::string model;
  std::optional<double> train_accuracy, test_accuracy;
  double train_e_distance = 0.0;
  double test_e_distance = 0.0;
  double playability_smb = 0.0;
  double playability_ki = 0.0;
  std::size_t generated = 0;
  std::string checkpoint;
  std::string checkpoint_id;
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
  std::uint64_t seed = 0;
  std::string manifest;
  std::string manifest_hash;
  std::string config_hash;
  std::size_t train_count = 0;
  std::size_t test_count = 0;

  static std::string csv_header();
  std::string to_csv() const;
  std::string to_json() const;
};

struct NamedCheckpoint {
  std::string name;
  std::filesystem::path dir;
};

/// Side-by-side comparison of every checkpoint against the dataset splits
/// (original, non-upsampled records). Generated sample counts match each
/// split. The first row is the dataset compared with itself. When
/// `features_dir` is set, per-model and per-game feature tables are written
/// there for plotting.
EvaluationReport evaluate(const std::vector<NamedCheckpoint>& checkpoints,
                          const DatasetManifest& manifest, std::uint64_t seed,
                          const std::filesystem::path& features_dir = {},
                          const std::function<void(const std::string&)>& log = {});

/// Reads (linearity, leniency) from a metric report table. Throws
/// TooFewPointsError naming the file when it has fewer than 2 rows.
std::vector<Point2> read_feature_points(const std::filesystem::path& csv);

struct KdePlotOptions {
  int width = 240;
  int height = 240;
};

/// Density raster of the model (red) over the reference (blue) on a shared
/// extent; linearity runs left to right, leniency bottom to top.
Image kde_plot(const std::vector<Point2>& model, const std::vector<Point2>& reference,
               const KdePlotOptions& opt = {});

/// Writes `kde_<model>_<game>.png` for every pair; returns the files.
std::vector<std::filesystem::path> plot_kde(const std::vector<std::filesystem::path>& model_csvs,
                                            const std::vector<std::pair<GameTag, std::filesystem::path>>& references,
                                            const std::filesystem::path& out_dir,
                                            const KdePlotOptions& opt = {});

}  // namespace levelnet
