#pragma once

#include <array>
#include <string>
#include <vector>

#include "levelnet/tile_repr.hpp"

namespace levelnet {

struct FeatureVector {
  double linearity = 0.0;
  double leniency = 0.0;
  int interestingness = 0;

  std::array<double, 3> values() const {
    return {linearity, leniency, static_cast<double>(interestingness)};
  }
};

/// Jump physics of a tile-grid pathfinding agent.
struct AgentProfile {
  GameTag game;
  int max_jump_height = 4;  // tiles
  int max_jump_span = 4;    // tiles moved sideways at the top of a jump

  static AgentProfile super_mario();
  static AgentProfile kid_icarus();
  /// Throws ConfigError for unknown games.
  static AgentProfile for_game(const GameTag& game);
};

/// Tile classes seen by the metrics.
bool is_solid(char t);     // # T B S: topmost structure for linearity
bool is_support(char t);   // can be stood on: solid plus M
bool is_blocking(char t);  // cannot be entered: # B S (T and M are one-way)

double leniency(const LevelSegment& seg);
int interestingness(const LevelSegment& seg);
/// Negative mean squared residual of a least-squares line through the row
/// index of the topmost solid tile of every column that has one. Fewer than
/// two such columns give 0.
double linearity(const LevelSegment& seg);
FeatureVector features(const LevelSegment& seg);

/// Breadth-first search over standable cells (a passable, non-hazard cell
/// resting on a support tile; an empty row is imagined above the grid).
/// Moves: walk one column; step off a ledge and fall; jump up to
/// max_jump_height rows through passable cells, drift up to max_jump_span
/// columns at the top, then fall. True iff a cell standing on the lowest
/// structure row reaches a cell standing on the highest one. No structure
/// gives false, a single structure row gives true.
bool playability(const TileGrid& grid, const AgentProfile& profile);
bool playability(const LevelSegment& seg, const AgentProfile& profile);

/// Fraction of matching cells. Throws ShapeError on size mismatch.
double translation_accuracy(const LevelSegment& pred, const LevelSegment& truth);
double translation_accuracy(const std::vector<LevelSegment>& pred,
                            const std::vector<LevelSegment>& truth);

/// Energy distance (V-statistic) between two samples after standardizing
/// each coordinate by the pooled mean and standard deviation; coordinates
/// with zero pooled variance are dropped. Throws EmptySetError.
double e_distance(const std::vector<FeatureVector>& a, const std::vector<FeatureVector>& b);
double e_distance(const std::vector<std::vector<double>>& a,
                  const std::vector<std::vector<double>>& b);

using Point2 = std::array<double, 2>;

/// Cell-centred raster over [x0, x1] x [y0, y1], row 0 at y0.
struct RasterSpec {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  int nx = 100, ny = 100;

  double cell_x(int i) const { return x0 + (i + 0.5) * (x1 - x0) / nx; }
  double cell_y(int j) const { return y0 + (j + 0.5) * (y1 - y0) / ny; }
  double cell_area() const { return (x1 - x0) / nx * (y1 - y0) / ny; }
};

struct DensityRaster {
  RasterSpec spec;
  std::vector<double> values;  // ny rows of nx
  Point2 bandwidth{};

  double at(int j, int i) const { return values[static_cast<std::size_t>(j) * spec.nx + i]; }
  double integral() const;
  /// (row, column) of the largest value, first in row-major order on ties.
  std::pair<int, int> argmax() const;
};

inline constexpr double kBandwidthFloor = 1e-6;

/// Scott's rule per axis: h = sd * n^(-1/6), floored at 1e-6.
Point2 scott_bandwidth(const std::vector<Point2>& points);
/// Product-Gaussian KDE evaluated at cell centres. Throws TooFewPointsError
/// below two points.
DensityRaster kde_density(const std::vector<Point2>& points, const RasterSpec& grid);
/// Extent covering every point of every set by `margin` bandwidths.
RasterSpec covering_raster(const std::vector<std::vector<Point2>>& sets, int nx, int ny,
                           double margin = 4.0);

/// `segment_id,linearity,leniency,interestingness,playable_smb,playable_ki`.
std::string metric_report_header();
std::string metric_report_row(const std::string& id, const LevelSegment& seg);

}  // namespace levelnet
