#include "levelnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "levelnet/error.hpp"

namespace levelnet {

AgentProfile AgentProfile::super_mario() { return {kSuperMarioBros, 4, 4}; }
AgentProfile AgentProfile::kid_icarus() { return {kKidIcarus, 6, 3}; }

AgentProfile AgentProfile::for_game(const GameTag& game) {
  if (game == kSuperMarioBros) return super_mario();
  if (game == kKidIcarus) return kid_icarus();
  throw ConfigError("no agent profile for game '" + game + "'");
}

bool is_solid(char t) { return t == kSolid || t == kSolidTop || t == kBlock || t == kBreakable; }
bool is_support(char t) { return is_solid(t) || t == kMoving; }
bool is_blocking(char t) { return t == kSolid || t == kBlock || t == kBreakable; }

double leniency(const LevelSegment& seg) {
  return kSegmentCells - seg.count(kHazard) - 0.5 * seg.count(kMoving);
}

int interestingness(const LevelSegment& seg) {
  return seg.count(kDoor) + seg.count(kMoving) + seg.count(kCollectible) + seg.count(kHazard);
}

double linearity(const LevelSegment& seg) {
  std::vector<double> xs, ys;
  for (int c = 0; c < kSegmentCols; ++c)
    for (int r = 0; r < kSegmentRows; ++r)
      if (is_solid(seg.at(r, c))) {
        xs.push_back(c);
        ys.push_back(r);
        break;
      }
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double res = ys[i] - (my + slope * (xs[i] - mx));
    sse += res * res;
  }
  return -sse / static_cast<double>(n);
}

FeatureVector features(const LevelSegment& seg) {
  return {linearity(seg), leniency(seg), interestingness(seg)};
}

// ---------------------------------------------------------------------------

namespace {

// Grid with one imagined empty row on top: padded row p is grid row p - 1.
class AgentView {
 public:
  explicit AgentView(const TileGrid& g) : g_(g), rows_(g.rows() + 1), cols_(g.cols()) {}
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  char tile(int p, int c) const { return p == 0 ? kEmpty : g_.at(p - 1, c); }
  bool inside(int p, int c) const { return p >= 0 && p < rows_ && c >= 0 && c < cols_; }
  bool passable(int p, int c) const { return inside(p, c) && !is_blocking(tile(p, c)); }
  bool standable(int p, int c) const {
    return passable(p, c) && tile(p, c) != kHazard && p + 1 < rows_ && is_support(tile(p + 1, c));
  }
  /// Lands by falling from (p, c); -1 when the fall leaves the grid or ends
  /// on a hazard.
  int fall(int p, int c) const {
    while (true) {
      if (standable(p, c)) return p;
      if (p + 1 >= rows_ || !passable(p + 1, c) || is_support(tile(p + 1, c))) return -1;
      ++p;
    }
  }

 private:
  const TileGrid& g_;
  int rows_, cols_;
};

}  // namespace

bool playability(const TileGrid& grid, const AgentProfile& profile) {
  if (profile.max_jump_height < 1 || profile.max_jump_span < 1)
    throw ConfigError("agent jump parameters must be >= 1");
  int lowest = -1, highest = -1;
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c)
      if (is_support(grid.at(r, c))) {
        if (highest < 0) highest = r;
        lowest = r;
      }
  if (lowest < 0) return false;
  if (lowest == highest) return true;

  const AgentView v(grid);
  const int R = v.rows(), C = v.cols();
  // Standing on grid row r means occupying padded row r.
  auto on_row = [&](int p, int c, int r) { return p == r && is_support(grid.at(r, c)); };

  std::vector<char> seen(static_cast<std::size_t>(R) * C, 0);
  std::deque<std::pair<int, int>> queue;
  auto visit = [&](int p, int c) {
    if (p < 0) return;
    auto& s = seen[static_cast<std::size_t>(p) * C + c];
    if (!s) {
      s = 1;
      queue.emplace_back(p, c);
    }
  };
  for (int c = 0; c < C; ++c)
    if (v.standable(lowest, c) && on_row(lowest, c, lowest)) visit(lowest, c);

  while (!queue.empty()) {
    auto [p, c] = queue.front();
    queue.pop_front();
    if (on_row(p, c, highest)) return true;
    for (int dir : {-1, 1}) {
      const int nc = c + dir;
      if (v.passable(p, nc)) visit(v.fall(p, nc), nc);  // walk or step off
    }
    for (int up = 1; up <= profile.max_jump_height; ++up) {
      const int top = p - up;
      if (!v.passable(top, c)) break;
      visit(v.fall(top, c), c);
      for (int dir : {-1, 1}) {
        for (int s = 1; s <= profile.max_jump_span; ++s) {
          const int nc = c + dir * s;
          if (!v.passable(top, nc)) break;
          visit(v.fall(top, nc), nc);
        }
      }
    }
  }
  return false;
}

bool playability(const LevelSegment& seg, const AgentProfile& profile) {
  TileGrid g(kSegmentRows, kSegmentCols);
  for (int r = 0; r < kSegmentRows; ++r)
    for (int c = 0; c < kSegmentCols; ++c) g.set(r, c, seg.at(r, c));
  return playability(g, profile);
}

// ---------------------------------------------------------------------------

double translation_accuracy(const LevelSegment& pred, const LevelSegment& truth) {
  int same = 0;
  for (int k = 0; k < kSegmentCells; ++k) same += pred.cells()[k] == truth.cells()[k];
  return static_cast<double>(same) / kSegmentCells;
}

double translation_accuracy(const std::vector<LevelSegment>& pred,
                            const std::vector<LevelSegment>& truth) {
  if (pred.size() != truth.size())
    throw ShapeError(std::to_string(pred.size()) + " predictions for " +
                     std::to_string(truth.size()) + " labels");
  if (pred.empty()) throw EmptySetError("no segments to compare");
  double total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += translation_accuracy(pred[i], truth[i]);
  return total / static_cast<double>(pred.size());
}

double e_distance(const std::vector<std::vector<double>>& a,
                  const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) throw EmptySetError("energy distance needs two non-empty samples");
  const std::size_t dim = a.front().size();
  for (const auto* set : {&a, &b})
    for (const auto& p : *set)
      if (p.size() != dim) throw ShapeError("feature vectors differ in length");

  // Pooled standardization; constant coordinates carry no information.
  const double n = static_cast<double>(a.size() + b.size());
  std::vector<std::size_t> keep;
  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (std::size_t k = 0; k < dim; ++k) {
    for (const auto* set : {&a, &b})
      for (const auto& p : *set) mean[k] += p[k];
    mean[k] /= n;
    for (const auto* set : {&a, &b})
      for (const auto& p : *set) sd[k] += (p[k] - mean[k]) * (p[k] - mean[k]);
    sd[k] = std::sqrt(sd[k] / n);
    if (sd[k] > 0) keep.push_back(k);
  }
  if (keep.empty()) return 0.0;
  auto standardize = [&](const std::vector<std::vector<double>>& set) {
    std::vector<double> out;
    out.reserve(set.size() * keep.size());
    for (const auto& p : set)
      for (auto k : keep) out.push_back((p[k] - mean[k]) / sd[k]);
    return out;
  };
  const auto sa = standardize(a), sb = standardize(b);
  const std::size_t d = keep.size();
  auto mean_dist = [d](const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t nx = x.size() / d, ny = y.size() / d;
    double total = 0;
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = x[i * d + k] - y[j * d + k];
          s += diff * diff;
        }
        total += std::sqrt(s);
      }
    return total / (static_cast<double>(nx) * static_cast<double>(ny));
  };
  return 2.0 * mean_dist(sa, sb) - mean_dist(sa, sa) - mean_dist(sb, sb);
}

double e_distance(const std::vector<FeatureVector>& a, const std::vector<FeatureVector>& b) {
  auto lift = [](const std::vector<FeatureVector>& v) {
    std::vector<std::vector<double>> out;
    out.reserve(v.size());
    for (const auto& f : v) {
      auto arr = f.values();
      out.emplace_back(arr.begin(), arr.end());
    }
    return out;
  };
  return e_distance(lift(a), lift(b));
}

// ---------------------------------------------------------------------------

double DensityRaster::integral() const {
  double s = 0;
  for (double v : values) s += v;
  return s * spec.cell_area();
}

std::pair<int, int> DensityRaster::argmax() const {
  const auto it = std::max_element(values.begin(), values.end());
  const auto k = static_cast<int>(it - values.begin());
  return {k / spec.nx, k % spec.nx};
}

Point2 scott_bandwidth(const std::vector<Point2>& points) {
  const double n = static_cast<double>(points.size());
  Point2 h{};
  for (int k = 0; k < 2; ++k) {
    double m = 0;
    for (const auto& p : points) m += p[k];
    m /= n;
    double ss = 0;
    for (const auto& p : points) ss += (p[k] - m) * (p[k] - m);
    const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    h[k] = std::max(kBandwidthFloor, sd * std::pow(n, -1.0 / 6.0));
  }
  return h;
}

DensityRaster kde_density(const std::vector<Point2>& points, const RasterSpec& grid) {
  if (points.size() < 2)
    throw TooFewPointsError("density estimation needs at least 2 points, got " +
                            std::to_string(points.size()));
  if (grid.nx < 1 || grid.ny < 1 || !(grid.x1 > grid.x0) || !(grid.y1 > grid.y0))
    throw ShapeError("empty density raster");
  DensityRaster out;
  out.spec = grid;
  out.bandwidth = scott_bandwidth(points);
  const double hx = out.bandwidth[0], hy = out.bandwidth[1];
  const double norm = 1.0 / (2.0 * M_PI * hx * hy * static_cast<double>(points.size()));
  // The kernel is separable, so tabulate each axis once per point.
  std::vector<double> kx(static_cast<std::size_t>(grid.nx)), ky(static_cast<std::size_t>(grid.ny));
  out.values.assign(static_cast<std::size_t>(grid.nx) * grid.ny, 0.0);
  for (const auto& p : points) {
    for (int i = 0; i < grid.nx; ++i) {
      const double u = (grid.cell_x(i) - p[0]) / hx;
      kx[i] = std::exp(-0.5 * u * u);
    }
    for (int j = 0; j < grid.ny; ++j) {
      const double u = (grid.cell_y(j) - p[1]) / hy;
      ky[j] = std::exp(-0.5 * u * u);
    }
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i)
        out.values[static_cast<std::size_t>(j) * grid.nx + i] += ky[j] * kx[i];
  }
  for (double& v : out.values) v *= norm;
  return out;
}

RasterSpec covering_raster(const std::vector<std::vector<Point2>>& sets, int nx, int ny,
                           double margin) {
  RasterSpec s;
  s.nx = nx;
  s.ny = ny;
  bool any = false;
  for (const auto& pts : sets) {
    if (pts.empty()) continue;
    const Point2 h = scott_bandwidth(pts);
    for (const auto& p : pts) {
      const double lx = p[0] - margin * h[0], hx = p[0] + margin * h[0];
      const double ly = p[1] - margin * h[1], hy = p[1] + margin * h[1];
      if (!any) {
        s.x0 = lx, s.x1 = hx, s.y0 = ly, s.y1 = hy;
        any = true;
      }
      s.x0 = std::min(s.x0, lx), s.x1 = std::max(s.x1, hx);
      s.y0 = std::min(s.y0, ly), s.y1 = std::max(s.y1, hy);
    }
  }
  if (!any) throw TooFewPointsError("no points to cover");
  return s;
}

std::string metric_report_header() {
  return "segment_id,linearity,leniency,interestingness,playable_smb,playable_ki";
}

std::string metric_report_row(const std::string& id, const LevelSegment& seg) {
  const FeatureVector f = features(seg);
  std::ostringstream os;
  os.precision(10);
  os << id << ',' << f.linearity << ',' << f.leniency << ',' << f.interestingness << ','
     << (playability(seg, AgentProfile::super_mario()) ? 1 : 0) << ','
     << (playability(seg, AgentProfile::kid_icarus()) ? 1 : 0);
  return os.str();
}

}  // namespace levelnet
