#include "levelnet/synthetic.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "levelnet/error.hpp"

namespace levelnet {

namespace fs = std::filesystem;

namespace {

bool chance(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }
int between(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

void horizontal_level(TileGrid& g, std::mt19937_64& rng) {
  const int R = g.rows(), C = g.cols();
  const int ground = R - 2;
  std::vector<bool> gap(C, false);
  for (int c = 2; c < C - 3; ++c) {
    if (chance(rng, 0.07)) {
      const int w = between(rng, 1, 3);
      for (int k = 0; k < w && c + k < C - 2; ++k) gap[c + k] = true;
      c += w + 2;
    }
  }
  for (int c = 0; c < C; ++c)
    if (!gap[c])
      for (int r = ground; r < R; ++r) g.set(r, c, kSolid);

  for (int c = 1; c + 1 < C; ++c) {
    if (gap[c] || gap[c + 1] || !chance(rng, 0.05)) continue;
    const int h = between(rng, 2, 3);
    for (int r = ground - h; r < ground; ++r) {
      g.set(r, c, kDoor);
      g.set(r, c + 1, kDoor);
    }
    c += 3;
  }
  for (int c = 1; c < C - 1; ++c) {
    if (!chance(rng, 0.08)) continue;
    const int row = ground - between(rng, 3, 5);
    const int len = between(rng, 1, 5);
    for (int k = 0; k < len && c + k < C; ++k) {
      if (g.at(row, c + k) != kEmpty) continue;
      g.set(row, c + k, chance(rng, 0.35) ? kBlock : kBreakable);
      if (row >= 1 && chance(rng, 0.25)) g.set(row - 1, c + k, kCollectible);
    }
    c += len + 1;
  }
  for (int c = 0; c < C; ++c) {
    if (gap[c] || g.at(ground - 1, c) != kEmpty) continue;
    if (chance(rng, 0.06)) g.set(ground - 1, c, kHazard);
    else if (chance(rng, 0.03)) g.set(ground - 2 - between(rng, 0, 1), c, kCollectible);
  }
}

void vertical_level(TileGrid& g, std::mt19937_64& rng) {
  const int R = g.rows(), C = g.cols();
  for (int c = 0; c < C; ++c) g.set(R - 1, c, kSolid);
  const bool left = chance(rng, 0.6), right = chance(rng, 0.6);
  for (int r = 0; r < R; ++r) {
    if (left) g.set(r, 0, kSolid);
    if (right) g.set(r, C - 1, kSolid);
  }
  for (int r = R - 1 - between(rng, 2, 3); r >= 1; r -= between(rng, 2, 4)) {
    const int pieces = between(rng, 1, 2);
    for (int p = 0; p < pieces; ++p) {
      const bool moving = chance(rng, 0.25);
      const int len = moving ? between(rng, 2, 3) : between(rng, 2, 6);
      const int start = between(rng, 1, std::max(1, C - 1 - len));
      for (int k = 0; k < len && start + k < C - 1; ++k) {
        g.set(r, start + k, moving ? kMoving : kSolidTop);
        if (r < 1 || g.at(r - 1, start + k) != kEmpty || moving) continue;
        if (chance(rng, 0.06)) g.set(r - 1, start + k, kDoor);
        else if (chance(rng, 0.08)) g.set(r - 1, start + k, kHazard);
      }
    }
  }
  for (int k = 0; k < C * R / 60; ++k) {
    const int r = between(rng, 0, R - 2), c = between(rng, 1, C - 2);
    if (g.at(r, c) == kEmpty) g.set(r, c, kSolid);
  }
}

// Raw characters of each game's annotation files, inverse of data/mappings.
char raw_char(const GameTag& game, char unified) {
  if (game != kSuperMarioBros) return unified;
  switch (unified) {
    case kSolid: return 'X';
    case kBlock: return '?';
    case kHazard: return 'E';
    case kDoor: return '<';
    case kCollectible: return 'o';
    default: return unified;
  }
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw DiskError("cannot write " + file.string());
  out << text;
}

}  // namespace

TileGrid random_level(const GameTag& game, int rows, int cols, std::mt19937_64& rng) {
  if (rows < kSegmentRows || cols < kSegmentCols)
    throw DimensionError("synthetic levels need at least 10x15 tiles");
  TileGrid g(rows, cols, kEmpty);
  if (game == kKidIcarus) vertical_level(g, rng);
  else horizontal_level(g, rng);
  return g;
}

LevelSegment random_segment(const GameTag& game, std::mt19937_64& rng) {
  return random_level(game, kSegmentRows, kSegmentCols, rng).window(0, 0);
}

Image synthetic_frame(const LevelSegment& seg, const Spritesheet& sheet, double noise_sigma,
                      std::mt19937_64& rng) {
  Image img = render_tiles(seg, sheet);
  if (noise_sigma > 0) add_gaussian_noise(img, noise_sigma, rng);
  return resize_area(img, kFrameWidth, kFrameHeight);
}

std::vector<PairedSample> synthetic_pairs(const SyntheticOptions& opt) {
  if (opt.games.empty() || opt.levels_per_game < 1) throw ConfigError("empty synthetic corpus spec");
  std::mt19937_64 rng(opt.seed);
  std::map<GameTag, Spritesheet> sheets;
  std::map<GameTag, int> drawn;
  for (const auto& g : opt.games) sheets.emplace(g, Spritesheet::procedural(sprite_style_for(g)));
  std::vector<PairedSample> out;
  for (std::size_t i = 0; i < opt.pairs; ++i) {
    const GameTag& game = opt.games[i % opt.games.size()];
    PairedSample s;
    s.game = game;
    s.label = random_segment(game, rng);
    s.frame = synthetic_frame(s.label, sheets.at(game), opt.noise_sigma, rng);
    const int k = drawn[game]++;
    s.level_id = "synth-" + std::to_string(k % opt.levels_per_game);
    s.tile_col = k;
    s.score = 1.0;
    s.video_id = "synthetic";
    out.push_back(std::move(s));
  }
  return out;
}

TrainingSet to_training_set(const std::vector<PairedSample>& pairs) {
  TrainingSet t;
  for (const auto& p : pairs) {
    t.frames.push_back(p.frame);
    t.labels.push_back(p.label);
    t.games.push_back(p.game);
  }
  return t;
}

fs::path write_synthetic_layout(const fs::path& out, const SyntheticLayoutOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DiskError("cannot create " + out.string() + ": " + ec.message());

  std::ostringstream cfg;
  cfg << "# synthetic builder input\n"
      << "frames_dir = frames\nlevels_dir = levels\n"
      << "mapping_dir = " << default_mapping_dir().string() << "\n"
      << "threshold = 0.7\nseed = " << opt.seed << "\n";
  std::vector<std::string> held_out;
  for (const auto& game : opt.games) {
    const bool vertical = game == kKidIcarus;
    // Vertical levels are captured at twice the tile size to exercise rescaling.
    const int scale = vertical ? 2 : 1;
    const Spritesheet sheet = Spritesheet::procedural(sprite_style_for(game));
    fs::create_directories(out / "levels" / game);
    for (int k = 0; k < opt.levels_per_game; ++k) {
      const std::string id = "level-" + std::to_string(k);
      const TileGrid grid = vertical ? random_level(game, 40, 16, rng) : random_level(game, 12, 64, rng);
      std::string text;
      for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) text += raw_char(game, grid.at(r, c));
        text += '\n';
      }
      write_text(out / "levels" / game / (id + ".txt"), text);
      const Image level_img = render_level(grid, sheet);
      save_png(level_img, out / "levels" / game / (id + ".png"));

      const std::string video = game + "-" + std::to_string(k);
      const fs::path vdir = out / "frames" / video;
      fs::create_directories(vdir);
      const int max_x = level_img.width() - kWindowWidthPx;
      const int max_y = level_img.height() - kWindowHeightPx;
      for (int f = 0; f < opt.frames_per_video; ++f) {
        const double t = opt.frames_per_video > 1 ? static_cast<double>(f) / (opt.frames_per_video - 1) : 0.0;
        const int x = vertical ? between(rng, 0, max_x) : static_cast<int>(t * max_x);
        const int y = vertical ? static_cast<int>((1.0 - t) * max_y) : between(rng, 0, max_y);
        Image frame = crop(level_img, x, y, kWindowWidthPx, kWindowHeightPx);
        if (scale != 1) frame = resize_bilinear(frame, frame.width() * scale, frame.height() * scale);
        add_gaussian_noise(frame, opt.noise_sigma, rng);
        save_png(frame, vdir / (std::to_string(f) + ".png"));
      }
      cfg << "video." << video << " = " << game << "/" << id << "\n"
          << "video_fps." << video << " = 4\n";
      if (k == 0) held_out.push_back(game + "/" + id);
    }
    cfg << "fps." << game << " = " << (vertical ? 2 : 4) << "\n";
    if (scale != 1) cfg << "native_tile_px." << game << " = " << kTilePx * scale << "\n";
  }
  cfg << "test_levels = ";
  for (std::size_t i = 0; i < held_out.size(); ++i) cfg << (i ? ", " : "") << held_out[i];
  cfg << "\n";
  const fs::path cfg_file = out / "builder.cfg";
  write_text(cfg_file, cfg.str());
  return cfg_file;
}

}  // namespace levelnet
