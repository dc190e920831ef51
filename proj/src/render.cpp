#include "levelnet/render.hpp"

#include <array>

#include "levelnet/dataset.hpp"
#include "levelnet/error.hpp"

namespace levelnet {

namespace fs = std::filesystem;

namespace {

using Rgb = std::array<double, 3>;

struct Palette {
  Rgb sky, solid, solid_dark, door, enemy, moving, top, block, brick, coin;
};

const Palette& palette(int style) {
  static const Palette kPalettes[] = {
      // daylight side-scroller
      {{0.36, 0.58, 0.99}, {0.78, 0.30, 0.05}, {0.45, 0.15, 0.02}, {0.10, 0.70, 0.10},
       {0.55, 0.25, 0.10}, {0.95, 0.80, 0.55}, {0.85, 0.55, 0.25}, {0.98, 0.70, 0.10},
       {0.70, 0.25, 0.10}, {0.99, 0.85, 0.20}},
      // dusk vertical climber
      {{0.05, 0.05, 0.15}, {0.35, 0.75, 0.80}, {0.10, 0.35, 0.45}, {0.60, 0.20, 0.70},
       {0.90, 0.15, 0.20}, {0.80, 0.80, 0.30}, {0.55, 0.90, 0.60}, {0.75, 0.75, 0.85},
       {0.45, 0.55, 0.65}, {0.95, 0.60, 0.85}},
  };
  return kPalettes[static_cast<std::size_t>(style) % std::size(kPalettes)];
}

Image flat(const Rgb& c) {
  Image img(kTilePx, kTilePx);
  for (int y = 0; y < kTilePx; ++y)
    for (int x = 0; x < kTilePx; ++x)
      for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
  return img;
}

void paint(Image& img, int y0, int x0, int y1, int x1, const Rgb& c) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
}

}  // namespace

Spritesheet Spritesheet::procedural(int style) {
  const Palette& p = palette(style);
  Spritesheet s;

  s.set(kEmpty, flat(p.sky));

  Image solid = flat(p.solid);  // brick-like ground with mortar lines
  for (int y = 0; y < kTilePx; y += 4) paint(solid, y, 0, y + 1, kTilePx, p.solid_dark);
  for (int y = 0; y < kTilePx; y += 4) {
    const int off = (y / 4) % 2 ? 4 : 0;
    for (int x = off; x < kTilePx; x += 8) paint(solid, y, x, y + 4, x + 1, p.solid_dark);
  }
  s.set(kSolid, solid);

  Image door = flat(p.sky);
  paint(door, 0, 2, kTilePx, 14, p.door);
  paint(door, 2, 4, kTilePx, 12, p.solid_dark);
  paint(door, 8, 9, 10, 11, p.coin);
  s.set(kDoor, door);

  Image enemy = flat(p.sky);
  paint(enemy, 4, 2, 14, 14, p.enemy);
  paint(enemy, 6, 4, 9, 7, {1, 1, 1});
  paint(enemy, 6, 9, 9, 12, {1, 1, 1});
  paint(enemy, 14, 3, 16, 6, p.solid_dark);
  paint(enemy, 14, 10, 16, 13, p.solid_dark);
  s.set(kHazard, enemy);

  Image moving = flat(p.sky);
  paint(moving, 0, 0, 6, kTilePx, p.moving);
  for (int x = 1; x < kTilePx; x += 4) paint(moving, 2, x, 4, x + 2, p.solid_dark);
  s.set(kMoving, moving);

  Image top = flat(p.top);
  paint(top, 0, 0, 3, kTilePx, p.coin);
  paint(top, 8, 0, 9, kTilePx, p.solid_dark);
  s.set(kSolidTop, top);

  Image block = flat(p.block);
  paint(block, 0, 0, 1, kTilePx, p.solid_dark);
  paint(block, 15, 0, 16, kTilePx, p.solid_dark);
  paint(block, 0, 0, kTilePx, 1, p.solid_dark);
  paint(block, 0, 15, kTilePx, 16, p.solid_dark);
  paint(block, 5, 6, 11, 10, p.solid_dark);
  s.set(kBlock, block);

  Image brick = flat(p.brick);
  for (int y = 3; y < kTilePx; y += 4) paint(brick, y, 0, y + 1, kTilePx, {0, 0, 0});
  for (int x = 7; x < kTilePx; x += 8) paint(brick, 0, x, kTilePx, x + 1, {0, 0, 0});
  s.set(kBreakable, brick);

  Image coin = flat(p.sky);
  paint(coin, 3, 5, 13, 11, p.coin);
  paint(coin, 5, 7, 11, 9, p.solid_dark);
  s.set(kCollectible, coin);
  return s;
}

void Spritesheet::set(char tile, Image sprite) {
  if (!TileAlphabet::contains(tile))
    throw AlphabetError(std::string("no tile class '") + tile + "'");
  if (sprite.width() != kTilePx || sprite.height() != kTilePx)
    throw DimensionError("sprite for '" + std::string(1, tile) + "' is " +
                         std::to_string(sprite.width()) + "x" + std::to_string(sprite.height()) +
                         ", expected 16x16");
  sprites_[tile] = std::move(sprite);
}

const Image& Spritesheet::sprite(char tile) const {
  auto it = sprites_.find(tile);
  if (it == sprites_.end()) {
    const auto idx = TileAlphabet::index_of(tile);
    const std::string label = idx ? std::string(TileAlphabet::kLabels[*idx]) : "?";
    throw MissingSpriteError("no sprite for tile '" + std::string(1, tile) + "' (" + label +
                             ".png)");
  }
  return it->second;
}

Spritesheet Spritesheet::load(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingSpriteError("spritesheet directory " + dir.string() + " not found");
  Spritesheet s;
  for (int i = 0; i < kTileClasses; ++i) {
    const fs::path file = dir / (std::string(TileAlphabet::kLabels[i]) + ".png");
    if (fs::exists(file)) s.set(TileAlphabet::char_at(i), load_png(file));
  }
  return s;
}

void Spritesheet::save(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DiskError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& [tile, img] : sprites_) {
    const auto idx = TileAlphabet::index_of(tile);
    save_png(img, dir / (std::string(TileAlphabet::kLabels[*idx]) + ".png"));
  }
}

Image render_level(const TileGrid& grid, const Spritesheet& sheet) {
  Image out(grid.cols() * kTilePx, grid.rows() * kTilePx);
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c) blit(out, sheet.sprite(grid.at(r, c)), c * kTilePx, r * kTilePx);
  return out;
}

Image render_tiles(const LevelSegment& seg, const Spritesheet& sheet) {
  Image out(kWindowWidthPx, kWindowHeightPx);
  for (int r = 0; r < kSegmentRows; ++r)
    for (int c = 0; c < kSegmentCols; ++c)
      blit(out, sheet.sprite(seg.at(r, c)), c * kTilePx, r * kTilePx);
  return out;
}

int sprite_style_for(const GameTag& game) { return game == kKidIcarus ? 1 : 0; }

}  // namespace levelnet
