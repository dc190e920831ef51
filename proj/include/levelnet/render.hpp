#pragma once

#include <cstdint>
#include <filesystem>
#include <map>

#include "levelnet/image.hpp"
#include "levelnet/tile_repr.hpp"

namespace levelnet {

/// One 16x16 sprite per unified tile character.
class Spritesheet {
 public:
  /// Reads `<label>.png` for every alphabet label present in `dir`
  /// (solid.png, empty.png, door.png, ...). Missing files are allowed here;
  /// rendering a tile without a sprite throws. Throws DimensionError for
  /// sprites that are not 16x16.
  static Spritesheet load(const std::filesystem::path& dir);
  /// Flat-coloured sprites with a distinct pattern per tile. `style` picks
  /// one of a few palettes so different games look different.
  static Spritesheet procedural(int style = 0);

  void set(char tile, Image sprite);
  bool has(char tile) const { return sprites_.count(tile) != 0; }
  /// Throws MissingSpriteError.
  const Image& sprite(char tile) const;
  std::size_t size() const { return sprites_.size(); }

  /// Writes `<label>.png` for every sprite.
  void save(const std::filesystem::path& dir) const;

 private:
  std::map<char, Image> sprites_;
};

/// 240x160 raster of a segment, tile (r, c) at pixel (16c, 16r).
Image render_tiles(const LevelSegment& seg, const Spritesheet& sheet);
/// Raster of a whole level at 16 px per tile.
Image render_level(const TileGrid& grid, const Spritesheet& sheet);

/// Palette style used for a game tag by the synthetic corpus.
int sprite_style_for(const GameTag& game);

}  // namespace levelnet
