#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace levelnet {

inline constexpr int kSegmentRows = 10;
inline constexpr int kSegmentCols = 15;
inline constexpr int kTileClasses = 9;
inline constexpr int kSegmentCells = kSegmentRows * kSegmentCols;

/// Unified tile alphabet shared by every game. The channel index of a tile is
/// its position in `kTileChars`; checkpoints depend on this order.
struct TileAlphabet {
  static constexpr std::array<char, kTileClasses> kTileChars = {'#', '-', 'D', 'H', 'M',
                                                                'T', 'B', 'S', 'O'};
  static constexpr std::array<std::string_view, kTileClasses> kLabels = {
      "solid", "empty", "door", "enemy", "moving", "solid_top", "block", "breakable",
      "collectible"};

  static constexpr std::optional<int> index_of(char c) {
    for (int i = 0; i < kTileClasses; ++i)
      if (kTileChars[i] == c) return i;
    return std::nullopt;
  }
  static constexpr bool contains(char c) { return index_of(c).has_value(); }
  static constexpr char char_at(int channel) { return kTileChars.at(channel); }
  static std::string order() { return std::string(kTileChars.begin(), kTileChars.end()); }
};

inline constexpr char kSolid = '#';
inline constexpr char kEmpty = '-';
inline constexpr char kDoor = 'D';
inline constexpr char kHazard = 'H';
inline constexpr char kMoving = 'M';
inline constexpr char kSolidTop = 'T';
inline constexpr char kBlock = 'B';
inline constexpr char kBreakable = 'S';
inline constexpr char kCollectible = 'O';

/// Game identifiers used throughout the pipeline.
using GameTag = std::string;
inline const GameTag kSuperMarioBros = "smb";
inline const GameTag kKidIcarus = "ki";

/// A fixed 10x15 window of unified tiles; row 0 is the top of the window.
class LevelSegment {
 public:
  /// All-empty segment.
  LevelSegment() { cells_.fill(kEmpty); }
  /// Throws AlphabetError if `fill` is not in the alphabet.
  explicit LevelSegment(char fill);

  char at(int row, int col) const { return cells_[index(row, col)]; }
  /// Throws AlphabetError on characters outside the alphabet.
  void set(int row, int col, char tile);

  const std::array<char, kSegmentCells>& cells() const { return cells_; }
  int count(char tile) const;

  friend bool operator==(const LevelSegment&, const LevelSegment&) = default;

 private:
  static int index(int row, int col);
  std::array<char, kSegmentCells> cells_{};
};

/// A tile grid of arbitrary size (a full annotated level).
class TileGrid {
 public:
  TileGrid() = default;
  TileGrid(int rows, int cols, char fill = kEmpty);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  char at(int row, int col) const { return cells_.at(static_cast<std::size_t>(row) * cols_ + col); }
  void set(int row, int col, char tile) { cells_.at(static_cast<std::size_t>(row) * cols_ + col) = tile; }

  /// Copy of the 10x15 window whose top-left tile is (row, col).
  /// Throws WindowOutOfBoundsError when the window leaves the grid.
  LevelSegment window(int row, int col) const;

  friend bool operator==(const TileGrid&, const TileGrid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<char> cells_;
};

enum class GridMode { probabilities, logits, hard };

/// Dense 10x15x9 per-cell class scores, laid out row-major with the class
/// channel innermost.
struct OneHotGrid {
  std::array<double, kSegmentCells * kTileClasses> values{};
  GridMode mode = GridMode::probabilities;

  double& at(int row, int col, int channel) {
    return values[(static_cast<std::size_t>(row) * kSegmentCols + col) * kTileClasses + channel];
  }
  double at(int row, int col, int channel) const {
    return values[(static_cast<std::size_t>(row) * kSegmentCols + col) * kTileClasses + channel];
  }
};

/// Parses 10 lines of 15 alphabet characters. A single trailing newline is
/// accepted. Throws DimensionError or AlphabetError (with row/column).
LevelSegment parse_segment(std::string_view text);
/// 10 lines of 15 characters, each terminated by '\n'.
std::string render_segment(const LevelSegment& seg);

/// Parses an arbitrary-size rectangular grid. When `mapping` is given every
/// character is translated through it, otherwise characters must already be in
/// the unified alphabet.
class TileMapping;
TileGrid parse_level_grid(std::string_view text, const TileMapping* mapping = nullptr);
std::string render_grid(const TileGrid& grid);

/// Per-game translation table from native corpus characters to the unified
/// alphabet, loaded from a text file (`raw unified` per line).
class TileMapping {
 public:
  TileMapping() = default;
  TileMapping(GameTag game, std::map<char, char> table, int version = 1);

  /// File format: optional `version N` line; `raw unified` pairs separated by
  /// whitespace; a character may be single-quoted ('#'); lines beginning with
  /// an unquoted `#` followed by whitespace or end of line are comments.
  static TileMapping load(const GameTag& game, const std::filesystem::path& file);
  /// Loads `<dir>/<game>.txt`.
  static TileMapping load_for_game(const GameTag& game, const std::filesystem::path& dir);

  /// Throws UnknownTileError naming the game and character.
  char unify(char raw) const;
  const GameTag& game() const { return game_; }
  int version() const { return version_; }
  const std::map<char, char>& table() const { return table_; }

 private:
  GameTag game_;
  std::map<char, char> table_;
  int version_ = 1;
};

/// Directory holding the shipped mapping tables.
std::filesystem::path default_mapping_dir();

/// Unifies a native character using the shipped table for `game`.
char unify_tile(const GameTag& game, char raw);
char unify_tile(const TileMapping& mapping, char raw);

/// Hard one-hot encoding of a segment.
OneHotGrid one_hot(const LevelSegment& seg);
/// Per-cell argmax over channels; ties go to the lowest channel index.
LevelSegment decode_grid(const OneHotGrid& grid);

}  // namespace levelnet
