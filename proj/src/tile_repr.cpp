#include "levelnet/tile_repr.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include "levelnet/error.hpp"

namespace levelnet {

namespace {

std::string describe_char(char c) {
  if (c == '\t') return "'\\t'";
  if (c == '\r') return "'\\r'";
  if (static_cast<unsigned char>(c) < 32) return "byte " + std::to_string(static_cast<int>(c));
  return std::string("'") + c + "'";
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace

LevelSegment::LevelSegment(char fill) {
  if (!TileAlphabet::contains(fill))
    throw AlphabetError("tile " + describe_char(fill) + " is not in the unified alphabet");
  cells_.fill(fill);
}

int LevelSegment::index(int row, int col) {
  if (row < 0 || row >= kSegmentRows || col < 0 || col >= kSegmentCols)
    throw DimensionError("segment cell (" + std::to_string(row) + ", " + std::to_string(col) +
                         ") out of range");
  return row * kSegmentCols + col;
}

void LevelSegment::set(int row, int col, char tile) {
  if (!TileAlphabet::contains(tile))
    throw AlphabetError("tile " + describe_char(tile) + " is not in the unified alphabet");
  cells_[index(row, col)] = tile;
}

int LevelSegment::count(char tile) const {
  int n = 0;
  for (char c : cells_) n += (c == tile);
  return n;
}

TileGrid::TileGrid(int rows, int cols, char fill) : rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0) throw DimensionError("tile grid must be non-empty");
  cells_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

LevelSegment TileGrid::window(int row, int col) const {
  if (row < 0 || col < 0 || row + kSegmentRows > rows_ || col + kSegmentCols > cols_)
    throw WindowOutOfBoundsError("10x15 window at tile (" + std::to_string(row) + ", " +
                                 std::to_string(col) + ") leaves the " + std::to_string(rows_) +
                                 "x" + std::to_string(cols_) + " level");
  LevelSegment seg;
  for (int r = 0; r < kSegmentRows; ++r)
    for (int c = 0; c < kSegmentCols; ++c) seg.set(r, c, at(row + r, col + c));
  return seg;
}

LevelSegment parse_segment(std::string_view text) {
  auto lines = split_lines(text);
  if (static_cast<int>(lines.size()) != kSegmentRows)
    throw DimensionError("expected " + std::to_string(kSegmentRows) + " lines, got " +
                         std::to_string(lines.size()));
  LevelSegment seg;
  for (int r = 0; r < kSegmentRows; ++r) {
    if (static_cast<int>(lines[r].size()) != kSegmentCols)
      throw DimensionError("line " + std::to_string(r) + " has " +
                           std::to_string(lines[r].size()) + " characters, expected " +
                           std::to_string(kSegmentCols));
    for (int c = 0; c < kSegmentCols; ++c) {
      char ch = lines[r][c];
      if (!TileAlphabet::contains(ch))
        throw AlphabetError("unknown tile " + describe_char(ch) + " at row " + std::to_string(r) +
                            ", column " + std::to_string(c));
      seg.set(r, c, ch);
    }
  }
  return seg;
}

std::string render_segment(const LevelSegment& seg) {
  std::string out;
  out.reserve(kSegmentRows * (kSegmentCols + 1));
  for (int r = 0; r < kSegmentRows; ++r) {
    for (int c = 0; c < kSegmentCols; ++c) out.push_back(seg.at(r, c));
    out.push_back('\n');
  }
  return out;
}

TileGrid parse_level_grid(std::string_view text, const TileMapping* mapping) {
  auto lines = split_lines(text);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw DimensionError("level text is empty");
  for (auto& l : lines)
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  const int cols = static_cast<int>(lines.front().size());
  if (cols == 0) throw DimensionError("level text has an empty first line");
  TileGrid grid(static_cast<int>(lines.size()), cols);
  for (int r = 0; r < grid.rows(); ++r) {
    if (static_cast<int>(lines[r].size()) != cols)
      throw DimensionError("level line " + std::to_string(r) + " has " +
                           std::to_string(lines[r].size()) + " characters, expected " +
                           std::to_string(cols));
    for (int c = 0; c < cols; ++c) {
      char ch = lines[r][c];
      if (mapping) {
        ch = mapping->unify(ch);
      } else if (!TileAlphabet::contains(ch)) {
        throw AlphabetError("unknown tile " + describe_char(ch) + " at row " + std::to_string(r) +
                            ", column " + std::to_string(c));
      }
      grid.set(r, c, ch);
    }
  }
  return grid;
}

std::string render_grid(const TileGrid& grid) {
  std::string out;
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) out.push_back(grid.at(r, c));
    out.push_back('\n');
  }
  return out;
}

TileMapping::TileMapping(GameTag game, std::map<char, char> table, int version)
    : game_(std::move(game)), table_(std::move(table)), version_(version) {
  for (auto [raw, unified] : table_)
    if (!TileAlphabet::contains(unified))
      throw AlphabetError("mapping for " + game_ + " sends " + describe_char(raw) + " to " +
                          describe_char(unified) + ", which is not a unified tile");
}

namespace {

// Reads one possibly-quoted single character token starting at `pos`.
std::optional<char> read_char_token(std::string_view line, std::size_t& pos) {
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  if (pos >= line.size()) return std::nullopt;
  if (line[pos] == '\'') {
    if (pos + 2 >= line.size() || line[pos + 2] != '\'') return std::nullopt;
    char c = line[pos + 1];
    pos += 3;
    return c;
  }
  char c = line[pos++];
  if (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') return std::nullopt;
  return c;
}

}  // namespace

TileMapping TileMapping::load(const GameTag& game, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open tile mapping " + file.string());
  std::map<char, char> table;
  int version = 1;
  std::string raw_line;
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string_view line(raw_line);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    line.remove_prefix(first);
    if (line[0] == '#' && (line.size() == 1 || line[1] == ' ' || line[1] == '\t')) {
      // A bare "# x" line would be ambiguous with a mapping of '#'; mappings of
      // '#' must be quoted, so unquoted '#' always starts a comment.
      continue;
    }
    if (line.starts_with("version")) {
      try {
        version = std::stoi(std::string(line.substr(7)));
      } catch (const std::exception&) {
        throw ConfigError(file.string() + ":" + std::to_string(line_no) + ": bad version line");
      }
      continue;
    }
    std::size_t pos = 0;
    auto raw = read_char_token(line, pos);
    auto unified = read_char_token(line, pos);
    auto rest = line.substr(std::min(pos, line.size()));
    if (!raw || !unified || rest.find_first_not_of(" \t") != std::string_view::npos)
      throw ConfigError(file.string() + ":" + std::to_string(line_no) +
                        ": expected `raw unified`");
    if (!table.emplace(*raw, *unified).second)
      throw ConfigError(file.string() + ":" + std::to_string(line_no) + ": duplicate mapping for " +
                        describe_char(*raw));
  }
  return TileMapping(game, std::move(table), version);
}

TileMapping TileMapping::load_for_game(const GameTag& game, const std::filesystem::path& dir) {
  return load(game, dir / (game + ".txt"));
}

char TileMapping::unify(char raw) const {
  auto it = table_.find(raw);
  if (it == table_.end())
    throw UnknownTileError("game " + game_ + " has no mapping for tile " + describe_char(raw));
  return it->second;
}

std::filesystem::path default_mapping_dir() {
  return std::filesystem::path(LEVELNET_DATA_DIR) / "mappings";
}

char unify_tile(const TileMapping& mapping, char raw) { return mapping.unify(raw); }

char unify_tile(const GameTag& game, char raw) {
  static std::mutex mu;
  static std::map<GameTag, TileMapping> cache;
  const TileMapping* mapping = nullptr;
  {
    std::lock_guard lock(mu);
    auto it = cache.find(game);
    if (it == cache.end()) {
      auto file = default_mapping_dir() / (game + ".txt");
      if (!std::filesystem::exists(file))
        throw UnknownTileError("no tile mapping shipped for game " + game);
      it = cache.emplace(game, TileMapping::load(game, file)).first;
    }
    mapping = &it->second;
  }
  return mapping->unify(raw);
}

OneHotGrid one_hot(const LevelSegment& seg) {
  OneHotGrid grid;
  grid.mode = GridMode::hard;
  for (int r = 0; r < kSegmentRows; ++r)
    for (int c = 0; c < kSegmentCols; ++c)
      grid.at(r, c, *TileAlphabet::index_of(seg.at(r, c))) = 1.0;
  return grid;
}

LevelSegment decode_grid(const OneHotGrid& grid) {
  LevelSegment seg;
  for (int r = 0; r < kSegmentRows; ++r)
    for (int c = 0; c < kSegmentCols; ++c) {
      int best = 0;
      for (int ch = 1; ch < kTileClasses; ++ch)
        if (grid.at(r, c, ch) > grid.at(r, c, best)) best = ch;
      seg.set(r, c, TileAlphabet::char_at(best));
    }
  return seg;
}

}  // namespace levelnet
