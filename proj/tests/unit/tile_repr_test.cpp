#include <gtest/gtest.h>

#include <random>
#include <string>

#include "levelnet/error.hpp"
#include "levelnet/tile_repr.hpp"
#include "oracles.hpp"

using namespace levelnet;

namespace {

std::string rows_text(int rows, const std::string& row) {
  std::string t;
  for (int r = 0; r < rows; ++r) t += row + "\n";
  return t;
}

}  // namespace

TEST(TileAlphabet, FixedChannelOrder) {
  EXPECT_EQ(TileAlphabet::order(), "#-DHMTBSO");
  for (int i = 0; i < kTileClasses; ++i)
    EXPECT_EQ(TileAlphabet::index_of(TileAlphabet::char_at(i)), i);
  EXPECT_FALSE(TileAlphabet::contains('x'));
}

TEST(ParseSegment, AllEmpty) {
  const auto seg = parse_segment(rows_text(10, "---------------"));
  EXPECT_EQ(seg, LevelSegment());
  EXPECT_EQ(seg.count('-'), 150);
}

TEST(ParseSegment, WrongLineCount) {
  EXPECT_THROW(parse_segment(rows_text(9, "---------------")), DimensionError);
  EXPECT_THROW(parse_segment(rows_text(11, "---------------")), DimensionError);
}

TEST(ParseSegment, WrongLineLength) {
  EXPECT_THROW(parse_segment(rows_text(10, "--------------")), DimensionError);
}

TEST(ParseSegment, UnknownCharacterReportsPosition) {
  std::string t = rows_text(10, "---------------");
  t[3 * 16 + 7] = 'x';
  try {
    parse_segment(t);
    FAIL() << "no error";
  } catch (const AlphabetError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("7"), std::string::npos) << msg;
  }
}

TEST(ParseSegment, RowZeroIsTopLine) {
  std::string t = rows_text(10, "---------------");
  t[0] = '#';
  EXPECT_EQ(parse_segment(t).at(0, 0), '#');
}

TEST(RenderSegment, AllEmpty) {
  EXPECT_EQ(render_segment(LevelSegment()), rows_text(10, "---------------"));
}

TEST(RenderSegment, RoundTripRandom) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const auto s = oracle::random_segment(rng);
    const std::string text = render_segment(s);
    EXPECT_EQ(parse_segment(text), s);
    EXPECT_EQ(render_segment(parse_segment(text)), text);
  }
}

TEST(UnifyTile, DocumentedClasses) {
  EXPECT_EQ(unify_tile(kSuperMarioBros, 'E'), 'H');
  EXPECT_EQ(unify_tile(kSuperMarioBros, '-'), '-');
  EXPECT_EQ(unify_tile(kSuperMarioBros, 'X'), '#');
  EXPECT_EQ(unify_tile(kKidIcarus, 'T'), 'T');
  EXPECT_EQ(unify_tile(kKidIcarus, '#'), '#');
}

TEST(UnifyTile, UnknownCharacterNamesGame) {
  try {
    unify_tile(kSuperMarioBros, '@');
    FAIL() << "no error";
  } catch (const UnknownTileError& e) {
    EXPECT_NE(std::string(e.what()).find("smb"), std::string::npos) << e.what();
  }
}

TEST(UnifyTile, ShippedTablesAreTotalOverTheirKeys) {
  for (const GameTag& game : {kSuperMarioBros, kKidIcarus}) {
    const auto m = TileMapping::load_for_game(game, default_mapping_dir());
    EXPECT_GE(m.version(), 1);
    for (const auto& [raw, unified] : m.table()) {
      EXPECT_TRUE(TileAlphabet::contains(unified));
      EXPECT_EQ(unify_tile(game, raw), unified);
    }
  }
}

TEST(TileMapping, QuotedHashAndComments) {
  oracle::TempDir dir("mapping");
  const auto file = dir.path() / "g.txt";
  {
    std::ofstream out(file);
    out << "# comment\nversion 3\n'#' '#'\nx H\n";
  }
  const auto m = TileMapping::load("g", file);
  EXPECT_EQ(m.version(), 3);
  EXPECT_EQ(m.unify('#'), '#');
  EXPECT_EQ(m.unify('x'), 'H');
  EXPECT_THROW(m.unify('y'), UnknownTileError);
}

TEST(OneHot, AllEmptySegment) {
  const auto g = one_hot(LevelSegment());
  EXPECT_EQ(g.mode, GridMode::hard);
  double total = 0;
  for (int r = 0; r < kSegmentRows; ++r)
    for (int c = 0; c < kSegmentCols; ++c)
      for (int k = 0; k < kTileClasses; ++k) {
        EXPECT_EQ(g.at(r, c, k), k == 1 ? 1.0 : 0.0);
        total += g.at(r, c, k);
      }
  EXPECT_EQ(total, 150.0);
}

TEST(DecodeGrid, InvertsOneHot) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto s = oracle::random_segment(rng);
    EXPECT_EQ(decode_grid(one_hot(s)), s);
  }
}

TEST(DecodeGrid, UniformFiberTakesLowestChannel) {
  OneHotGrid g;
  g.values.fill(1.0 / 9.0);
  EXPECT_EQ(decode_grid(g), LevelSegment('#'));
}

TEST(DecodeGrid, Argmax) {
  OneHotGrid g;
  g.values.fill(0.0);
  for (int r = 0; r < kSegmentRows; ++r)
    for (int c = 0; c < kSegmentCols; ++c) {
      g.at(r, c, 0) = 0.1;
      g.at(r, c, 1) = 0.6;
      g.at(r, c, 2) = 0.3;
    }
  EXPECT_EQ(decode_grid(g), LevelSegment('-'));
}

TEST(DecodeGrid, ScaleInvariantPerFiber) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0), scale(0.01, 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    OneHotGrid g;
    for (auto& v : g.values) v = u(rng);
    OneHotGrid h = g;
    for (int cell = 0; cell < kSegmentCells; ++cell) {
      const double s = scale(rng);
      for (int k = 0; k < kTileClasses; ++k) h.values[cell * kTileClasses + k] *= s;
    }
    EXPECT_EQ(decode_grid(g), decode_grid(h));
  }
}

TEST(TileGrid, WindowAndBounds) {
  TileGrid g(12, 20);
  g.set(3, 5, '#');
  const auto w = g.window(2, 4);
  EXPECT_EQ(w.at(1, 1), '#');
  EXPECT_THROW(g.window(3, 0), WindowOutOfBoundsError);
  EXPECT_THROW(g.window(0, 6), WindowOutOfBoundsError);
}

TEST(ParseLevelGrid, ThroughMapping) {
  const auto m = TileMapping::load_for_game(kSuperMarioBros, default_mapping_dir());
  const auto g = parse_level_grid("X-E\n?o<\n", &m);
  EXPECT_EQ(render_grid(g), "#-H\nBOD\n");
  EXPECT_THROW(parse_level_grid("X-\n?\n", &m), DimensionError);
}
