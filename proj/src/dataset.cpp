#include "levelnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "levelnet/error.hpp"

namespace levelnet {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split " + s);
}

void AnnotatedLevel::validate() const {
  if (image.width() != kTilePx * grid.cols() || image.height() != kTilePx * grid.rows())
    throw DimensionError("level " + game + "/" + level_id + ": image " +
                         std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                         " does not match 16 px tiles over a " + std::to_string(grid.rows()) +
                         "x" + std::to_string(grid.cols()) + " grid");
}

std::vector<std::size_t> sample_frame_indices(std::span<const double> timestamps, double rate) {
  if (timestamps.empty()) throw EmptyStreamError("frame stream is empty");
  if (!(rate > 0)) throw ConfigError("sampling rate must be positive");
  std::vector<std::size_t> kept;
  const double t0 = timestamps.front();
  long long last_window = -1;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (i > 0 && timestamps[i] < timestamps[i - 1])
      throw StreamOrderError("frame timestamps are not monotone at index " + std::to_string(i));
    // Epsilon absorbs rounding in t * rate for frames that sit on a window edge.
    auto window = static_cast<long long>(std::floor((timestamps[i] - t0) * rate + 1e-9));
    if (window > last_window) {
      kept.push_back(i);
      last_window = window;
    }
  }
  return kept;
}

std::vector<RawFrame> sample_frames(const std::vector<RawFrame>& stream, double rate) {
  std::vector<double> ts;
  ts.reserve(stream.size());
  for (const auto& f : stream) ts.push_back(f.timestamp);
  std::vector<RawFrame> out;
  for (auto i : sample_frame_indices(ts, rate)) out.push_back(stream[i]);
  return out;
}

RawFrame rescale_to_tile_size(const RawFrame& frame, int native_tile_px) {
  if (native_tile_px <= 0)
    throw BadTileSizeError("native tile size must be positive, got " +
                           std::to_string(native_tile_px));
  if (frame.image.empty()) throw DimensionError("cannot rescale an empty frame");
  RawFrame out = frame;
  if (native_tile_px == kTilePx) return out;
  const double factor = static_cast<double>(kTilePx) / native_tile_px;
  const int w = std::max(1, static_cast<int>(std::lround(frame.image.width() * factor)));
  const int h = std::max(1, static_cast<int>(std::lround(frame.image.height() * factor)));
  out.image = resize_bilinear(frame.image, w, h);
  return out;
}

MatchLocation locate_in_level(const RawFrame& frame, const AnnotatedLevel& level) {
  return locate_in_level(frame.image, level.image);
}

PairedSample pair_frame(const RawFrame& frame, const AnnotatedLevel& level, double threshold) {
  const auto loc = locate_in_level(frame, level);
  if (loc.score < threshold) throw LowScoreRejection(loc.score, threshold);
  const int tile_col = static_cast<int>(std::lround(loc.x / static_cast<double>(kTilePx)));
  const int tile_row = static_cast<int>(std::lround(loc.y / static_cast<double>(kTilePx)));

  PairedSample s;
  s.label = level.grid.window(tile_row, tile_col);

  const auto& img = frame.image;
  if (img.width() < kWindowWidthPx || img.height() < kWindowHeightPx)
    throw WindowOutOfBoundsError("frame " + std::to_string(img.width()) + "x" +
                                 std::to_string(img.height()) +
                                 " is smaller than one 240x160 tile window");
  // Frame-local position of the snapped window; snapping moves it by at most
  // half a tile, which is clamped back inside the frame.
  const int fx = std::clamp(tile_col * kTilePx - loc.x, 0, img.width() - kWindowWidthPx);
  const int fy = std::clamp(tile_row * kTilePx - loc.y, 0, img.height() - kWindowHeightPx);
  s.frame = resize_area(crop(img, fx, fy, kWindowWidthPx, kWindowHeightPx), kFrameWidth,
                        kFrameHeight);
  s.game = level.game;
  s.level_id = level.level_id;
  s.score = loc.score;
  s.tile_row = tile_row;
  s.tile_col = tile_col;
  s.offset_x = loc.x;
  s.offset_y = loc.y;
  s.video_id = frame.video_id;
  s.timestamp = frame.timestamp;
  return s;
}

std::vector<std::size_t> balance_indices(const std::vector<GameTag>& train_games,
                                         std::uint64_t seed) {
  std::map<GameTag, std::vector<std::size_t>> by_game;
  for (std::size_t i = 0; i < train_games.size(); ++i) by_game[train_games[i]].push_back(i);
  std::size_t target = 0;
  for (const auto& [g, idx] : by_game) target = std::max(target, idx.size());

  std::vector<std::size_t> out(train_games.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  std::mt19937_64 rng(seed);
  for (const auto& [g, idx] : by_game) {
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    for (std::size_t k = idx.size(); k < target; ++k) out.push_back(idx[pick(rng)]);
  }
  return out;
}

double BuilderConfig::fps_for(const GameTag& game) const {
  if (auto it = fps.find(game); it != fps.end()) return it->second;
  if (game == kKidIcarus) return 1.0;
  return 2.0;
}

int BuilderConfig::tile_px_for(const GameTag& game) const {
  if (auto it = native_tile_px.find(game); it != native_tile_px.end()) return it->second;
  return kTilePx;
}

BuilderConfig BuilderConfig::from(const KeyValueConfig& cfg, const fs::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  BuilderConfig b;
  b.source = cfg;
  b.frames_dir = resolve(cfg.get_or("frames_dir", "frames"));
  b.levels_dir = resolve(cfg.get_or("levels_dir", "levels"));
  if (cfg.has("mapping_dir")) b.mapping_dir = resolve(cfg.get("mapping_dir"));
  b.threshold = cfg.get_double_or("threshold", 0.7);
  b.seed = static_cast<std::uint64_t>(cfg.get_int_or("seed", 0));
  b.test_levels = cfg.get_list("test_levels");
  for (const auto& [game, v] : cfg.with_prefix("fps."))
    b.fps[game] = cfg.get_double("fps." + game);
  for (const auto& [game, v] : cfg.with_prefix("native_tile_px."))
    b.native_tile_px[game] = static_cast<int>(cfg.get_int("native_tile_px." + game));
  for (const auto& [vid, v] : cfg.with_prefix("video.")) b.video_level[vid] = v;
  for (const auto& [vid, v] : cfg.with_prefix("video_fps."))
    b.video_fps[vid] = cfg.get_double("video_fps." + vid);
  if (!(b.threshold >= -1.0 && b.threshold <= 1.0))
    throw ConfigError("threshold must lie in [-1, 1]");
  return b;
}

BuilderConfig BuilderConfig::load(const fs::path& file) {
  return from(KeyValueConfig::load(file), file.parent_path());
}

namespace {

std::pair<GameTag, std::string> split_level_key(const std::string& key) {
  auto slash = key.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == key.size())
    throw ConfigError("level reference must look like game/level-id, got " + key);
  return {key.substr(0, slash), key.substr(slash + 1)};
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DiskError("cannot write " + p.string());
  out << text;
  if (!out) throw DiskError("failed writing " + p.string());
}

// Frame files sorted by their numeric stem.
std::vector<std::pair<long long, fs::path>> list_frames(const fs::path& dir) {
  std::vector<std::pair<long long, fs::path>> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    try {
      out.emplace_back(std::stoll(e.path().stem().string()), e.path());
    } catch (const std::exception&) {
      throw ConfigError("frame file name is not an index: " + e.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

AnnotatedLevel load_level(const BuilderConfig& cfg, const GameTag& game,
                          const std::string& level_id) {
  const auto base = cfg.levels_dir / game / level_id;
  const auto png = fs::path(base.string() + ".png");
  const auto txt = fs::path(base.string() + ".txt");
  if (!fs::exists(png) || !fs::exists(txt))
    throw MissingLevelError("level " + game + "/" + level_id + " needs " + png.string() +
                            " and " + txt.string());
  AnnotatedLevel level;
  level.game = game;
  level.level_id = level_id;
  level.image = load_png(png);
  if (cfg.mapping_dir.empty()) {
    level.grid = parse_level_grid(read_text(txt));
  } else {
    auto mapping = TileMapping::load_for_game(game, cfg.mapping_dir);
    level.grid = parse_level_grid(read_text(txt), &mapping);
  }
  level.validate();
  return level;
}

std::size_t DatasetManifest::count(const GameTag& game, Split split) const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const auto& r) {
    return r.game == game && r.split == split;
  }));
}

std::vector<GameTag> DatasetManifest::games() const {
  std::set<GameTag> g;
  for (const auto& r : records) g.insert(r.game);
  return {g.begin(), g.end()};
}

std::string DatasetManifest::to_json() const {
  json j;
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["threshold"] = threshold;
  j["config"] = config;
  json counts = json::object();
  for (const auto& g : games())
    for (auto s : {Split::train, Split::test}) counts[to_string(s)][g] = count(g, s);
  j["counts"] = counts;
  j["reference_corpus_size"] = {{"train", 3956}, {"test", 360}};
  json recs = json::array();
  for (const auto& r : records) {
    recs.push_back({{"frame", r.frame},
                    {"label", r.label},
                    {"game", r.game},
                    {"level_id", r.level_id},
                    {"split", to_string(r.split)},
                    {"tile_row", r.tile_row},
                    {"tile_col", r.tile_col},
                    {"offset_x", r.offset_x},
                    {"offset_y", r.offset_y},
                    {"score", r.score},
                    {"video_id", r.video_id},
                    {"timestamp", r.timestamp},
                    {"upsampled", r.upsampled}});
  }
  j["records"] = recs;
  return j.dump(1) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  try {
    auto j = json::parse(text);
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.threshold = j.at("threshold").get<double>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& r : j.at("records")) {
      ManifestRecord rec;
      rec.frame = r.at("frame").get<std::string>();
      rec.label = r.at("label").get<std::string>();
      rec.game = r.at("game").get<std::string>();
      rec.level_id = r.at("level_id").get<std::string>();
      rec.split = split_from_string(r.at("split").get<std::string>());
      rec.tile_row = r.at("tile_row").get<int>();
      rec.tile_col = r.at("tile_col").get<int>();
      rec.offset_x = r.at("offset_x").get<int>();
      rec.offset_y = r.at("offset_y").get<int>();
      rec.score = r.at("score").get<double>();
      rec.video_id = r.at("video_id").get<std::string>();
      rec.timestamp = r.at("timestamp").get<double>();
      rec.upsampled = r.at("upsampled").get<bool>();
      m.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

DatasetManifest DatasetManifest::load(const fs::path& manifest_file) {
  if (!fs::exists(manifest_file)) throw ConfigError("manifest not found: " + manifest_file.string());
  return from_json(read_text(manifest_file), manifest_file.parent_path());
}

void DatasetManifest::save(const fs::path& manifest_file) const {
  write_text(manifest_file, to_json());
}

DatasetManifest write_dataset(std::vector<PairedSample> samples,
                              const std::vector<std::string>& test_levels, std::uint64_t seed,
                              const KeyValueConfig& config_echo, double threshold,
                              const fs::path& out_dir) {
  if (samples.empty()) throw NoSamplesError("no frame could be paired with a level window");
  const std::set<std::string> held_out(test_levels.begin(), test_levels.end());
  for (auto& s : samples)
    s.split = held_out.count(s.game + "/" + s.level_id) ? Split::test : Split::train;

  std::stable_sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
    return std::tie(a.game, a.level_id, a.tile_row, a.tile_col, a.offset_y, a.offset_x,
                    a.video_id, a.timestamp) < std::tie(b.game, b.level_id, b.tile_row,
                                                        b.tile_col, b.offset_y, b.offset_x,
                                                        b.video_id, b.timestamp);
  });

  DatasetManifest m;
  m.root = out_dir;
  m.seed = seed;
  m.threshold = threshold;
  m.config = config_echo.values();
  m.config_hash = config_echo.hash();

  std::vector<std::size_t> train_idx;
  std::size_t n_per_split[2] = {0, 0};
  std::vector<ManifestRecord> unique(samples.size());
  for (auto split : {Split::train, Split::test}) {
    fs::create_directories(out_dir / to_string(split) / "frames");
    fs::create_directories(out_dir / to_string(split) / "labels");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto& n = n_per_split[s.split == Split::train ? 0 : 1];
    const auto stem = std::to_string(n++);
    auto& r = unique[i];
    r.frame = to_string(s.split) + "/frames/" + stem + ".png";
    r.label = to_string(s.split) + "/labels/" + stem + ".txt";
    r.game = s.game;
    r.level_id = s.level_id;
    r.split = s.split;
    r.tile_row = s.tile_row;
    r.tile_col = s.tile_col;
    r.offset_x = s.offset_x;
    r.offset_y = s.offset_y;
    r.score = s.score;
    r.video_id = s.video_id;
    r.timestamp = s.timestamp;
    save_png(s.frame, out_dir / r.frame);
    write_text(out_dir / r.label, render_segment(s.label));
    if (s.split == Split::train) train_idx.push_back(i);
  }

  std::vector<GameTag> train_games;
  for (auto i : train_idx) train_games.push_back(samples[i].game);
  const auto balanced = balance_indices(train_games, seed);
  for (std::size_t pos = 0; pos < balanced.size(); ++pos) {
    auto rec = unique[train_idx[balanced[pos]]];
    rec.upsampled = pos >= train_idx.size();
    m.records.push_back(std::move(rec));
  }
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == Split::test) m.records.push_back(unique[i]);

  m.save(out_dir / "manifest.json");
  return m;
}

DatasetManifest build_dataset(const BuilderConfig& cfg, const fs::path& out_dir,
                              BuildStats* stats) {
  BuildStats local;
  BuildStats& st = stats ? *stats : local;
  std::map<std::string, AnnotatedLevel> levels;
  std::vector<PairedSample> samples;

  for (const auto& [video, level_key] : cfg.video_level) {
    auto [game, level_id] = split_level_key(level_key);
    if (!levels.count(level_key)) levels.emplace(level_key, load_level(cfg, game, level_id));
    const auto& level = levels.at(level_key);

    auto files = list_frames(cfg.frames_dir / video);
    if (files.empty()) throw EmptyStreamError("no frames found for video " + video);
    const double capture_fps = cfg.video_fps.count(video) ? cfg.video_fps.at(video) : 30.0;
    std::vector<double> ts;
    for (const auto& [index, path] : files) ts.push_back(static_cast<double>(index) / capture_fps);
    st.frames_seen += files.size();

    for (auto i : sample_frame_indices(ts, cfg.fps_for(game))) {
      ++st.frames_sampled;
      RawFrame raw{load_png(files[i].second), video, ts[i]};
      auto frame = rescale_to_tile_size(raw, cfg.tile_px_for(game));
      try {
        samples.push_back(pair_frame(frame, level, cfg.threshold));
      } catch (const LowScoreRejection&) {
        ++st.rejected_low_score;
      } catch (const WindowOutOfBoundsError&) {
        ++st.rejected_out_of_bounds;
      } catch (const FrameTooLargeError&) {
        ++st.rejected_out_of_bounds;
      }
    }
  }
  for (const auto& key : cfg.test_levels) {
    auto [game, level_id] = split_level_key(key);
    if (!levels.count(key))
      throw MissingLevelError("held-out level " + key + " has no frames in the config");
  }
  return write_dataset(std::move(samples), cfg.test_levels, cfg.seed, cfg.source, cfg.threshold,
                       out_dir);
}

}  // namespace levelnet
