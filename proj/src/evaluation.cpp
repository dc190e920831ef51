#include "levelnet/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "levelnet/checkpoint.hpp"
#include "levelnet/error.hpp"
#include "levelnet/training.hpp"

namespace levelnet {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_text(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DiskError("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw DiskError("cannot write " + file.string());
  out << text;
  if (!out) throw DiskError("failed writing " + file.string());
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v == 0.0 ? 0.0 : v);  // no "-0.000000"
  return buf;
}

std::vector<FeatureVector> features_of(const std::vector<LevelSegment>& segs) {
  std::vector<FeatureVector> out;
  out.reserve(segs.size());
  for (const auto& s : segs) out.push_back(features(s));
  return out;
}

double playable_rate(const std::vector<LevelSegment>& segs, const AgentProfile& agent) {
  if (segs.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& s : segs) ok += playability(s, agent);
  return static_cast<double>(ok) / static_cast<double>(segs.size());
}

void write_feature_table(const fs::path& file, const std::vector<LevelSegment>& segs) {
  std::string text = metric_report_header() + "\n";
  for (std::size_t i = 0; i < segs.size(); ++i)
    text += metric_report_row(std::to_string(i), segs[i]) + "\n";
  write_text(file, text);
}

// Original records of a split; upsampled training copies are skipped.
TrainingSet load_original(const DatasetManifest& m, Split split) {
  DatasetManifest filtered = m;
  filtered.records.clear();
  for (const auto& r : m.records)
    if (r.split == split && !r.upsampled) filtered.records.push_back(r);
  return load_split(filtered, split);
}

}  // namespace

std::vector<LevelSegment> generate_segments(const ModelBundle& bundle, std::size_t n,
                                            std::uint64_t seed) {
  if (!bundle.can_generate())
    throw MissingNetworkError("variant " + to_string(bundle.variant()) + " cannot sample");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = bundle.hp().latent_dim;
  constexpr std::size_t kChunk = 64;
  ag::GradModeGuard no_grad(false);
  std::vector<LevelSegment> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; s += kChunk) {
    const int rows = static_cast<int>(std::min(kChunk, n - s));
    std::vector<double> z(static_cast<std::size_t>(rows) * d);
    for (auto& v : z) v = normal(rng);
    auto grids = tensor_to_grids(
        bundle.generate(Tensor::constant({rows, d}, std::move(z)), ForwardContext::eval()));
    for (const auto& g : grids) out.push_back(decode_grid(g));
  }
  return out;
}

void write_segments(const fs::path& dir, const std::vector<LevelSegment>& segs,
                    const Spritesheet* sheet) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DiskError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu", i);
    write_text(dir / (std::string(name) + ".txt"), render_segment(segs[i]));
    if (sheet) save_png(render_tiles(segs[i], *sheet), dir / (std::string(name) + ".png"));
  }
}

Image prepare_frame(const Image& frame, int native_tile_px) {
  RawFrame raw{frame, "", 0.0};
  Image img = rescale_to_tile_size(raw, native_tile_px).image;
  if (img.width() >= kWindowWidthPx && img.height() >= kWindowHeightPx)
    img = crop(img, (img.width() - kWindowWidthPx) / 2, (img.height() - kWindowHeightPx) / 2,
               kWindowWidthPx, kWindowHeightPx);
  return resize_area(img, kFrameWidth, kFrameHeight);
}

TranslationResult translate_frames(ModelBundle& bundle, const fs::path& frames_dir,
                                   const fs::path& labels_dir, const TranslateOptions& opt) {
  if (!fs::is_directory(frames_dir)) throw DiskError("no frame directory " + frames_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(frames_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  TranslationResult result;
  TrainingSet batch;
  for (const auto& f : files) {
    Image img = load_png(f);
    if (img.width() != kFrameWidth || img.height() != kFrameHeight) {
      if (!opt.auto_resize)
        throw ShapeError(f.string() + " is " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()) +
                         "; frames must be 75x50 (use --auto-resize)");
      img = prepare_frame(img, opt.native_tile_px);
    }
    batch.frames.push_back(std::move(img));
    batch.labels.emplace_back();
    result.names.push_back(f.stem().string());
  }
  if (bundle.input_mode() == InputMode::text)
    throw BadVariantError("variant " + to_string(bundle.variant()) +
                          " reads tile grids, not frames");
  result.segments = translate_all(bundle, batch);

  if (!labels_dir.empty() && fs::is_directory(labels_dir)) {
    std::vector<LevelSegment> truth;
    for (const auto& name : result.names) {
      const fs::path label = labels_dir / (name + ".txt");
      if (!fs::exists(label)) break;
      truth.push_back(parse_segment(read_text(label)));
    }
    result.labelled = truth.size();
    if (!truth.empty() && truth.size() == result.segments.size())
      result.accuracy = translation_accuracy(result.segments, truth);
  }
  return result;
}

// ---------------------------------------------------------------------------

std::string EvaluationReport::csv_header() {
  return "model,train_accuracy,test_accuracy,train_e_distance,test_e_distance,playability_smb,"
         "playability_ki";
}

std::string EvaluationReport::to_csv() const {
  std::string out = csv_header() + "\n";
  auto acc = [](const std::optional<double>& v) { return v ? fixed(*v) : std::string("-"); };
  for (const auto& r : rows)
    out += r.model + "," + acc(r.train_accuracy) + "," + acc(r.test_accuracy) + "," +
           fixed(r.train_e_distance) + "," + fixed(r.test_e_distance) + "," +
           fixed(r.playability_smb) + "," + fixed(r.playability_ki) + "\n";
  return out;
}

std::string EvaluationReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"model", r.model},
                         {"train_accuracy", r.train_accuracy ? json(*r.train_accuracy) : json()},
                         {"test_accuracy", r.test_accuracy ? json(*r.test_accuracy) : json()},
                         {"train_e_distance", r.train_e_distance},
                         {"test_e_distance", r.test_e_distance},
                         {"playability_smb", r.playability_smb},
                         {"playability_ki", r.playability_ki},
                         {"generated_samples", r.generated},
                         {"checkpoint", r.checkpoint},
                         {"checkpoint_id", r.checkpoint_id}});
  }
  json j = {{"rows", rows_json},
            {"seed", seed},
            {"manifest", manifest},
            {"manifest_hash", manifest_hash},
            {"config_hash", config_hash},
            {"train_samples", train_count},
            {"test_samples", test_count},
            {"version", LEVELNET_VERSION}};
  return j.dump(1) + "\n";
}

EvaluationReport evaluate(const std::vector<NamedCheckpoint>& checkpoints,
                          const DatasetManifest& manifest, std::uint64_t seed,
                          const fs::path& features_dir,
                          const std::function<void(const std::string&)>& log) {
  if (checkpoints.empty()) throw ConfigError("evaluation needs at least one checkpoint");
  const TrainingSet train = load_original(manifest, Split::train);
  const TrainingSet test = load_original(manifest, Split::test);
  if (train.size() == 0) throw NoSamplesError("manifest has no training records");
  if (test.size() == 0) throw NoSamplesError("manifest has no test records");

  EvaluationReport report;
  report.seed = seed;
  report.manifest = (manifest.root / "manifest.json").string();
  report.manifest_hash = hex64(fnv1a64(manifest.to_json()));
  report.config_hash = manifest.config_hash;
  report.train_count = train.size();
  report.test_count = test.size();

  const auto train_feats = features_of(train.labels);
  const auto test_feats = features_of(test.labels);
  std::vector<LevelSegment> all_real = train.labels;
  all_real.insert(all_real.end(), test.labels.begin(), test.labels.end());

  if (!features_dir.empty()) {
    fs::create_directories(features_dir);
    write_feature_table(features_dir / "dataset.csv", all_real);
    std::map<GameTag, std::vector<LevelSegment>> by_game;
    for (std::size_t i = 0; i < train.size(); ++i) by_game[train.games[i]].push_back(train.labels[i]);
    for (std::size_t i = 0; i < test.size(); ++i) by_game[test.games[i]].push_back(test.labels[i]);
    for (const auto& [game, segs] : by_game)
      write_feature_table(features_dir / ("dataset_" + game + ".csv"), segs);
  }

  EvaluationRow self;
  self.model = "dataset";
  self.train_e_distance = e_distance(train_feats, train_feats);
  self.test_e_distance = e_distance(test_feats, test_feats);
  self.playability_smb = playable_rate(all_real, AgentProfile::super_mario());
  self.playability_ki = playable_rate(all_real, AgentProfile::kid_icarus());
  self.generated = 0;
  report.rows.push_back(self);

  for (const auto& ck : checkpoints) {
    if (log) log("evaluating " + ck.name);
    try {
      CheckpointMeta meta;
      ModelBundle bundle = load_checkpoint(ck.dir, &meta);
      EvaluationRow row;
      row.model = ck.name;
      row.checkpoint = ck.dir.string();
      row.checkpoint_id = meta.id;
      if (bundle.encoder) {
        row.train_accuracy = translation_accuracy(translate_all(bundle, train), train.labels);
        row.test_accuracy = translation_accuracy(translate_all(bundle, test), test.labels);
      }
      const auto gen_train = generate_segments(bundle, train.size(), seed);
      const auto gen_test = generate_segments(bundle, test.size(), seed + 1);
      row.train_e_distance = e_distance(features_of(gen_train), train_feats);
      row.test_e_distance = e_distance(features_of(gen_test), test_feats);
      std::vector<LevelSegment> generated = gen_train;
      generated.insert(generated.end(), gen_test.begin(), gen_test.end());
      row.generated = generated.size();
      row.playability_smb = playable_rate(generated, AgentProfile::super_mario());
      row.playability_ki = playable_rate(generated, AgentProfile::kid_icarus());
      if (!features_dir.empty()) write_feature_table(features_dir / (ck.name + ".csv"), generated);
      report.rows.push_back(std::move(row));
    } catch (const LowScoreRejection&) {
      throw;
    } catch (const Error& e) {
      throw Error(e.code(), "model " + ck.name + ": " + e.what());
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<Point2> read_feature_points(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw DiskError("cannot read " + csv.string());
  std::string line;
  std::vector<Point2> pts;
  int lin_col = -1, len_col = -1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
    if (lin_col < 0) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "linearity") lin_col = static_cast<int>(i);
        if (cells[i] == "leniency") len_col = static_cast<int>(i);
      }
      if (lin_col < 0 || len_col < 0)
        throw ConfigError(csv.string() + " lacks linearity/leniency columns");
      continue;
    }
    if (static_cast<int>(cells.size()) <= std::max(lin_col, len_col))
      throw ConfigError(csv.string() + ": short row '" + line + "'");
    try {
      pts.push_back({std::stod(cells[lin_col]), std::stod(cells[len_col])});
    } catch (const std::exception&) {
      throw ConfigError(csv.string() + ": malformed number in '" + line + "'");
    }
  }
  if (pts.size() < 2)
    throw TooFewPointsError(csv.string() + " holds " + std::to_string(pts.size()) +
                            " points; density plots need at least 2");
  return pts;
}

Image kde_plot(const std::vector<Point2>& model, const std::vector<Point2>& reference,
               const KdePlotOptions& opt) {
  const RasterSpec spec = covering_raster({model, reference}, opt.width, opt.height);
  const DensityRaster dm = kde_density(model, spec);
  const DensityRaster dr = kde_density(reference, spec);
  const double mm = dm.at(dm.argmax().first, dm.argmax().second);
  const double mr = dr.at(dr.argmax().first, dr.argmax().second);
  Image img(opt.width, opt.height, 1.0);
  for (int j = 0; j < opt.height; ++j)
    for (int i = 0; i < opt.width; ++i) {
      const double a = mm > 0 ? dm.at(j, i) / mm : 0.0;
      const double b = mr > 0 ? dr.at(j, i) / mr : 0.0;
      const int y = opt.height - 1 - j;  // leniency grows upwards
      img.at(y, i, 0) = 1.0 - 0.85 * b;
      img.at(y, i, 1) = 1.0 - 0.85 * std::max(a, b);
      img.at(y, i, 2) = 1.0 - 0.85 * a;
    }
  return img;
}

std::vector<fs::path> plot_kde(const std::vector<fs::path>& model_csvs,
                               const std::vector<std::pair<GameTag, fs::path>>& references,
                               const fs::path& out_dir, const KdePlotOptions& opt) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DiskError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> out;
  for (const auto& csv : model_csvs) {
    const auto model = read_feature_points(csv);
    for (const auto& [game, ref_csv] : references) {
      const auto ref = read_feature_points(ref_csv);
      const fs::path file = out_dir / ("kde_" + csv.stem().string() + "_" + game + ".png");
      save_png(kde_plot(model, ref, opt), file);
      out.push_back(file);
    }
  }
  return out;
}

}  // namespace levelnet
