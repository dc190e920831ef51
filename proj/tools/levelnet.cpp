#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "levelnet/checkpoint.hpp"
#include "levelnet/config.hpp"
#include "levelnet/dataset.hpp"
#include "levelnet/error.hpp"
#include "levelnet/evaluation.hpp"
#include "levelnet/render.hpp"
#include "levelnet/synthetic.hpp"
#include "levelnet/training.hpp"

namespace fs = std::filesystem;
using namespace levelnet;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

KeyValueConfig load_config(const Globals& g) {
  return g.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(g.config);
}

fs::path out_dir(const Globals& g, const char* fallback) {
  return g.out.empty() ? fs::path(fallback) : fs::path(g.out);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DiskError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out || !(out << text)) throw DiskError("cannot write " + p.string());
}

// "procedural", "procedural:1" or a directory of sprites.
Spritesheet sprites_from(const std::string& spec) {
  if (spec.rfind("procedural", 0) == 0) {
    int style = 0;
    if (spec.size() > 11 && spec[10] == ':') style = std::stoi(spec.substr(11));
    return Spritesheet::procedural(style);
  }
  return Spritesheet::load(spec);
}

std::pair<std::string, std::string> split_pair(const std::string& s, const char* what) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
    throw ConfigError(std::string(what) + " expects name=path, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint level translation and generation with a split-tail VAE-GAN"};
  app.set_version_flag("--version", std::string(LEVELNET_VERSION));
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { g.seed = s; g.seed_set = true; }, "random seed");
  app.add_option("--out", g.out, "output directory");

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "pair gameplay frames with level windows");
  build->callback([&] {
    if (g.config.empty()) throw ConfigError("build-dataset needs --config");
    BuilderConfig cfg = BuilderConfig::load(g.config);
    if (g.seed_set) cfg.seed = g.seed;
    BuildStats stats;
    const fs::path out = out_dir(g, "dataset");
    const DatasetManifest m = build_dataset(cfg, out, &stats);
    std::cout << "frames seen " << stats.frames_seen << ", sampled " << stats.frames_sampled
              << ", rejected " << stats.rejected_low_score << " low score / "
              << stats.rejected_out_of_bounds << " out of bounds\n";
    for (const auto& game : m.games())
      std::cout << game << ": train " << m.count(game, Split::train) << ", test "
                << m.count(game, Split::test) << "\n";
    std::cout << "manifest " << (out / "manifest.json").string() << "\n";
  });

  // train
  auto* trn = app.add_subcommand("train", "train one model variant");
  std::string manifest, variant = "ours";
  int epochs = -1, every = 0;
  trn->add_option("--manifest", manifest, "dataset manifest.json")->required();
  trn->add_option("--variant", variant, "ours, original_vaegan, gan, vae, vaegan_text, vae_text");
  trn->add_option("--epochs", epochs, "override hp.epochs");
  trn->add_option("--checkpoint-every", every, "epochs between intermediate checkpoints");
  trn->callback([&] {
    TrainRunConfig rc;
    rc.hp = hyperparams_from_config(load_config(g));
    if (epochs >= 0) rc.hp.epochs = epochs;
    rc.hp.validate();
    rc.manifest = manifest;
    rc.variant = variant_from_string(variant);
    rc.seed = g.seed;
    rc.checkpoint_every = every;
    rc.out_dir = out_dir(g, "run");
    rc.on_epoch = [](const LossRecord& r) { std::cout << r.csv_row() << std::endl; };
    std::cout << LossRecord::csv_header() << "\n";
    const TrainResult res = train(rc);
    std::cout << "checkpoint " << res.checkpoint.string() << "\n";
  });

  // generate
  auto* gen = app.add_subcommand("generate", "sample new segments from the prior");
  std::string checkpoint, sprites;
  std::size_t count = 0;
  gen->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  gen->add_option("-n,--count", count, "number of samples")->required();
  gen->add_option("--render", sprites, "also write PNGs: sprite dir or procedural[:style]");
  gen->callback([&] {
    const ModelBundle bundle = load_checkpoint(checkpoint);
    const auto segs = generate_segments(bundle, count, g.seed);
    std::optional<Spritesheet> sheet;
    if (!sprites.empty()) sheet = sprites_from(sprites);
    const fs::path out = out_dir(g, "samples");
    write_segments(out, segs, sheet ? &*sheet : nullptr);
    std::cout << segs.size() << " segments written to " << out.string() << "\n";
  });

  // translate
  auto* tr = app.add_subcommand("translate", "translate gameplay frames into tile segments");
  std::string frames, labels;
  bool auto_resize = false;
  int tile_px = kTilePx;
  tr->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  tr->add_option("--frames", frames, "directory of PNG frames")->required();
  tr->add_option("--labels", labels, "label directory (default: sibling labels/)");
  tr->add_flag("--auto-resize", auto_resize, "rescale frames of any size");
  tr->add_option("--tile-px", tile_px, "native tile size of the frames when resizing");
  tr->callback([&] {
    ModelBundle bundle = load_checkpoint(checkpoint);
    fs::path label_dir = labels;
    if (label_dir.empty()) label_dir = fs::path(frames).parent_path() / "labels";
    const auto res = translate_frames(bundle, frames, label_dir, {auto_resize, tile_px});
    const fs::path out = out_dir(g, "translations");
    fs::create_directories(out);
    for (std::size_t i = 0; i < res.names.size(); ++i)
      write_file(out / (res.names[i] + ".txt"), render_segment(res.segments[i]));
    std::cout << res.segments.size() << " frames translated\n";
    if (res.accuracy) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", *res.accuracy);
      std::cout << "accuracy " << buf << " over " << res.labelled << " labelled frames\n";
    }
  });

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "compare checkpoints against a dataset");
  std::vector<std::string> ckpts;
  ev->add_option("--manifest", manifest, "dataset manifest.json")->required();
  ev->add_option("--checkpoint", ckpts, "name=checkpoint-dir, repeatable")->required();
  ev->callback([&] {
    std::vector<NamedCheckpoint> list;
    for (const auto& c : ckpts) {
      auto [name, dir] = split_pair(c, "--checkpoint");
      list.push_back({name, dir});
    }
    const DatasetManifest m = DatasetManifest::load(manifest);
    const fs::path out = out_dir(g, "evaluation");
    fs::create_directories(out);
    const auto report = evaluate(list, m, g.seed, out / "features",
                                 [](const std::string& s) { std::cerr << s << "\n"; });
    write_file(out / "report.csv", report.to_csv());
    write_file(out / "report.json", report.to_json());
    std::cout << report.to_csv();
  });

  // plot-kde
  auto* kde = app.add_subcommand("plot-kde", "linearity vs leniency density plots");
  std::vector<std::string> models, refs;
  int width = 240, height = 240;
  kde->add_option("--model", models, "model feature csv, repeatable")->required();
  kde->add_option("--reference", refs, "game=dataset feature csv, repeatable")->required();
  kde->add_option("--width", width);
  kde->add_option("--height", height);
  kde->callback([&] {
    std::vector<fs::path> model_files(models.begin(), models.end());
    std::vector<std::pair<GameTag, fs::path>> ref_files;
    for (const auto& r : refs) {
      auto [game, path] = split_pair(r, "--reference");
      ref_files.emplace_back(game, path);
    }
    for (const auto& f : plot_kde(model_files, ref_files, out_dir(g, "plots"), {width, height}))
      std::cout << f.string() << "\n";
  });

  // render
  auto* rnd = app.add_subcommand("render", "render segment text files as images");
  std::vector<std::string> segments;
  sprites = "procedural";
  rnd->add_option("segments", segments, "segment .txt files")->required();
  rnd->add_option("--sprites", sprites, "sprite directory or procedural[:style]");
  rnd->callback([&] {
    const Spritesheet sheet = sprites_from(sprites);
    const fs::path out = out_dir(g, "renders");
    fs::create_directories(out);
    for (const auto& s : segments) {
      const fs::path file = out / (fs::path(s).stem().string() + ".png");
      save_png(render_tiles(parse_segment(read_file(s)), sheet), file);
      std::cout << file.string() << "\n";
    }
  });

  // synth
  auto* syn = app.add_subcommand("synth", "write a synthetic builder input tree");
  int levels = 3, per_video = 24;
  syn->add_option("--levels", levels, "levels per game");
  syn->add_option("--frames", per_video, "frames per level video");
  syn->callback([&] {
    SyntheticLayoutOptions opt;
    opt.levels_per_game = levels;
    opt.frames_per_video = per_video;
    opt.seed = g.seed;
    std::cout << write_synthetic_layout(out_dir(g, "synthetic"), opt).string() << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[UsageError]: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error[" << e.code() << "]: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[InternalError]: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
