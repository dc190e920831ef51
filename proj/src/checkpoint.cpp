#include "levelnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "levelnet/error.hpp"
#include "levelnet/tile_repr.hpp"

namespace levelnet {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'L', 'N', 'P', 'A'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const fs::path& file) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw DiskError("truncated parameter archive " + file.string());
  return v;
}

void write_archive(const fs::path& file, const std::vector<NamedTensor>& entries) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DiskError("cannot write " + file.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointFormat);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (int d : e.tensor.shape()) put<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(e.tensor.values().data()),
              static_cast<std::streamsize>(e.tensor.size() * sizeof(double)));
  }
  if (!out) throw DiskError("failed writing " + file.string());
}

struct StoredTensor {
  ag::Shape shape;
  std::vector<double> values;
};

std::map<std::string, StoredTensor> read_archive(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DiskError("cannot read " + file.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DiskError(file.string() + " is not a parameter archive");
  const auto format = take<std::uint32_t>(in, file);
  if (format != kCheckpointFormat)
    throw DiskError(file.string() + ": unsupported archive format " + std::to_string(format));
  const auto n = take<std::uint32_t>(in, file);
  std::map<std::string, StoredTensor> out;
  for (std::uint32_t k = 0; k < n; ++k) {
    std::string name(take<std::uint32_t>(in, file), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size())))
      throw DiskError("truncated parameter archive " + file.string());
    StoredTensor t;
    const auto rank = take<std::uint32_t>(in, file);
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(take<std::int32_t>(in, file));
    t.values.resize(ag::numel(t.shape));
    if (!in.read(reinterpret_cast<char*>(t.values.data()),
                 static_cast<std::streamsize>(t.values.size() * sizeof(double))))
      throw DiskError("truncated parameter archive " + file.string());
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

// Per-network tensors in archive order: trainable parameters then buffers.
std::vector<std::pair<std::string, std::vector<NamedTensor>>> network_tensors(
    const ModelBundle& b) {
  std::vector<std::pair<std::string, std::vector<NamedTensor>>> out;
  if (b.encoder) {
    auto ps = b.encoder->parameters();
    auto bs = b.encoder->buffers();
    ps.insert(ps.end(), bs.begin(), bs.end());
    out.emplace_back("encoder", std::move(ps));
  }
  if (b.decoder) out.emplace_back("decoder", b.decoder->parameters());
  if (b.generator) out.emplace_back("generator", b.generator->parameters());
  if (b.discriminator) out.emplace_back("discriminator", b.discriminator->parameters());
  return out;
}

}  // namespace

std::string parameter_hash(const std::vector<NamedTensor>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    h = fnv1a64(p.name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(p.tensor.values().data()),
                                 p.tensor.size() * sizeof(double)),
                h);
  }
  return hex64(h);
}

std::string hyperparams_json(const HyperParams& hp) {
  json j = {{"latent_dim", hp.latent_dim},       {"leaky_slope", hp.leaky_slope},
            {"f_vae", hp.f_vae},                 {"f_gen", hp.f_gen},
            {"f_disc", hp.f_disc},               {"dropout_vae", hp.dropout_vae},
            {"dropout_gen", hp.dropout_gen},     {"dropout_disc", hp.dropout_disc},
            {"gan_lr", hp.gan_lr},               {"vae_lr", hp.vae_lr},
            {"n_disc", hp.n_disc},               {"gp_lambda", hp.gp_lambda},
            {"batch", hp.batch},                 {"epochs", hp.epochs},
            {"noise_sigma", hp.noise_sigma},     {"kl_weight", hp.kl_weight},
            {"adam_beta1", hp.adam_beta1},       {"adam_beta2", hp.adam_beta2},
            {"recon_gen_coeff", hp.recon_gen_coeff}, {"branch_width", hp.branch_width},
            {"seed_channels", hp.seed_channels}};
  return j.dump();
}

HyperParams hyperparams_from_json(const std::string& text) {
  const json j = json::parse(text);
  HyperParams hp;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("latent_dim", hp.latent_dim);
  get("leaky_slope", hp.leaky_slope);
  get("f_vae", hp.f_vae);
  get("f_gen", hp.f_gen);
  get("f_disc", hp.f_disc);
  get("dropout_vae", hp.dropout_vae);
  get("dropout_gen", hp.dropout_gen);
  get("dropout_disc", hp.dropout_disc);
  get("gan_lr", hp.gan_lr);
  get("vae_lr", hp.vae_lr);
  get("n_disc", hp.n_disc);
  get("gp_lambda", hp.gp_lambda);
  get("batch", hp.batch);
  get("epochs", hp.epochs);
  get("noise_sigma", hp.noise_sigma);
  get("kl_weight", hp.kl_weight);
  get("adam_beta1", hp.adam_beta1);
  get("adam_beta2", hp.adam_beta2);
  get("recon_gen_coeff", hp.recon_gen_coeff);
  get("branch_width", hp.branch_width);
  get("seed_channels", hp.seed_channels);
  return hp;
}

HyperParams hyperparams_from_config(const KeyValueConfig& cfg, HyperParams hp) {
  auto d = [&](const char* key, double& field) { field = cfg.get_double_or(std::string("hp.") + key, field); };
  auto i = [&](const char* key, int& field) {
    field = static_cast<int>(cfg.get_int_or(std::string("hp.") + key, field));
  };
  i("latent_dim", hp.latent_dim);
  d("leaky_slope", hp.leaky_slope);
  i("f_vae", hp.f_vae);
  i("f_gen", hp.f_gen);
  i("f_disc", hp.f_disc);
  d("dropout_vae", hp.dropout_vae);
  d("dropout_gen", hp.dropout_gen);
  d("dropout_disc", hp.dropout_disc);
  d("gan_lr", hp.gan_lr);
  d("vae_lr", hp.vae_lr);
  i("n_disc", hp.n_disc);
  d("gp_lambda", hp.gp_lambda);
  i("batch", hp.batch);
  i("epochs", hp.epochs);
  d("noise_sigma", hp.noise_sigma);
  d("kl_weight", hp.kl_weight);
  d("adam_beta1", hp.adam_beta1);
  d("adam_beta2", hp.adam_beta2);
  d("recon_gen_coeff", hp.recon_gen_coeff);
  i("branch_width", hp.branch_width);
  i("seed_channels", hp.seed_channels);
  for (const auto& [key, _] : cfg.with_prefix("hp."))
    if (json::parse(hyperparams_json(hp)).contains(key) == false)
      throw ConfigError("unknown hyperparameter 'hp." + key + "'");
  hp.validate();
  return hp;
}

std::string save_checkpoint(const ModelBundle& bundle, const fs::path& dir, int epoch) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DiskError("cannot create " + dir.string() + ": " + ec.message());

  std::set<const ag::Node*> stored;
  std::map<std::string, std::string> aliases;  // alias name -> stored name
  std::map<const ag::Node*, std::string> owner;
  std::vector<NamedTensor> everything;
  json networks = json::array();
  for (const auto& [net, tensors] : network_tensors(bundle)) {
    std::vector<NamedTensor> own;
    for (const auto& t : tensors) {
      if (stored.insert(t.tensor.id()).second) {
        owner[t.tensor.id()] = t.name;
        own.push_back(t);
      } else {
        aliases[t.name] = owner[t.tensor.id()];
      }
    }
    write_archive(dir / (net + ".bin"), own);
    everything.insert(everything.end(), own.begin(), own.end());
    networks.push_back(net);
  }

  const std::string id = parameter_hash(everything);
  json meta = {{"format", kCheckpointFormat},
               {"variant", to_string(bundle.variant())},
               {"input_mode", to_string(bundle.input_mode())},
               {"hyperparams", json::parse(hyperparams_json(bundle.hp()))},
               {"seed", bundle.seed()},
               {"epoch", epoch},
               {"alphabet", TileAlphabet::order()},
               {"version", LEVELNET_VERSION},
               {"networks", networks},
               {"shared", aliases},
               {"shared_binding", bundle.shared_binding()},
               {"id", id}};
  std::ofstream out(dir / "meta.json");
  if (!out) throw DiskError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(1) << "\n";
  if (!out) throw DiskError("failed writing " + (dir / "meta.json").string());
  return id;
}

CheckpointMeta read_checkpoint_meta(const fs::path& dir) {
  const fs::path file = dir / "meta.json";
  std::ifstream in(file);
  if (!in) throw DiskError("no checkpoint metadata at " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DiskError("malformed " + file.string() + ": " + e.what());
  }
  CheckpointMeta m;
  m.variant = variant_from_string(j.at("variant").get<std::string>());
  m.hp = hyperparams_from_json(j.at("hyperparams").dump());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.epoch = j.value("epoch", 0);
  m.alphabet = j.value("alphabet", std::string());
  m.version = j.value("version", std::string());
  m.id = j.value("id", std::string());
  if (j.contains("shared")) m.shared = j.at("shared").get<std::map<std::string, std::string>>();
  if (m.alphabet != TileAlphabet::order())
    throw AlphabetError("checkpoint tile alphabet '" + m.alphabet + "' differs from '" +
                     TileAlphabet::order() + "'");
  return m;
}

ModelBundle load_checkpoint(const fs::path& dir, CheckpointMeta* meta_out) {
  CheckpointMeta meta = read_checkpoint_meta(dir);
  ModelBundle bundle(meta.variant, meta.hp, meta.seed);
  for (auto& [net, tensors] : network_tensors(bundle)) {
    const auto stored = read_archive(dir / (net + ".bin"));
    for (auto& t : tensors) {
      auto it = stored.find(t.name);
      if (it == stored.end()) {
        if (meta.shared.count(t.name)) continue;  // restored through its owner
        throw DiskError("checkpoint " + dir.string() + " lacks tensor " + t.name);
      }
      if (it->second.shape != t.tensor.shape())
        throw ShapeError("checkpoint tensor " + t.name + " has shape " +
                         ag::to_string(it->second.shape) + ", expected " +
                         ag::to_string(t.tensor.shape()));
      t.tensor.mutable_values() = it->second.values;
    }
  }
  if (meta_out) *meta_out = meta;
  return bundle;
}

}  // namespace levelnet
