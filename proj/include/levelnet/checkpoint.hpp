#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "levelnet/config.hpp"
#include "levelnet/networks.hpp"

namespace levelnet {

inline constexpr int kCheckpointFormat = 1;

struct CheckpointMeta {
  Variant variant = Variant::ours;
  HyperParams hp;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::string alphabet;
  std::string version;
  std::string id;  // hash of the stored parameter values
  std::map<std::string, std::string> shared;  // alias name -> stored name
};

/// Writes `<dir>/<network>.bin` for each present network plus `meta.json`.
/// Tensors aliased between networks are stored once, under the first owner.
/// Returns the checkpoint id. Throws DiskError.
std::string save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& dir,
                            int epoch = 0);

/// Rebuilds the bundle (aliases included) and restores every stored value.
/// Throws DiskError, BadVariantError, AlphabetError or ShapeError.
ModelBundle load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta = nullptr);
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

/// FNV-1a over parameter names and raw values.
std::string parameter_hash(const std::vector<NamedTensor>& params);

std::string hyperparams_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const std::string& text);
/// Overrides fields from `hp.<name>` keys of a config.
HyperParams hyperparams_from_config(const KeyValueConfig& cfg, HyperParams base = {});

}  // namespace levelnet
