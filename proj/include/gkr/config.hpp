#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gkr/data.hpp"
#include "gkr/trainer.hpp"

namespace gkr {

inline constexpr int kSchemaVersion = 1;

/// Where a run gets its pairs from.
struct DataSource {
  enum class Kind { Synthetic, Files };
  Kind kind = Kind::Synthetic;
  SynthSpec synthetic;
  std::filesystem::path features;
  std::filesystem::path pairs;
  /// Generate folds for a manifest without a fold column.
  bool assign_folds = false;
  int folds = 5;
  std::uint64_t fold_seed = 1;
};

struct RunConfig {
  TrainConfig train;
  DataSource data;
};

/// Desk-scale defaults: GKR with F = (16, 4) on the default synthetic task.
RunConfig default_run_config();

/// Full document with every default written out.
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const SynthSpec& spec);

/// Overlays the keys present in `doc` onto `base`. Unknown keys and
/// ill-typed values throw UsageError naming the key path. Relative data paths
/// resolve against `base_dir`.
RunConfig apply_json(RunConfig base, const nlohmann::json& doc,
                     const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = default_run_config());

/// Features and pairs described by `source`, with folds assigned when asked.
struct LoadedData {
  FeatureTable features;
  PairSet pairs;
};
LoadedData load_data(const DataSource& source);

}  // namespace gkr
