#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "gkr/model.hpp"
#include "gkr/trainer.hpp"

namespace gkr {

inline constexpr const char* kCheckpointFormat = "gkr-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  KinshipModel model;
};

/// JSON container: format tag, version, model kind, input width, config,
/// and every tensor as {name, rows, cols, data} in row-major order.
/// Doubles are written in shortest round-trip form, so loading is bit-exact.
nlohmann::json checkpoint_json(const KinshipModel& model, const TrainConfig& config);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const KinshipModel& model,
                     const TrainConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gkr
