#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gkr/grad_check.hpp"
#include "gkr/model.hpp"

namespace gkr {

struct ModelVariant {
  std::string label;
  ModelSpec spec;
};

/// Every central init (mean, max, 0, 0.5, 1) crossed with both aggregators.
std::vector<ModelVariant> gkr_variants(const GkrConfig& base);

/// Parses "D,F0,F1,...,FK" with F0 = 2 into a GKR config.
GkrConfig parse_dims(const std::string& text);

/// Gradient check of the balanced batch loss for a freshly initialised model
/// on a random batch of `batch` pairs (half kin) with features in [-1, 1].
GradCheckReport check_model_gradients(const ModelSpec& spec, std::size_t dim, std::size_t batch,
                                      std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace gkr
