#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "gkr/matrix.hpp"
#include "gkr/tape.hpp"

namespace gkr {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  /// Half-width of the uniform shift applied to every parameter when a probe
  /// crosses a ReLU or max-pool kink.
  double kink_shift = 1e-3;
  int max_kink_shifts = 20;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  /// max over coordinates of |g_ad - g_fd| / max(1, |g_ad| + |g_fd|)
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  int kink_shifts = 0;
  bool passed = false;
};

/// Records a scalar loss on the given tape using the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// Central finite differences against reverse-mode gradients.
///
/// When a probe changes the activation pattern it straddled a kink; all
/// parameters are then shifted by U(-kink_shift, kink_shift) and the check
/// restarts. Parameters are left at their (possibly shifted) values.
///
/// Throws NumericError if two evaluations at the same point disagree bitwise.
GradCheckReport grad_check(const LossBuilder& loss, std::span<Matrix* const> params,
                           const GradCheckOptions& options = {});

}  // namespace gkr
