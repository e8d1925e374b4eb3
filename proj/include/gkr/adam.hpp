#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gkr/matrix.hpp"

namespace gkr {

struct AdamOptions {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one ordered list of parameters.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<const Matrix* const> params, AdamOptions options);

  /// p -= lr · m̂ / (√v̂ + ε), with bias-corrected moments.
  void step(std::span<Matrix* const> params, std::span<const Matrix> grads);

  std::uint64_t steps() const noexcept { return step_; }
  const AdamOptions& options() const noexcept { return options_; }
  const std::vector<Matrix>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix>& second_moments() const noexcept { return v_; }

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace gkr
