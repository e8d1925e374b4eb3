#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gkr/matrix.hpp"
#include "gkr/tape.hpp"

namespace gkr {

/// i.i.d. U(-1/√fan_in, 1/√fan_in), fan_in = rows (the input side of Wᵀx).
Matrix uniform_fan_in(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

struct Dense {
  Matrix weight;  // in × out
  Matrix bias;    // 1 × out, empty when biases are off
};

/// Fully connected stack with ReLU between layers and a linear last layer.
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}
  Mlp(const std::vector<std::size_t>& widths, bool use_bias, std::mt19937_64& rng);

  Var forward(Tape& tape, Var x) const;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<std::size_t> widths() const;
  bool has_bias() const { return !layers_.empty() && !layers_.front().bias.empty(); }

  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }

  /// Appends weight (and bias) pointers with names "<prefix>.<i>.weight" / ".bias".
  void collect(const std::string& prefix, std::vector<Matrix*>& out,
               std::vector<std::string>& names);

 private:
  std::vector<Dense> layers_;
};

}  // namespace gkr
