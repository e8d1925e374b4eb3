#include "gkr/mlp.hpp"

#include <cmath>

#include "gkr/errors.hpp"

namespace gkr {

Matrix uniform_fan_in(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = u(rng);
  return m;
}

Mlp::Mlp(const std::vector<std::size_t>& widths, bool use_bias, std::mt19937_64& rng) {
  if (widths.size() < 2) throw UsageError("mlp: need at least input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw UsageError("mlp: layer widths must be positive");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Dense d{uniform_fan_in(widths[i], widths[i + 1], rng), {}};
    if (use_bias) d.bias = Matrix(1, widths[i + 1]);
    layers_.push_back(std::move(d));
  }
}

Var Mlp::forward(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = tape.linear(layers_[i].weight, x);
    if (!layers_[i].bias.empty()) x = tape.add_bias(x, layers_[i].bias);
    if (i + 1 < layers_.size()) x = tape.relu(x);
  }
  return x;
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.rows(); }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.cols(); }

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> w;
  if (layers_.empty()) return w;
  w.push_back(input_dim());
  for (const Dense& d : layers_) w.push_back(d.weight.cols());
  return w;
}

void Mlp::collect(const std::string& prefix, std::vector<Matrix*>& out,
                  std::vector<std::string>& names) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    out.push_back(&layers_[i].weight);
    names.push_back(prefix + "." + std::to_string(i) + ".weight");
    if (!layers_[i].bias.empty()) {
      out.push_back(&layers_[i].bias);
      names.push_back(prefix + "." + std::to_string(i) + ".bias");
    }
  }
}

}  // namespace gkr
