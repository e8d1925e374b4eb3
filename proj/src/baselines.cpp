#include "gkr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gkr/errors.hpp"

namespace gkr {

double cosine_score(std::span<const double> fx, std::span<const double> fy) {
  if (fx.size() != fy.size()) {
    throw ShapeError("cosine: dims " + std::to_string(fx.size()) + " and " +
                     std::to_string(fy.size()));
  }
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    dot += fx[i] * fy[i];
    nx += fx[i] * fx[i];
    ny += fy[i] * fy[i];
  }
  if (nx == 0.0 || ny == 0.0) throw DomainError("cosine: zero-norm feature vector");
  return std::clamp(dot / (std::sqrt(nx) * std::sqrt(ny)), -1.0, 1.0);
}

double metric_distance(std::span<const double> fx, std::span<const double> fy, const Matrix& W) {
  if (fx.size() != fy.size() || W.rows() != fx.size()) {
    throw ShapeError("metric: features " + std::to_string(fx.size()) + "/" +
                     std::to_string(fy.size()) + " vs W " + W.shape_str());
  }
  double sq = 0.0;
  for (std::size_t j = 0; j < W.cols(); ++j) {
    double proj = 0.0;
    for (std::size_t i = 0; i < W.rows(); ++i) proj += W(i, j) * (fx[i] - fy[i]);
    sq += proj * proj;
  }
  return std::sqrt(sq);
}

Var cosine_score(Tape& tape, Var fx, Var fy) {
  if (!tape.value(fx).same_shape(tape.value(fy))) {
    throw ShapeError("cosine: shapes " + tape.value(fx).shape_str() + " and " +
                     tape.value(fy).shape_str());
  }
  const Var dot = tape.sum(tape.mul(fx, fy));
  const Var nx = tape.sqrt(tape.sum(tape.mul(fx, fx)));
  const Var ny = tape.sqrt(tape.sum(tape.mul(fy, fy)));
  if (tape.scalar(nx) == 0.0 || tape.scalar(ny) == 0.0) {
    throw DomainError("cosine: zero-norm feature vector");
  }
  return tape.div(dot, tape.mul(nx, ny));
}

Var metric_distance(Tape& tape, Var fx, Var fy, const Matrix& W) {
  const Var proj = tape.linear(W, tape.sub(fx, fy));
  return tape.sqrt(tape.sum(tape.mul(proj, proj)));
}

CosineModel::CosineModel(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw UsageError("cosine: dimension must be positive");
}

Var CosineModel::logit(Tape& tape, Var fx, Var fy) const {
  const Var c = cosine_score(tape, fx, fy);
  return tape.add(tape.mul(tape.param(temperature_), c), tape.param(bias_));
}

void CosineModel::collect(std::vector<Matrix*>& params, std::vector<std::string>& names) {
  params.push_back(&temperature_);
  names.push_back("cosine.temperature");
  params.push_back(&bias_);
  names.push_back("cosine.bias");
}

std::unique_ptr<PairModel> CosineModel::clone() const {
  return std::make_unique<CosineModel>(*this);
}

namespace {

std::vector<std::size_t> fusion_widths(std::size_t dim, const BaselineSpec& spec) {
  std::vector<std::size_t> w{2 * dim};
  if (spec.mlp_hidden.empty()) {
    w.push_back(dim);
  } else {
    w.insert(w.end(), spec.mlp_hidden.begin(), spec.mlp_hidden.end());
  }
  w.push_back(1);
  return w;
}

}  // namespace

MlpFusionModel::MlpFusionModel(std::size_t dim, const BaselineSpec& spec, std::uint64_t seed)
    : dim_(dim) {
  if (dim == 0) throw UsageError("mlp fusion: dimension must be positive");
  std::mt19937_64 rng(seed);
  mlp_ = Mlp(fusion_widths(dim, spec), spec.use_bias, rng);
}

MlpFusionModel::MlpFusionModel(std::size_t dim, Mlp mlp) : dim_(dim), mlp_(std::move(mlp)) {
  if (mlp_.input_dim() != 2 * dim || mlp_.output_dim() != 1) {
    throw ShapeError("mlp fusion: network must map " + std::to_string(2 * dim) + " inputs to 1");
  }
}

Var MlpFusionModel::logit(Tape& tape, Var fx, Var fy) const {
  const Var parts[] = {fx, fy};
  const Var joined = tape.concat(parts);
  if (tape.value(joined).cols() != 2 * dim_) {
    throw ShapeError("mlp fusion: expected two " + std::to_string(dim_) + "-dim features, got " +
                     tape.value(fx).shape_str() + " and " + tape.value(fy).shape_str());
  }
  return mlp_.forward(tape, joined);
}

void MlpFusionModel::collect(std::vector<Matrix*>& params, std::vector<std::string>& names) {
  mlp_.collect("fusion", params, names);
}

std::unique_ptr<PairModel> MlpFusionModel::clone() const {
  return std::make_unique<MlpFusionModel>(*this);
}

LinearMetricModel::LinearMetricModel(std::size_t dim, const BaselineSpec& spec,
                                     std::uint64_t seed) {
  if (dim == 0) throw UsageError("metric: dimension must be positive");
  const std::size_t rank = spec.metric_rank == 0 ? dim : spec.metric_rank;
  if (rank > dim) {
    throw UsageError("metric: projection rank " + std::to_string(rank) + " exceeds D = " +
                     std::to_string(dim));
  }
  std::mt19937_64 rng(seed);
  projection_ = uniform_fan_in(dim, rank, rng);
}

Var LinearMetricModel::logit(Tape& tape, Var fx, Var fy) const {
  if (tape.value(fx).cols() != projection_.rows()) {
    throw ShapeError("metric: features " + tape.value(fx).shape_str() + " vs W " +
                     projection_.shape_str());
  }
  const Var d = metric_distance(tape, fx, fy, projection_);
  const Var alpha = tape.exp(tape.param(log_alpha_));
  return tape.mul(alpha, tape.sub(tape.param(tau_), d));
}

void LinearMetricModel::collect(std::vector<Matrix*>& params, std::vector<std::string>& names) {
  params.push_back(&projection_);
  names.push_back("metric.projection");
  params.push_back(&log_alpha_);
  names.push_back("metric.log_alpha");
  params.push_back(&tau_);
  names.push_back("metric.tau");
}

std::unique_ptr<PairModel> LinearMetricModel::clone() const {
  return std::make_unique<LinearMetricModel>(*this);
}

}  // namespace gkr
