#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gkr/matrix.hpp"
#include "gkr/mlp.hpp"
#include "gkr/pair_model.hpp"
#include "gkr/tape.hpp"

namespace gkr {

/// fxᵀfy / (‖fx‖·‖fy‖). Throws DomainError on a zero vector.
double cosine_score(std::span<const double> fx, std::span<const double> fy);

/// ‖Wᵀ(fx − fy)‖₂ with W of shape D×r.
double metric_distance(std::span<const double> fx, std::span<const double> fy, const Matrix& W);

/// Tape versions of the two scores above.
Var cosine_score(Tape& tape, Var fx, Var fy);
Var metric_distance(Tape& tape, Var fx, Var fy, const Matrix& W);

struct BaselineSpec {
  /// MlpFusion hidden widths; empty means one hidden layer of width D.
  std::vector<std::size_t> mlp_hidden;
  /// LinearMetric projection rank r; 0 means r = D.
  std::size_t metric_rank = 0;
  bool use_bias = false;
};

/// Cosine similarity calibrated into a probability by σ(t·cos + b).
class CosineModel final : public PairModel {
 public:
  explicit CosineModel(std::size_t dim);

  ModelKind kind() const override { return ModelKind::Cosine; }
  std::size_t dim() const override { return dim_; }
  Var logit(Tape& tape, Var fx, Var fy) const override;
  void collect(std::vector<Matrix*>& params, std::vector<std::string>& names) override;
  std::unique_ptr<PairModel> clone() const override;

  Matrix& temperature() { return temperature_; }
  Matrix& bias() { return bias_; }

 private:
  std::size_t dim_;
  Matrix temperature_{1, 1, 1.0};
  Matrix bias_{1, 1, 0.0};
};

/// MLP over the concatenation [fx ‖ fy].
class MlpFusionModel final : public PairModel {
 public:
  MlpFusionModel(std::size_t dim, const BaselineSpec& spec, std::uint64_t seed);
  MlpFusionModel(std::size_t dim, Mlp mlp);

  ModelKind kind() const override { return ModelKind::MlpFusion; }
  std::size_t dim() const override { return dim_; }
  Var logit(Tape& tape, Var fx, Var fy) const override;
  void collect(std::vector<Matrix*>& params, std::vector<std::string>& names) override;
  std::unique_ptr<PairModel> clone() const override;

  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }

 private:
  std::size_t dim_;
  Mlp mlp_;
};

/// Learned projected distance d = ‖Wᵀ(fx − fy)‖ scored as α·(τ − d), α = e^s > 0.
/// The decision rule is an extension on top of the plain metric.
class LinearMetricModel final : public PairModel {
 public:
  LinearMetricModel(std::size_t dim, const BaselineSpec& spec, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::LinearMetric; }
  std::size_t dim() const override { return projection_.rows(); }
  Var logit(Tape& tape, Var fx, Var fy) const override;
  void collect(std::vector<Matrix*>& params, std::vector<std::string>& names) override;
  std::unique_ptr<PairModel> clone() const override;

  Matrix& projection() { return projection_; }
  const Matrix& projection() const { return projection_; }
  Matrix& log_alpha() { return log_alpha_; }
  Matrix& tau() { return tau_; }

 private:
  Matrix projection_;
  Matrix log_alpha_{1, 1, 0.0};
  Matrix tau_{1, 1, 1.0};
};

}  // namespace gkr
