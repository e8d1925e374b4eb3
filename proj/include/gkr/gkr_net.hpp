#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gkr/matrix.hpp"
#include "gkr/mlp.hpp"
#include "gkr/pair_model.hpp"
#include "gkr/tape.hpp"

namespace gkr {

/// Input node width: each node starts as the pair's two values in one dimension.
inline constexpr std::size_t kInputNodeDim = 2;

/// How the central hub node is initialised before the first layer.
struct CentralInit {
  enum class Kind { MeanPool, MaxPool, Const };
  Kind kind = Kind::Const;
  double value = 0.5;

  static CentralInit mean_pool() { return {Kind::MeanPool, 0.0}; }
  static CentralInit max_pool() { return {Kind::MaxPool, 0.0}; }
  static CentralInit constant(double c) { return {Kind::Const, c}; }

  /// "mean", "max", or the constant itself ("0.5").
  std::string label() const;
  /// Accepts "mean", "max", "const:<c>" or a bare number.
  static CentralInit parse(const std::string& text);

  friend bool operator==(const CentralInit&, const CentralInit&) = default;
};

std::string_view to_string(PoolMode mode);
PoolMode parse_pool_mode(std::string_view text);

struct GkrConfig {
  std::size_t dim = 0;                      // D, number of peripheral nodes
  std::vector<std::size_t> layer_dims;      // F_1..F_K
  CentralInit central_init;
  PoolMode aggregator = PoolMode::Max;
  std::optional<std::vector<std::size_t>> readout_hidden;
  bool use_bias = false;

  std::size_t layers() const { return layer_dims.size(); }
  /// F_{k} for k in [0, K]; F_0 is always 2.
  std::size_t node_dim(std::size_t k) const { return k == 0 ? kInputNodeDim : layer_dims[k - 1]; }
  /// (D + 1) · F_K
  std::size_t readout_input_dim() const;
  /// Explicit hidden widths, or one layer of max(16, (D+1)·F_K / 4).
  std::vector<std::size_t> resolved_readout_hidden() const;
  void validate() const;
};

/// The three weights of message-passing layer k.
struct GkrLayerWeights {
  Matrix mess;  // F_{k-1} × F_k, shared by peripheral and central messages
  Matrix peri;  // 2F_k × F_k
  Matrix cen;   // 2F_k × F_k
  Matrix mess_bias, peri_bias, cen_bias;  // 1 × F_k, empty unless use_bias
};

struct GkrParams {
  std::vector<GkrLayerWeights> layers;
  Mlp readout;
  std::uint64_t seed = 0;

  void collect(std::vector<Matrix*>& params, std::vector<std::string>& names);
};

GkrParams init_params(const GkrConfig& config, std::uint64_t seed);

/// Node features of the star graph at one message-passing step.
struct GraphState {
  Var central;      // 1 × F_k
  Var peripheral;   // D × F_k, row d is node d
  std::size_t layer = 0;
};

/// Peripheral node d = (fx[d], fy[d]); the central node per `init`.
GraphState build_graph(Tape& tape, Var fx, Var fy, const CentralInit& init);

/// One round of message generation, aggregation and update.
GraphState gkr_layer(Tape& tape, const GraphState& state, const GkrLayerWeights& weights,
                     PoolMode aggregator);

/// MLP over [h_c ‖ h_1 ‖ … ‖ h_D]; returns the pre-sigmoid score.
Var readout(Tape& tape, const GraphState& state, const Mlp& mlp);

/// Class-balanced cross-entropy over a batch of logits: the mean over positives
/// of -log p plus the mean over negatives of -log(1-p). A class absent from the
/// batch contributes nothing.
Var batch_loss(Tape& tape, std::span<const Var> logits, std::span<const int> labels);

class GkrNet final : public PairModel {
 public:
  GkrNet(GkrConfig config, std::uint64_t seed);
  GkrNet(GkrConfig config, GkrParams params);

  ModelKind kind() const override { return ModelKind::Gkr; }
  std::size_t dim() const override { return config_.dim; }
  Var logit(Tape& tape, Var fx, Var fy) const override;
  void collect(std::vector<Matrix*>& params, std::vector<std::string>& names) override;
  std::unique_ptr<PairModel> clone() const override;

  /// Final graph state after all K layers, for inspection.
  GraphState propagate(Tape& tape, Var fx, Var fy) const;
  /// sigmoid(logit) for one pair.
  double probability(std::span<const double> fx, std::span<const double> fy) const;

  const GkrConfig& config() const { return config_; }
  const GkrParams& params() const { return params_; }
  GkrParams& params() { return params_; }

 private:
  GkrConfig config_;
  GkrParams params_;
};

struct LabeledFeatures {
  std::span<const double> fx;
  std::span<const double> fy;
  int label = 0;
};

/// Records the balanced loss of `model` over a batch of feature pairs.
Var batch_loss(Tape& tape, const PairModel& model, std::span<const LabeledFeatures> batch);

}  // namespace gkr
