#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gkr/baselines.hpp"
#include "gkr/gkr_net.hpp"
#include "gkr/mlp.hpp"
#include "gkr/pair_model.hpp"

namespace gkr {

/// Stand-in for the feature extractor g(·): identity, or an MLP applied with
/// shared weights to both members of a pair.
struct EncoderSpec {
  enum class Kind { Identity, SharedMlp };
  Kind kind = Kind::Identity;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 0;  // 0: same as the input dimension

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

/// Which mapping f(·) to build, plus its settings. `gkr.dim` is filled in
/// from the encoder output when the model is made.
struct ModelSpec {
  ModelKind kind = ModelKind::Gkr;
  GkrConfig gkr;
  BaselineSpec baseline;
};

/// Encoder g(·) followed by a pair head f(·).
class KinshipModel {
 public:
  KinshipModel(std::unique_ptr<PairModel> head, std::optional<Mlp> encoder = std::nullopt);
  KinshipModel(const KinshipModel& other);
  KinshipModel& operator=(const KinshipModel& other);
  KinshipModel(KinshipModel&&) noexcept = default;
  KinshipModel& operator=(KinshipModel&&) noexcept = default;

  /// Raw input features, before the encoder.
  std::size_t input_dim() const;
  Var logit(Tape& tape, std::span<const double> fx, std::span<const double> fy) const;
  double probability(std::span<const double> fx, std::span<const double> fy) const;

  /// Encoder tensors first, then the head's.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;

  PairModel& head() { return *head_; }
  const PairModel& head() const { return *head_; }
  const std::optional<Mlp>& encoder() const { return encoder_; }
  std::optional<Mlp>& encoder() { return encoder_; }

 private:
  std::unique_ptr<PairModel> head_;
  std::optional<Mlp> encoder_;
};

/// Builds and initialises a model for features of width `input_dim`.
KinshipModel make_model(const ModelSpec& model, const EncoderSpec& encoder, std::size_t input_dim,
                        std::uint64_t seed);

}  // namespace gkr
