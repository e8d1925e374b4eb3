#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gkr/matrix.hpp"
#include "gkr/tape.hpp"

namespace gkr {

enum class ModelKind { Gkr, Cosine, MlpFusion, LinearMetric };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// A mapping f(·) from a pair of D-dimensional features to a kinship logit.
class PairModel {
 public:
  virtual ~PairModel() = default;

  virtual ModelKind kind() const = 0;
  /// Expected feature dimension D of each pair member.
  virtual std::size_t dim() const = 0;
  /// Records the pre-sigmoid score for (fx, fy), each 1×D.
  virtual Var logit(Tape& tape, Var fx, Var fy) const = 0;
  /// Trainable tensors in a fixed order, paired with stable names.
  virtual void collect(std::vector<Matrix*>& params, std::vector<std::string>& names) = 0;
  virtual std::unique_ptr<PairModel> clone() const = 0;

  std::vector<Matrix*> parameters();
  std::vector<std::string> parameter_names();
};

}  // namespace gkr
