#include "gkr/model.hpp"

#include <random>

#include "gkr/errors.hpp"

namespace gkr {

KinshipModel::KinshipModel(std::unique_ptr<PairModel> head, std::optional<Mlp> encoder)
    : head_(std::move(head)), encoder_(std::move(encoder)) {
  if (!head_) throw UsageError("model: missing pair head");
  if (encoder_ && encoder_->output_dim() != head_->dim()) {
    throw ShapeError("model: encoder emits " + std::to_string(encoder_->output_dim()) +
                     " features, head expects D = " + std::to_string(head_->dim()));
  }
}

KinshipModel::KinshipModel(const KinshipModel& other)
    : head_(other.head_->clone()), encoder_(other.encoder_) {}

KinshipModel& KinshipModel::operator=(const KinshipModel& other) {
  if (this != &other) {
    head_ = other.head_->clone();
    encoder_ = other.encoder_;
  }
  return *this;
}

std::size_t KinshipModel::input_dim() const {
  return encoder_ ? encoder_->input_dim() : head_->dim();
}

Var KinshipModel::logit(Tape& tape, std::span<const double> fx, std::span<const double> fy) const {
  if (fx.size() != input_dim() || fy.size() != input_dim()) {
    throw ShapeError("model: features have dims " + std::to_string(fx.size()) + "/" +
                     std::to_string(fy.size()) + ", expected " + std::to_string(input_dim()));
  }
  Var x = tape.constant_row(fx);
  Var y = tape.constant_row(fy);
  if (encoder_) {
    x = encoder_->forward(tape, x);
    y = encoder_->forward(tape, y);
  }
  return head_->logit(tape, x, y);
}

double KinshipModel::probability(std::span<const double> fx, std::span<const double> fy) const {
  Tape tape;
  return sigmoid(tape.scalar(logit(tape, fx, fy)));
}

std::vector<Matrix*> KinshipModel::parameters() {
  std::vector<Matrix*> params;
  std::vector<std::string> names;
  if (encoder_) encoder_->collect("encoder", params, names);
  head_->collect(params, names);
  return params;
}

std::vector<const Matrix*> KinshipModel::parameters() const {
  auto mutable_params = const_cast<KinshipModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::vector<std::string> KinshipModel::parameter_names() const {
  auto* self = const_cast<KinshipModel*>(this);
  std::vector<Matrix*> params;
  std::vector<std::string> names;
  if (self->encoder_) self->encoder_->collect("encoder", params, names);
  self->head_->collect(params, names);
  return names;
}

KinshipModel make_model(const ModelSpec& spec, const EncoderSpec& encoder, std::size_t input_dim,
                        std::uint64_t seed) {
  if (input_dim == 0) throw UsageError("model: input dimension must be positive");
  std::optional<Mlp> enc;
  std::size_t dim = input_dim;
  if (encoder.kind == EncoderSpec::Kind::SharedMlp) {
    dim = encoder.output_dim == 0 ? input_dim : encoder.output_dim;
    std::vector<std::size_t> widths{input_dim};
    widths.insert(widths.end(), encoder.hidden.begin(), encoder.hidden.end());
    widths.push_back(dim);
    std::mt19937_64 rng(seed ^ 0x5bd1e995ull);
    enc = Mlp(widths, true, rng);
  }

  std::unique_ptr<PairModel> head;
  switch (spec.kind) {
    case ModelKind::Gkr: {
      GkrConfig cfg = spec.gkr;
      if (cfg.dim != 0 && cfg.dim != dim) {
        throw UsageError("model: gkr config says D = " + std::to_string(cfg.dim) +
                         " but the encoder emits " + std::to_string(dim));
      }
      cfg.dim = dim;
      head = std::make_unique<GkrNet>(std::move(cfg), seed);
      break;
    }
    case ModelKind::Cosine:
      head = std::make_unique<CosineModel>(dim);
      break;
    case ModelKind::MlpFusion:
      head = std::make_unique<MlpFusionModel>(dim, spec.baseline, seed);
      break;
    case ModelKind::LinearMetric:
      head = std::make_unique<LinearMetricModel>(dim, spec.baseline, seed);
      break;
  }
  return KinshipModel(std::move(head), std::move(enc));
}

}  // namespace gkr
