#include "gkr/kernels.hpp"

#include <exception>

#include "gkr/errors.hpp"
#include "gkr/gkr_net.hpp"

namespace gkr {

namespace {

void check_batch(std::span<const Sample> batch) {
  if (batch.empty()) throw UsageError("batch_gradient: empty batch");
  for (const auto& s : batch)
    if (s.label != 0 && s.label != 1) throw UsageError("batch_gradient: labels must be 0 or 1");
}

template <typename Body>
void parallel_for(std::size_t n, Body body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(gkr_kernel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

BatchGradient batch_gradient_reference(const KinshipModel& model, std::span<const Sample> batch) {
  check_batch(batch);
  Tape tape;
  std::vector<Var> logits;
  std::vector<int> labels;
  for (const auto& s : batch) {
    logits.push_back(model.logit(tape, s.fx, s.fy));
    labels.push_back(s.label);
  }
  const Var loss = batch_loss(tape, logits, labels);
  tape.backward(loss);

  BatchGradient out;
  out.loss = tape.scalar(loss);
  for (Var v : logits) out.logits.push_back(tape.scalar(v));
  for (const Matrix* p : model.parameters()) out.grads.push_back(tape.grad(*p));
  return out;
}

BatchGradient batch_gradient(const KinshipModel& model, std::span<const Sample> batch) {
  check_batch(batch);
  const auto params = model.parameters();
  std::size_t positives = 0;
  for (const auto& s : batch) positives += s.label == 1;
  const std::size_t negatives = batch.size() - positives;

  std::vector<double> losses(batch.size());
  std::vector<double> logits(batch.size());
  std::vector<std::vector<Matrix>> grads(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    const Sample& s = batch[i];
    Tape tape;
    const Var z = model.logit(tape, s.fx, s.fy);
    const Var term = tape.bce_with_logit(z, s.label);
    tape.backward(term);
    logits[i] = tape.scalar(z);
    losses[i] = tape.scalar(term);
    grads[i].reserve(params.size());
    for (const Matrix* p : params) grads[i].push_back(tape.grad(*p));
  });

  BatchGradient out;
  out.logits = std::move(logits);
  for (const Matrix* p : params) out.grads.emplace_back(p->rows(), p->cols());
  double pos_loss = 0.0, neg_loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const bool pos = batch[i].label == 1;
    const double w = 1.0 / static_cast<double>(pos ? positives : negatives);
    (pos ? pos_loss : neg_loss) += losses[i];
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto dst = out.grads[k].values();
      const auto src = grads[i][k].values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
    }
  }
  if (positives > 0) out.loss += pos_loss / static_cast<double>(positives);
  if (negatives > 0) out.loss += neg_loss / static_cast<double>(negatives);
  return out;
}

std::vector<double> batch_logits_reference(const KinshipModel& model,
                                           std::span<const Sample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Tape tape;
    out.push_back(tape.scalar(model.logit(tape, s.fx, s.fy)));
  }
  return out;
}

std::vector<double> batch_logits(const KinshipModel& model, std::span<const Sample> samples) {
  std::vector<double> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    Tape tape;
    out[i] = tape.scalar(model.logit(tape, samples[i].fx, samples[i].fy));
  });
  return out;
}

}  // namespace gkr
