#include "gkr/adam.hpp"

#include <cmath>

#include "gkr/errors.hpp"

namespace gkr {

AdamState::AdamState(std::span<const Matrix* const> params, AdamOptions options)
    : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Matrix* p : params) {
    m_.emplace_back(p->rows(), p->cols());
    v_.emplace_back(p->rows(), p->cols());
  }
}

void AdamState::step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam: expected " + std::to_string(m_.size()) + " parameters, got " +
                     std::to_string(params.size()) + " params / " + std::to_string(grads.size()) +
                     " grads");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(m_[k]) || !grads[k].same_shape(m_[k])) {
      throw ShapeError("adam: parameter " + std::to_string(k) + " is " + params[k]->shape_str() +
                       ", gradient " + grads[k].shape_str() + ", state " + m_[k].shape_str());
    }
  }

  ++step_;
  const auto& o = options_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->values();
    auto g = grads[k].values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      p[i] -= o.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + o.epsilon);
    }
  }
}

}  // namespace gkr
