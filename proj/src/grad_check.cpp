#include "gkr/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "gkr/errors.hpp"

namespace gkr {

namespace {

struct Probe {
  double loss;
  std::vector<std::uint32_t> pattern;
};

Probe evaluate(const LossBuilder& loss) {
  Tape tape;
  const Var out = loss(tape);
  return {tape.scalar(out), tape.activation_pattern()};
}

void shift_all(std::span<Matrix* const> params, double width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-width, width);
  for (Matrix* p : params)
    for (double& v : p->values()) v += u(rng);
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, std::span<Matrix* const> params,
                           const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;

  for (;;) {
    Tape tape;
    const Var out = loss(tape);
    const double base = tape.scalar(out);
    const auto pattern = tape.activation_pattern();
    tape.backward(out);

    const Probe again = evaluate(loss);
    if (std::bit_cast<std::uint64_t>(again.loss) != std::bit_cast<std::uint64_t>(base) ||
        again.pattern != pattern) {
      throw NumericError("grad_check: forward is not deterministic (" + std::to_string(base) +
                         " vs " + std::to_string(again.loss) + ")");
    }

    report.max_rel_error = 0.0;
    report.coordinates = 0;
    bool crossed_kink = false;
    for (std::size_t k = 0; k < params.size() && !crossed_kink; ++k) {
      Matrix& p = *params[k];
      const Matrix analytic = tape.grad(p);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + options.step;
        const Probe plus = evaluate(loss);
        p[i] = saved - options.step;
        const Probe minus = evaluate(loss);
        p[i] = saved;
        if (plus.pattern != pattern || minus.pattern != pattern) {
          crossed_kink = true;
          break;
        }
        const double fd = (plus.loss - minus.loss) / (2.0 * options.step);
        const double ad = analytic[i];
        const double err = std::abs(ad - fd) / std::max(1.0, std::abs(ad) + std::abs(fd));
        ++report.coordinates;
        if (err > report.max_rel_error || std::isnan(err)) {
          report.max_rel_error = err;
          report.worst_param = k;
          report.worst_index = i;
        }
      }
    }

    if (!crossed_kink) break;
    if (report.kink_shifts >= options.max_kink_shifts) {
      throw NumericError("grad_check: still straddling a kink after " +
                         std::to_string(report.kink_shifts) + " shifts");
    }
    ++report.kink_shifts;
    shift_all(params, options.kink_shift, rng);
  }

  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace gkr
