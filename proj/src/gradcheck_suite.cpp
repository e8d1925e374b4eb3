#include "gkr/gradcheck_suite.hpp"

#include <charconv>
#include <random>

#include "gkr/errors.hpp"
#include "gkr/kernels.hpp"
#include "gkr/trainer.hpp"

namespace gkr {

std::vector<ModelVariant> gkr_variants(const GkrConfig& base) {
  const CentralInit inits[] = {CentralInit::mean_pool(), CentralInit::max_pool(),
                               CentralInit::constant(0.0), CentralInit::constant(0.5),
                               CentralInit::constant(1.0)};
  std::vector<ModelVariant> out;
  for (const auto& init : inits) {
    for (PoolMode agg : {PoolMode::Max, PoolMode::Mean}) {
      ModelVariant v;
      v.label = "init=" + init.label() + " aggregator=" + std::string(to_string(agg));
      v.spec.kind = ModelKind::Gkr;
      v.spec.gkr = base;
      v.spec.gkr.central_init = init;
      v.spec.gkr.aggregator = agg;
      out.push_back(std::move(v));
    }
  }
  return out;
}

GkrConfig parse_dims(const std::string& text) {
  std::vector<std::size_t> v;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view cell = rest.substr(0, comma);
    std::size_t x = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || x == 0) {
      throw UsageError("--dims: '" + std::string(cell) + "' is not a positive integer");
    }
    v.push_back(x);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (v.size() < 3) throw UsageError("--dims: expected D,F0,F1[,...,FK], got '" + text + "'");
  if (v[1] != kInputNodeDim) {
    throw UsageError("--dims: F0 must be 2 (each node starts as a value pair), got " +
                     std::to_string(v[1]));
  }
  GkrConfig c;
  c.dim = v[0];
  c.layer_dims.assign(v.begin() + 2, v.end());
  c.validate();
  return c;
}

GradCheckReport check_model_gradients(const ModelSpec& spec, std::size_t dim, std::size_t batch,
                                      std::uint64_t seed, const GradCheckOptions& options) {
  if (batch == 0) throw UsageError("gradcheck: batch must be positive");
  KinshipModel model = make_model(spec, EncoderSpec{}, dim, derive_seed(seed, 0));

  std::mt19937_64 rng(derive_seed(seed, 1));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> features(2 * batch, std::vector<double>(dim));
  for (auto& f : features)
    for (double& x : f) x = u(rng);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < batch; ++i) {
    samples.push_back({features[2 * i], features[2 * i + 1], static_cast<int>(i % 2 == 0)});
  }

  const LossBuilder loss = [&](Tape& tape) {
    std::vector<Var> logits;
    std::vector<int> labels;
    for (const auto& s : samples) {
      logits.push_back(model.logit(tape, s.fx, s.fy));
      labels.push_back(s.label);
    }
    return batch_loss(tape, logits, labels);
  };
  GradCheckOptions opts = options;
  opts.seed = derive_seed(seed, 2);
  return grad_check(loss, model.parameters(), opts);
}

}  // namespace gkr
