#include "gkr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "gkr/errors.hpp"
#include "gkr/kernels.hpp"

namespace gkr {

void TrainConfig::validate() const {
  if (precision != "f64") {
    throw UsageError("train: precision '" + precision + "' is not supported (only f64)");
  }
  if (batch_size == 0) throw UsageError("train: batch size must be positive");
  if (epochs < 0) throw UsageError("train: epochs must be >= 0");
  if (!(adam.lr >= 0.0) || !std::isfinite(adam.lr)) throw UsageError("train: lr must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw UsageError("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw UsageError("train: Adam epsilon must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("train: threshold must lie in (0, 1)");
  if (model.kind == ModelKind::Gkr) {
    GkrConfig probe = model.gkr;
    if (probe.dim == 0) probe.dim = 1;
    probe.validate();
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Confusion::accuracy() const {
  return total() == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(total());
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

bool Metrics::has_relations() const {
  for (Relation r : kTableRelations)
    if (by_relation.contains(r)) return true;
  return false;
}

Metrics& Metrics::operator+=(const Metrics& o) {
  overall += o.overall;
  for (const auto& [rel, c] : o.by_relation) by_relation[rel] += c;
  return *this;
}

namespace {

std::vector<Sample> resolve(std::span<const KinPair> pairs, const FeatureTable& features) {
  std::vector<Sample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({features.features(p.parent), features.features(p.child), p.label});
  return out;
}

bool all_finite(const BatchGradient& g) {
  if (!std::isfinite(g.loss)) return false;
  for (const auto& m : g.grads)
    for (double v : m.values())
      if (!std::isfinite(v)) return false;
  return true;
}

EpochStats summarize(int epoch, std::span<const double> logits, std::span<const Sample> samples,
                     double threshold) {
  double pos = 0.0, neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0, correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int y = samples[i].label;
    (y == 1 ? pos : neg) += bce_with_logit(logits[i], y);
    (y == 1 ? n_pos : n_neg) += 1;
    correct += (sigmoid(logits[i]) >= threshold) == (y == 1);
  }
  EpochStats s;
  s.epoch = epoch;
  if (n_pos > 0) s.loss += pos / static_cast<double>(n_pos);
  if (n_neg > 0) s.loss += neg / static_cast<double>(n_neg);
  s.accuracy = samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples.size());
  return s;
}

}  // namespace

TrainResult train(const TrainConfig& config, const PairSet& pairs, const FeatureTable& features) {
  config.validate();
  return train(config, make_model(config.model, config.encoder, features.dim(), config.seed), pairs,
               features);
}

TrainResult train(const TrainConfig& config, KinshipModel model, const PairSet& pairs,
                  const FeatureTable& features) {
  config.validate();
  if (pairs.positives.empty() && pairs.negatives.empty()) throw UsageError("train: no training pairs");
  if (model.input_dim() != features.dim()) {
    throw ShapeError("train: model takes " + std::to_string(model.input_dim()) +
                     " features, table has D = " + std::to_string(features.dim()));
  }

  std::vector<KinPair> current = pairs.all();
  std::vector<Sample> samples = resolve(current, features);
  std::vector<Matrix*> params = model.parameters();
  AdamState adam(std::vector<const Matrix*>(params.begin(), params.end()), config.adam);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 1));

  TrainResult result{std::move(model), {}};
  std::vector<std::size_t> order(samples.size());
  std::vector<double> logits(samples.size());
  std::vector<Sample> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.resample_negatives && epoch > 1) {
      PairSet redraw{pairs.positives,
                     build_negative_set(pairs.positives, derive_seed(config.seed, 1000 + epoch))};
      samples = resolve(redraw.all(), features);
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0, b = 1; start < order.size(); start += config.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);
      BatchGradient g = batch_gradient(result.model, batch);
      if (!all_finite(g)) {
        throw NumericError("train: loss or gradient is not finite at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b) + " (loss " + std::to_string(g.loss) + ")");
      }
      for (std::size_t i = start; i < end; ++i) logits[order[i]] = g.logits[i - start];
      adam.step(params, g.grads);
    }
    result.history.push_back(summarize(epoch, logits, samples, config.threshold));
  }
  return result;
}

Metrics evaluate(const KinshipModel& model, std::span<const KinPair> pairs,
                 const FeatureTable& features, double threshold) {
  const auto samples = resolve(pairs, features);
  const auto logits = batch_logits(model, samples);
  Metrics m;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool predicted = sigmoid(logits[i]) >= threshold;
    Confusion c;
    if (pairs[i].label == 1) {
      (predicted ? c.tp : c.fn) = 1;
    } else {
      (predicted ? c.fp : c.tn) = 1;
    }
    m.overall += c;
    m.by_relation[pairs[i].relation] += c;
  }
  return m;
}

void assert_no_leakage(std::span<const KinPair> train, std::span<const KinPair> test) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : train) seen.emplace(p.parent, p.child);
  for (const auto& p : test) {
    if (seen.contains({p.parent, p.child})) {
      throw std::logic_error("crossval: test pair (" + p.parent + ", " + p.child +
                             ") also appears in the training folds");
    }
  }
}

CrossvalReport crossval(const TrainConfig& config, const PairSet& pairs,
                        const FeatureTable& features) {
  config.validate();
  pairs.validate(&features);
  for (const auto& p : pairs.all()) {
    if (p.fold == 0) {
      throw UsageError("crossval: pair (" + p.parent + ", " + p.child +
                       ") has no fold; assign folds first (make_folds / --assign-folds)");
    }
  }
  const std::vector<int> folds = pairs.folds();
  if (folds.size() < 2) throw UsageError("crossval: need at least two folds");

  const auto t0 = std::chrono::steady_clock::now();
  CrossvalReport report;
  report.config = config;
  for (int f : folds) {
    PairSet train_set, test_set;
    for (const auto& p : pairs.positives) (p.fold == f ? test_set : train_set).positives.push_back(p);
    for (const auto& p : pairs.negatives) (p.fold == f ? test_set : train_set).negatives.push_back(p);
    const auto train_all = train_set.all();
    const auto test_all = test_set.all();
    assert_no_leakage(train_all, test_all);

    TrainConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, 100 + static_cast<std::uint64_t>(f));
    TrainResult trained = train(fold_config, train_set, features);

    FoldResult r;
    r.fold = f;
    r.train_size = train_all.size();
    r.test_size = test_all.size();
    r.test = evaluate(trained.model, test_all, features, config.threshold);
    r.history = std::move(trained.history);
    report.pooled += r.test;
    report.folds.push_back(std::move(r));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string_view short_label(ModelKind kind) {
  switch (kind) {
    case ModelKind::Gkr: return "GKR";
    case ModelKind::Cosine: return "Cos";
    case ModelKind::MlpFusion: return "MLP";
    case ModelKind::LinearMetric: return "Metric";
  }
  return "?";
}

AblationPreset parse_ablation_preset(std::string_view text) {
  if (text == "init") return AblationPreset::CentralInit;
  if (text == "aggregator") return AblationPreset::Aggregator;
  if (text == "mapping") return AblationPreset::Mapping;
  throw UsageError("ablate: unknown preset '" + std::string(text) +
                   "' (expected init, aggregator or mapping)");
}

std::string_view to_string(AblationPreset preset) {
  switch (preset) {
    case AblationPreset::CentralInit: return "init";
    case AblationPreset::Aggregator: return "aggregator";
    case AblationPreset::Mapping: return "mapping";
  }
  return "?";
}

AblationGrid ablation_grid(AblationPreset preset, const TrainConfig& base) {
  const GkrConfig& g = base.model.gkr;
  switch (preset) {
    case AblationPreset::CentralInit:
      return {"Central node initialization",
              {CentralInit::mean_pool(), CentralInit::max_pool(), CentralInit::constant(0.0),
               CentralInit::constant(0.5), CentralInit::constant(1.0)},
              {PoolMode::Max},
              {ModelKind::Gkr}};
    case AblationPreset::Aggregator:
      return {"Aggregator", {g.central_init}, {PoolMode::Mean, PoolMode::Max}, {ModelKind::Gkr}};
    case AblationPreset::Mapping:
      return {"Mapping function",
              {g.central_init},
              {g.aggregator},
              {ModelKind::Cosine, ModelKind::MlpFusion, ModelKind::Gkr}};
  }
  throw UsageError("ablate: unknown preset");
}

namespace {

std::string init_label(const CentralInit& init) {
  switch (init.kind) {
    case CentralInit::Kind::MeanPool: return "Mean";
    case CentralInit::Kind::MaxPool: return "Max";
    case CentralInit::Kind::Const: return init.label();
  }
  return "?";
}

}  // namespace

std::vector<AblationCell> expand_grid(const AblationGrid& grid, const TrainConfig& base) {
  if (grid.inits.empty() || grid.aggregators.empty() || grid.kinds.empty()) {
    throw UsageError("ablate: every grid axis needs at least one entry");
  }
  const bool vary_init = grid.inits.size() > 1;
  const bool vary_agg = grid.aggregators.size() > 1;
  const bool vary_kind = grid.kinds.size() > 1;
  std::vector<AblationCell> cells;
  for (ModelKind kind : grid.kinds) {
    const bool gkr = kind == ModelKind::Gkr;
    for (std::size_t i = 0; i < (gkr ? grid.inits.size() : 1); ++i) {
      for (std::size_t a = 0; a < (gkr ? grid.aggregators.size() : 1); ++a) {
        AblationCell cell{"", base};
        cell.config.model.kind = kind;
        std::vector<std::string> parts;
        if (vary_kind) parts.emplace_back(short_label(kind));
        if (gkr) {
          cell.config.model.gkr.central_init = grid.inits[i];
          cell.config.model.gkr.aggregator = grid.aggregators[a];
          if (vary_init) parts.push_back(init_label(grid.inits[i]));
          if (vary_agg) parts.push_back(grid.aggregators[a] == PoolMode::Max ? "Max" : "Mean");
        }
        if (parts.empty()) parts.emplace_back(short_label(kind));
        for (std::size_t k = 0; k < parts.size(); ++k) cell.label += (k ? " / " : "") + parts[k];
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

AblationTable ablate(const AblationGrid& grid, const TrainConfig& base, const PairSet& pairs,
                     const FeatureTable& features) {
  AblationTable table{grid.title, {}};
  for (auto& cell : expand_grid(grid, base)) {
    table.rows.push_back({cell.label, crossval(cell.config, pairs, features)});
  }
  return table;
}

}  // namespace gkr
