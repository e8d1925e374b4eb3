#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gkr/adam.hpp"
#include "gkr/data.hpp"
#include "gkr/model.hpp"

namespace gkr {

struct TrainConfig {
  ModelSpec model;
  EncoderSpec encoder;
  AdamOptions adam;
  std::size_t batch_size = 16;
  int epochs = 100;
  std::uint64_t seed = 1;
  /// Redraw the balanced negatives from the training positives every epoch.
  bool resample_negatives = false;
  /// Only "f64" is supported.
  std::string precision = "f64";
  /// A pair is predicted kin when its probability is >= threshold.
  double threshold = 0.5;

  void validate() const;
};

/// Independent stream `stream` of a base seed (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct EpochStats {
  int epoch = 0;
  /// Class-balanced loss and accuracy over the epoch's training pairs, each
  /// scored with the parameters in force when its batch was processed.
  double loss = 0.0;
  double accuracy = 0.0;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  std::size_t correct() const { return tp + tn; }
  /// 0 for an empty set.
  double accuracy() const;
  Confusion& operator+=(const Confusion& o);
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Metrics {
  Confusion overall;
  std::map<Relation, Confusion> by_relation;

  double accuracy() const { return overall.accuracy(); }
  /// Only F-S, F-D, M-S, M-D pairs: the relation-tagged part of the set.
  bool has_relations() const;
  Metrics& operator+=(const Metrics& o);
};

struct TrainResult {
  KinshipModel model;
  std::vector<EpochStats> history;
};

/// Mini-batch Adam on the class-balanced loss. Throws NumericError naming the
/// epoch and batch when the loss or a gradient stops being finite.
TrainResult train(const TrainConfig& config, const PairSet& pairs, const FeatureTable& features);
/// Continues training an existing model.
TrainResult train(const TrainConfig& config, KinshipModel model, const PairSet& pairs,
                  const FeatureTable& features);

Metrics evaluate(const KinshipModel& model, std::span<const KinPair> pairs,
                 const FeatureTable& features, double threshold = 0.5);

struct FoldResult {
  int fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  Metrics test;
  std::vector<EpochStats> history;
};

struct CrossvalReport {
  TrainConfig config;
  std::vector<FoldResult> folds;
  /// Pooled over all test folds, which equals the mean of fold accuracies
  /// weighted by fold test size.
  Metrics pooled;
  double seconds = 0.0;

  double mean_accuracy() const { return pooled.accuracy(); }
};

/// Leave-one-fold-out training and testing over the folds present in `pairs`.
CrossvalReport crossval(const TrainConfig& config, const PairSet& pairs,
                        const FeatureTable& features);

/// Throws std::logic_error if a test pair appears in the training pairs.
void assert_no_leakage(std::span<const KinPair> train, std::span<const KinPair> test);

/// Cartesian grid of GKR central inits × aggregators × mapping kinds.
/// Baselines ignore the first two axes and appear once each.
struct AblationGrid {
  std::string title;
  std::vector<CentralInit> inits;
  std::vector<PoolMode> aggregators;
  std::vector<ModelKind> kinds;
};

enum class AblationPreset { CentralInit, Aggregator, Mapping };

/// "init", "aggregator" or "mapping".
AblationPreset parse_ablation_preset(std::string_view text);
std::string_view to_string(AblationPreset preset);
/// Mean, Max, 0, 0.5, 1 | Mean, Max | Cos, MLP, GKR.
AblationGrid ablation_grid(AblationPreset preset, const TrainConfig& base);

struct AblationCell {
  std::string label;
  TrainConfig config;
};

std::vector<AblationCell> expand_grid(const AblationGrid& grid, const TrainConfig& base);

struct AblationRow {
  std::string label;
  CrossvalReport report;
};

struct AblationTable {
  std::string title;
  std::vector<AblationRow> rows;
};

AblationTable ablate(const AblationGrid& grid, const TrainConfig& base, const PairSet& pairs,
                     const FeatureTable& features);

/// Short row label of a mapping: Cos, MLP, Metric or GKR.
std::string_view short_label(ModelKind kind);

}  // namespace gkr
