#include "gkr/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <utility>

#include <CLI11.hpp>

#include "gkr/checkpoint.hpp"
#include "gkr/config.hpp"
#include "gkr/errors.hpp"
#include "gkr/gradcheck_suite.hpp"
#include "gkr/report.hpp"
#include "gkr/trainer.hpp"

namespace gkr::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFeatureSchema =
    "features CSV: header id,role,f0,...,f{D-1}; one row per image; role is parent or child;\n"
    "  ids unique; values are decimal reals written in shortest round-trip form.\n";
constexpr const char* kPairSchema =
    "pairs CSV: header parent_id,child_id,label,fold,relation; label 1 = kin, 0 = non-kin;\n"
    "  fold in 1..5 (omit the column and pass --assign-folds to generate folds);\n"
    "  relation one of F-S, F-D, M-S, M-D, synthetic. Negatives must equal positives in\n"
    "  number, never pair a parent with its own child, and share their parent's fold.\n";
constexpr const char* kConfigSchema =
    "config JSON (schema_version 1; every key optional, defaults < config < flags):\n"
    "  model:    kind, gkr{layer_dims, central_init, aggregator, readout_hidden, use_bias},\n"
    "            baseline{mlp_hidden, metric_rank, use_bias}\n"
    "  encoder:  kind (identity|shared_mlp), hidden, output_dim\n"
    "  training: lr, beta1, beta2, epsilon, batch_size, epochs, seed, resample_negatives,\n"
    "            precision (f64), threshold\n"
    "  data:     source (synthetic|files), synthetic{families, genome_dim, dim, rho, sigma,\n"
    "            mixing, flip_fraction, folds, tag_relations, seed}, features, pairs,\n"
    "            assign_folds, folds, fold_seed. Relative paths resolve against the config file.\n";
constexpr const char* kOutputNote =
    "The output directory defaults to $GKR_OUT_DIR, else the current directory.\n";

bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

/// Synthetic generator flags, shared by synth-gen and the training commands.
struct SynthFlags {
  SynthSpec spec;
  CLI::Option *families = nullptr, *genome = nullptr, *dim = nullptr, *rho = nullptr,
              *sigma = nullptr, *mixing = nullptr, *flip = nullptr, *folds = nullptr,
              *no_rel = nullptr;
  bool no_relations = false;

  void add(CLI::App* app) {
    families = app->add_option("--families", spec.families, "Synthetic: number of families")
                   ->capture_default_str();
    genome = app->add_option("--genome-dim", spec.genome_dim, "Synthetic: genome dimension G")
                 ->capture_default_str();
    dim = app->add_option("--dim", spec.dim, "Synthetic: observed feature dimension D")
              ->capture_default_str();
    rho = app->add_option("--rho", spec.rho, "Synthetic: heritability in [0, 1]")
              ->capture_default_str();
    sigma = app->add_option("--sigma", spec.sigma, "Synthetic: expression noise scale")
                ->capture_default_str();
    mixing = app->add_option("--mixing", spec.mixing, "Synthetic: gene cross-talk in the maps")
                 ->capture_default_str();
    flip = app->add_option("--flip-fraction", spec.flip_fraction,
                           "Synthetic: share of traits expressed inversely in the child")
               ->capture_default_str();
    folds = app->add_option("--synth-folds", spec.folds, "Synthetic: number of folds")
                ->capture_default_str();
    no_rel = app->add_flag("--no-relations", no_relations,
                           "Synthetic: tag pairs 'synthetic' instead of F-S/F-D/M-S/M-D");
  }

  void apply(SynthSpec& s) const {
    if (given(families)) s.families = spec.families;
    if (given(genome)) s.genome_dim = spec.genome_dim;
    if (given(dim)) s.dim = spec.dim;
    if (given(rho)) s.rho = spec.rho;
    if (given(sigma)) s.sigma = spec.sigma;
    if (given(mixing)) s.mixing = spec.mixing;
    if (given(flip)) s.flip_fraction = spec.flip_fraction;
    if (given(folds)) s.folds = spec.folds;
    if (given(no_rel)) s.tag_relations = !no_relations;
  }

  bool any() const {
    for (const CLI::Option* o : {families, genome, dim, rho, sigma, mixing, flip, folds, no_rel})
      if (given(o)) return true;
    return false;
  }
};

/// Model, training and data flags layered over defaults and an optional config.
struct RunFlags {
  RunConfig defaults = default_run_config();

  std::string config_path;
  std::string model = "gkr", init = "0.5", aggregator = "max", encoder = "identity";
  std::vector<std::size_t> layers{16, 4}, readout_hidden, mlp_hidden, encoder_hidden;
  std::size_t metric_rank = 0, encoder_dim = 0, batch_size = 16;
  double lr = 0.0005, threshold = 0.5;
  int epochs = 100;
  std::uint64_t seed = 1;
  bool bias = false, resample = false, assign_folds = false;
  std::string precision = "f64", features, pairs;
  int folds = 5;
  SynthFlags synth;

  CLI::Option *config_opt = nullptr, *model_opt = nullptr, *init_opt = nullptr,
              *agg_opt = nullptr, *layers_opt = nullptr, *readout_opt = nullptr,
              *mlp_opt = nullptr, *rank_opt = nullptr, *bias_opt = nullptr, *enc_opt = nullptr,
              *enc_hidden_opt = nullptr, *enc_dim_opt = nullptr, *lr_opt = nullptr,
              *batch_opt = nullptr, *epochs_opt = nullptr, *seed_opt = nullptr,
              *resample_opt = nullptr, *precision_opt = nullptr, *threshold_opt = nullptr,
              *features_opt = nullptr, *pairs_opt = nullptr, *assign_opt = nullptr,
              *folds_opt = nullptr;

  void add_config(CLI::App* app) {
    config_opt = app->add_option("-c,--config", config_path, "Run config JSON (see below)");
  }

  void add_model(CLI::App* app) {
    model_opt = app->add_option("--model", model, "Mapping f: gkr, cosine, mlp or metric")
                    ->capture_default_str();
    layers_opt = app->add_option("--layers", layers, "GKR layer widths F1,...,FK")
                     ->delimiter(',')
                     ->capture_default_str();
    init_opt = app->add_option("--init", init, "GKR central node init: mean, max or a constant")
                   ->capture_default_str();
    agg_opt = app->add_option("--aggregator", aggregator, "GKR message aggregator: max or mean")
                  ->capture_default_str();
    readout_opt = app->add_option("--readout-hidden", readout_hidden,
                                  "GKR readout hidden widths (default max(16, (D+1)*FK/4))")
                      ->delimiter(',');
    mlp_opt = app->add_option("--mlp-hidden", mlp_hidden,
                              "MLP-fusion hidden widths (default one layer of width D)")
                  ->delimiter(',');
    rank_opt = app->add_option("--metric-rank", metric_rank,
                               "Linear-metric projection rank r <= D (0 = D)")
                   ->capture_default_str();
    bias_opt = app->add_flag("--bias", bias, "Add bias terms to GKR and baseline layers");
    enc_opt = app->add_option("--encoder", encoder, "Feature encoder: identity or shared_mlp")
                  ->capture_default_str();
    enc_hidden_opt = app->add_option("--encoder-hidden", encoder_hidden,
                                     "Shared encoder hidden widths")
                         ->delimiter(',');
    enc_dim_opt = app->add_option("--encoder-dim", encoder_dim,
                                  "Shared encoder output dimension (0 = input D)")
                      ->capture_default_str();
  }

  void add_training(CLI::App* app) {
    lr_opt = app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    batch_opt = app->add_option("--batch-size", batch_size, "Mini-batch size")
                    ->capture_default_str();
    epochs_opt = app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    resample_opt = app->add_flag("--resample-negatives", resample,
                                 "Redraw the balanced negatives every epoch");
    precision_opt = app->add_option("--precision", precision, "Arithmetic precision (f64 only)")
                        ->capture_default_str();
    threshold_opt = app->add_option("--threshold", threshold,
                                    "Predict kin when probability >= threshold")
                        ->capture_default_str();
  }

  void add_seed(CLI::App* app) {
    seed_opt = app->add_option("--seed", seed,
                               "Training seed; also the synthetic data seed for synthetic data")
                   ->capture_default_str();
  }

  void add_data(CLI::App* app) {
    features_opt = app->add_option("--features", features, "Features CSV (switches to file data)");
    pairs_opt = app->add_option("--pairs", pairs, "Pairs CSV (switches to file data)");
    assign_opt = app->add_flag("--assign-folds", assign_folds,
                               "Generate folds when the pairs CSV has no fold column");
    folds_opt = app->add_option("--folds", folds, "Number of folds for --assign-folds")
                    ->capture_default_str();
    synth.add(app);
  }

  RunConfig resolve() const {
    RunConfig c = given(config_opt) ? load_run_config(config_path, defaults) : defaults;
    TrainConfig& t = c.train;
    if (given(model_opt)) t.model.kind = parse_model_kind(model);
    if (given(layers_opt)) t.model.gkr.layer_dims = layers;
    if (given(init_opt)) t.model.gkr.central_init = CentralInit::parse(init);
    if (given(agg_opt)) t.model.gkr.aggregator = parse_pool_mode(aggregator);
    if (given(readout_opt)) t.model.gkr.readout_hidden = readout_hidden;
    if (given(mlp_opt)) t.model.baseline.mlp_hidden = mlp_hidden;
    if (given(rank_opt)) t.model.baseline.metric_rank = metric_rank;
    if (given(bias_opt)) t.model.gkr.use_bias = t.model.baseline.use_bias = bias;
    if (given(enc_opt)) {
      if (encoder == "identity") {
        t.encoder.kind = EncoderSpec::Kind::Identity;
      } else if (encoder == "shared_mlp") {
        t.encoder.kind = EncoderSpec::Kind::SharedMlp;
      } else {
        throw UsageError("--encoder: expected identity or shared_mlp, got '" + encoder + "'");
      }
    }
    if (given(enc_hidden_opt)) t.encoder.hidden = encoder_hidden;
    if (given(enc_dim_opt)) t.encoder.output_dim = encoder_dim;
    if (given(lr_opt)) t.adam.lr = lr;
    if (given(batch_opt)) t.batch_size = batch_size;
    if (given(epochs_opt)) t.epochs = epochs;
    if (given(resample_opt)) t.resample_negatives = resample;
    if (given(precision_opt)) t.precision = precision;
    if (given(threshold_opt)) t.threshold = threshold;

    DataSource& d = c.data;
    if (given(features_opt) || given(pairs_opt)) {
      d.kind = DataSource::Kind::Files;
      if (given(features_opt)) d.features = features;
      if (given(pairs_opt)) d.pairs = pairs;
    }
    if (given(assign_opt)) d.assign_folds = assign_folds;
    if (given(folds_opt)) d.folds = folds;
    synth.apply(d.synthetic);
    if (given(seed_opt)) {
      t.seed = seed;
      d.synthetic.seed = seed;
    }
    if (d.kind == DataSource::Kind::Files && synth.any()) {
      throw UsageError("synthetic flags (--families, --rho, ...) conflict with file data");
    }
    t.validate();
    if (t.encoder.kind == EncoderSpec::Kind::Identity &&
        (!t.encoder.hidden.empty() || t.encoder.output_dim != 0)) {
      throw UsageError("--encoder-hidden/--encoder-dim need --encoder shared_mlp");
    }
    return c;
  }
};

fs::path output_dir(const std::string& flag) {
  fs::path dir = flag.empty() ? fs::path(".") : fs::path(flag);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw UsageError("cannot write '" + path.string() + "'");
}

CLI::Option* add_out(CLI::App* app, std::string& out) {
  return app->add_option("-o,--out", out, "Output directory")->envname("GKR_OUT_DIR");
}

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

/// Pairs whose fold is (or is not) `fold`; 0 keeps everything.
PairSet select_folds(const PairSet& pairs, int fold, bool keep) {
  if (fold == 0) return pairs;
  PairSet out;
  for (const auto& p : pairs.positives)
    if ((p.fold == fold) == keep) out.positives.push_back(p);
  for (const auto& p : pairs.negatives)
    if ((p.fold == fold) == keep) out.negatives.push_back(p);
  if (out.positives.empty() && out.negatives.empty()) {
    throw UsageError("fold " + std::to_string(fold) + (keep ? " has no pairs" : " holds every pair"));
  }
  return out;
}

std::string schemas() { return std::string("\n") + kFeatureSchema + kPairSchema + kConfigSchema + kOutputNote; }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-based kinship reasoning: train and evaluate pair verifiers.", "gkr"};
  app.require_subcommand(1);
  app.fallthrough(false);
  app.footer("Exit status: 0 success, 1 invalid input, 2 numeric failure (NaN loss, failed gradcheck).");

  bool verbose = false;
  std::function<void()> action;

  // synth-gen
  auto* synth_cmd = app.add_subcommand("synth-gen", "Generate the synthetic heritable-trait task");
  SynthFlags synth_flags;
  std::uint64_t synth_seed = 1;
  std::string synth_out, synth_config;
  auto* synth_config_opt = synth_cmd->add_option(
      "-c,--config", synth_config, "Run config JSON; its data.synthetic block is the base");
  synth_flags.add(synth_cmd);
  auto* synth_seed_opt = synth_cmd->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  add_out(synth_cmd, synth_out);
  synth_cmd->footer(std::string("\nWrites features.csv and pairs.csv into the output directory.\n") +
                    kFeatureSchema + kPairSchema + kOutputNote);
  synth_cmd->callback([&] {
    action = [&] {
      SynthSpec spec = given(synth_config_opt)
                           ? load_run_config(synth_config).data.synthetic
                           : default_run_config().data.synthetic;
      synth_flags.apply(spec);
      if (given(synth_seed_opt)) spec.seed = synth_seed;
      spec.validate();
      const fs::path dir = output_dir(synth_out);
      const SynthData data = gen_synthetic(spec);
      write_features(dir / "features.csv", data.features);
      write_pairs(dir / "pairs.csv", data.pairs);
      const FeatureTable back = read_features(dir / "features.csv");
      const PairSet back_pairs = read_pairs(dir / "pairs.csv", back);
      if (!(back == data.features) || !(back_pairs == data.pairs)) {
        throw UsageError("synth-gen: files did not read back identically");
      }
      out << "wrote " << (dir / "features.csv").string() << " (" << data.features.size()
          << " rows, D = " << data.features.dim() << ") and " << (dir / "pairs.csv").string()
          << " (" << data.pairs.positives.size() << " kin + " << data.pairs.negatives.size()
          << " non-kin pairs, " << data.pairs.folds().size() << " folds)\n";
    };
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model on all pairs (or all but one fold)");
  RunFlags train_flags;
  std::string train_out;
  int exclude_fold = 0;
  train_flags.add_config(train_cmd);
  train_flags.add_model(train_cmd);
  train_flags.add_training(train_cmd);
  train_flags.add_seed(train_cmd);
  train_flags.add_data(train_cmd);
  train_cmd->add_option("--exclude-fold", exclude_fold, "Hold out this fold (0 = train on all)")
      ->capture_default_str();
  add_out(train_cmd, train_out);
  train_cmd->add_flag("-v,--verbose", verbose, "Print per-epoch progress and timing to stderr");
  train_cmd->footer("\nWrites model.json (checkpoint) and train_report.json.\n" + schemas());
  train_cmd->callback([&] {
    action = [&] {
      const RunConfig cfg = train_flags.resolve();
      const fs::path dir = output_dir(train_out);
      const LoadedData data = load_data(cfg.data);
      const PairSet train_set = select_folds(data.pairs, exclude_fold, false);
      const Timer timer;
      const TrainResult result = train(cfg.train, train_set, data.features);
      const auto all = train_set.all();
      const Metrics m = evaluate(result.model, all, data.features, cfg.train.threshold);
      save_checkpoint(dir / "model.json", result.model, cfg.train);
      write_text(dir / "train_report.json", dump(train_report(result, m, cfg)));
      if (verbose) {
        for (const auto& e : result.history)
          err << "epoch " << e.epoch << ": loss " << fmt("%.6f", e.loss) << " accuracy "
              << fmt("%.4f", e.accuracy) << '\n';
        err << "trained in " << fmt("%.2f", timer.seconds()) << " s\n";
      }
      if (!result.history.empty()) {
        out << "final epoch " << result.history.back().epoch << ": loss "
            << fmt("%.6f", result.history.back().loss) << '\n';
      }
      out << render_table("Training accuracy (%)", {{std::string(short_label(cfg.train.model.kind)), m}});
      out << "wrote " << (dir / "model.json").string() << " and "
          << (dir / "train_report.json").string() << '\n';
    };
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a pair set");
  RunFlags eval_flags;
  std::string eval_checkpoint, eval_out;
  int eval_fold = 0;
  double eval_threshold = 0.5;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint written by train")->required();
  eval_flags.add_config(eval_cmd);
  eval_flags.add_seed(eval_cmd);
  eval_flags.add_data(eval_cmd);
  auto* eval_threshold_opt =
      eval_cmd->add_option("--threshold", eval_threshold, "Predict kin when probability >= threshold")
          ->capture_default_str();
  eval_cmd->add_option("--fold", eval_fold, "Evaluate only this fold (0 = all pairs)")
      ->capture_default_str();
  add_out(eval_cmd, eval_out);
  eval_cmd->footer("\nWrites eval_report.json. The checkpoint fixes the model; data flags pick the pairs.\n" +
                   schemas());
  eval_cmd->callback([&] {
    action = [&] {
      const RunConfig cfg = eval_flags.resolve();
      const double threshold = given(eval_threshold_opt) ? eval_threshold : cfg.train.threshold;
      if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("--threshold must lie in (0, 1)");
      const Checkpoint ck = load_checkpoint(eval_checkpoint);
      const fs::path dir = output_dir(eval_out);
      const LoadedData data = load_data(cfg.data);
      const auto pairs = select_folds(data.pairs, eval_fold, true).all();
      const Metrics m = evaluate(ck.model, pairs, data.features, threshold);
      write_text(dir / "eval_report.json", dump(eval_report(m, threshold)));
      out << render_table("Verification accuracy (%)",
                          {{std::string(short_label(ck.model.head().kind())), m}});
      out << "tp " << m.overall.tp << "  fp " << m.overall.fp << "  tn " << m.overall.tn << "  fn "
          << m.overall.fn << '\n';
    };
  });

  // crossval
  auto* cv_cmd = app.add_subcommand("crossval", "Leave-one-fold-out cross-validation");
  RunFlags cv_flags;
  std::string cv_out;
  cv_flags.add_config(cv_cmd);
  cv_flags.add_model(cv_cmd);
  cv_flags.add_training(cv_cmd);
  cv_flags.add_seed(cv_cmd);
  cv_flags.add_data(cv_cmd);
  add_out(cv_cmd, cv_out);
  cv_cmd->add_flag("-v,--verbose", verbose, "Print timing to stderr");
  cv_cmd->footer("\nWrites report.json and report.txt (columns F-S, F-D, M-S, M-D, Mean when\n"
                 "relation tags are present). The JSON carries no timings.\n" +
                 schemas());
  cv_cmd->callback([&] {
    action = [&] {
      const RunConfig cfg = cv_flags.resolve();
      const fs::path dir = output_dir(cv_out);
      const LoadedData data = load_data(cfg.data);
      const CrossvalReport report = crossval(cfg.train, data.pairs, data.features);
      const std::string table = render_crossval(report, std::string(short_label(cfg.train.model.kind)));
      write_text(dir / "report.json", dump(crossval_report(report, cfg)));
      write_text(dir / "report.txt", table);
      out << table;
      if (verbose) err << "cross-validation took " << fmt("%.2f", report.seconds) << " s\n";
    };
  });

  // ablate
  auto* ab_cmd = app.add_subcommand("ablate", "Cross-validate a grid of model variants");
  RunFlags ab_flags;
  std::string ab_out, preset = "mapping";
  std::vector<std::string> ab_inits, ab_aggs, ab_kinds;
  ab_flags.add_config(ab_cmd);
  ab_flags.add_model(ab_cmd);
  ab_flags.add_training(ab_cmd);
  ab_flags.add_seed(ab_cmd);
  ab_flags.add_data(ab_cmd);
  ab_cmd->add_option("--preset", preset,
                     "init (Mean, Max, 0, 0.5, 1), aggregator (Mean, Max) or mapping (Cos, MLP, GKR)")
      ->capture_default_str();
  auto* inits_opt = ab_cmd->add_option("--inits", ab_inits, "Override the central-init axis")->delimiter(',');
  auto* aggs_opt = ab_cmd->add_option("--aggregators", ab_aggs, "Override the aggregator axis")->delimiter(',');
  auto* kinds_opt = ab_cmd->add_option("--kinds", ab_kinds, "Override the mapping axis")->delimiter(',');
  add_out(ab_cmd, ab_out);
  ab_cmd->add_flag("-v,--verbose", verbose, "Print timing to stderr");
  ab_cmd->footer("\nWrites ablation.json and ablation.txt, one row per grid cell.\n" + schemas());
  ab_cmd->callback([&] {
    action = [&] {
      const RunConfig cfg = ab_flags.resolve();
      AblationGrid grid = ablation_grid(parse_ablation_preset(preset), cfg.train);
      if (given(inits_opt)) {
        grid.inits.clear();
        for (const auto& s : ab_inits) grid.inits.push_back(CentralInit::parse(s));
      }
      if (given(aggs_opt)) {
        grid.aggregators.clear();
        for (const auto& s : ab_aggs) grid.aggregators.push_back(parse_pool_mode(s));
      }
      if (given(kinds_opt)) {
        grid.kinds.clear();
        for (const auto& s : ab_kinds) grid.kinds.push_back(parse_model_kind(s));
      }
      expand_grid(grid, cfg.train);
      const fs::path dir = output_dir(ab_out);
      const LoadedData data = load_data(cfg.data);
      const Timer timer;
      const AblationTable table = ablate(grid, cfg.train, data.pairs, data.features);
      const std::string text = render_ablation(table);
      write_text(dir / "ablation.json", dump(ablation_report(table, cfg)));
      write_text(dir / "ablation.txt", text);
      out << text;
      if (verbose) err << "ablation took " << fmt("%.2f", timer.seconds()) << " s\n";
    };
  });

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the loss gradients");
  std::uint64_t gc_seed = 1;
  int gc_seeds = 1;
  std::string gc_dims = "4,2,3,2", gc_variant = "all", gc_model = "gkr";
  std::size_t gc_batch = 4;
  double gc_tol = 1e-5;
  gc_cmd->add_option("--seed", gc_seed, "First seed")->capture_default_str();
  gc_cmd->add_option("--seeds", gc_seeds, "Number of consecutive seeds")->capture_default_str();
  gc_cmd->add_option("--dims", gc_dims, "D,F0,F1,...,FK with F0 = 2")->capture_default_str();
  gc_cmd->add_option("--model", gc_model, "gkr, cosine, mlp or metric")->capture_default_str();
  gc_cmd->add_option("--variant", gc_variant,
                     "GKR variant: all, or <init>/<aggregator> such as 0.5/max")
      ->capture_default_str();
  gc_cmd->add_option("--batch", gc_batch, "Pairs per checked batch")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc_tol, "Largest accepted relative error")->capture_default_str();
  gc_cmd->footer(
      "\nRelative error per coordinate is |g_ad - g_fd| / max(1, |g_ad| + |g_fd|) with central\n"
      "differences of step 1e-5. Exit 0 when every check is below the tolerance, else 2.\n");
  gc_cmd->callback([&] {
    action = [&] {
      if (gc_seeds < 1) throw UsageError("--seeds must be >= 1");
      if (!(gc_tol > 0.0)) throw UsageError("--tolerance must be positive");
      const GkrConfig base = parse_dims(gc_dims);
      const ModelKind kind = parse_model_kind(gc_model);
      std::vector<ModelVariant> variants;
      if (kind == ModelKind::Gkr) {
        for (auto& v : gkr_variants(base)) {
          const std::string key = v.spec.gkr.central_init.label() + "/" +
                                  std::string(to_string(v.spec.gkr.aggregator));
          if (gc_variant == "all" || gc_variant == key) variants.push_back(std::move(v));
        }
        if (variants.empty()) throw UsageError("--variant: no GKR variant '" + gc_variant + "'");
      } else {
        if (gc_variant != "all") throw UsageError("--variant applies to --model gkr only");
        ModelVariant v;
        v.label = std::string(to_string(kind));
        v.spec.kind = kind;
        variants.push_back(v);
      }
      double worst = 0.0;
      std::size_t checks = 0;
      for (int s = 0; s < gc_seeds; ++s) {
        const std::uint64_t seed = gc_seed + static_cast<std::uint64_t>(s);
        for (const auto& v : variants) {
          GradCheckOptions opts;
          opts.tolerance = gc_tol;
          const GradCheckReport r = check_model_gradients(v.spec, base.dim, gc_batch, seed, opts);
          worst = std::max(worst, r.max_rel_error);
          ++checks;
          out << "seed " << seed << "  " << v.label << "  max_rel_error "
              << fmt("%.3e", r.max_rel_error) << "  coordinates " << r.coordinates
              << "  kink_shifts " << r.kink_shifts << (r.max_rel_error < gc_tol ? "  ok" : "  FAIL")
              << '\n';
        }
      }
      out << "max relative error " << fmt("%.3e", worst) << " over " << checks << " checks\n";
      if (!(worst < gc_tol)) {
        throw NumericError("gradcheck: max relative error " + fmt("%.3e", worst) +
                           " is not below " + fmt("%.1e", gc_tol));
      }
    };
  });

  // inspect
  auto* in_cmd = app.add_subcommand("inspect", "List parameter names and shapes");
  RunFlags in_flags;
  std::string in_checkpoint, in_dims;
  std::size_t in_dim = 16;
  in_cmd->add_option("--checkpoint", in_checkpoint, "Inspect a saved checkpoint");
  in_flags.add_config(in_cmd);
  in_flags.add_model(in_cmd);
  in_flags.add_seed(in_cmd);
  auto* in_dim_opt = in_cmd->add_option("--input-dim", in_dim, "Input feature dimension D")
                         ->capture_default_str();
  auto* in_dims_opt = in_cmd->add_option("--dims", in_dims, "GKR shape as D,F0,F1,...,FK (F0 = 2)");
  in_cmd->footer("\nWithout --checkpoint the model is built from the flags and config.\n");
  in_cmd->callback([&] {
    action = [&] {
      std::optional<KinshipModel> model;
      if (!in_checkpoint.empty()) {
        model.emplace(load_checkpoint(in_checkpoint).model);
      } else {
        RunConfig cfg = in_flags.resolve();
        std::size_t dim = given(in_dim_opt) ? in_dim : cfg.data.synthetic.dim;
        if (given(in_dims_opt)) {
          const GkrConfig g = parse_dims(in_dims);
          cfg.train.model.gkr.layer_dims = g.layer_dims;
          dim = g.dim;
        }
        model.emplace(make_model(cfg.train.model, cfg.train.encoder, dim, cfg.train.seed));
      }
      const auto params = std::as_const(*model).parameters();
      const auto names = model->parameter_names();
      std::size_t width = 4, total = 0;
      for (const auto& n : names) width = std::max(width, n.size());
      out << "model " << to_string(model->head().kind()) << ", input dimension "
          << model->input_dim() << '\n';
      for (std::size_t i = 0; i < params.size(); ++i) {
        out << names[i] << std::string(width + 2 - names[i].size(), ' ') << params[i]->rows()
            << " x " << params[i]->cols() << '\n';
        total += params[i]->size();
      }
      if (const auto* g = dynamic_cast<const GkrNet*>(&model->head())) {
        out << "readout input " << g->config().readout_input_dim() << '\n';
      }
      out << "parameters " << total << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (action) action();
    out.flush();
    return kExitOk;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace gkr::cli
