#include "gkr/config.hpp"

#include <fstream>
#include <set>

#include "gkr/errors.hpp"

namespace gkr {

using nlohmann::json;

static_assert(std::is_same_v<std::size_t, std::uint64_t>);

RunConfig default_run_config() {
  RunConfig c;
  c.train.model.kind = ModelKind::Gkr;
  c.train.model.gkr.layer_dims = {16, 4};
  c.train.model.gkr.central_init = CentralInit::constant(0.5);
  c.train.model.gkr.aggregator = PoolMode::Max;
  return c;
}

namespace {

json size_list(const std::vector<std::size_t>& v) { return json(v); }

std::string_view encoder_kind(EncoderSpec::Kind k) {
  return k == EncoderSpec::Kind::Identity ? "identity" : "shared_mlp";
}

}  // namespace

json to_json(const SynthSpec& s) {
  return {{"families", s.families}, {"genome_dim", s.genome_dim}, {"dim", s.dim},
          {"rho", s.rho},           {"sigma", s.sigma},           {"mixing", s.mixing},
          {"flip_fraction", s.flip_fraction}, {"folds", s.folds},
          {"tag_relations", s.tag_relations}, {"seed", s.seed}};
}

json to_json(const TrainConfig& c) {
  const GkrConfig& g = c.model.gkr;
  json gkr = {{"layer_dims", size_list(g.layer_dims)},
              {"central_init", g.central_init.label()},
              {"aggregator", to_string(g.aggregator)},
              {"readout_hidden", g.readout_hidden ? size_list(*g.readout_hidden) : json(nullptr)},
              {"use_bias", g.use_bias}};
  json baseline = {{"mlp_hidden", size_list(c.model.baseline.mlp_hidden)},
                   {"metric_rank", c.model.baseline.metric_rank},
                   {"use_bias", c.model.baseline.use_bias}};
  return {
      {"model", {{"kind", to_string(c.model.kind)}, {"gkr", gkr}, {"baseline", baseline}}},
      {"encoder",
       {{"kind", encoder_kind(c.encoder.kind)},
        {"hidden", size_list(c.encoder.hidden)},
        {"output_dim", c.encoder.output_dim}}},
      {"training",
       {{"lr", c.adam.lr},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"epsilon", c.adam.epsilon},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"seed", c.seed},
        {"resample_negatives", c.resample_negatives},
        {"precision", c.precision},
        {"threshold", c.threshold}}},
  };
}

json to_json(const RunConfig& c) {
  json doc = {{"schema_version", kSchemaVersion}};
  doc.update(to_json(c.train));
  const DataSource& d = c.data;
  json data = {{"source", d.kind == DataSource::Kind::Synthetic ? "synthetic" : "files"},
               {"synthetic", to_json(d.synthetic)},
               {"features", d.features.generic_string()},
               {"pairs", d.pairs.generic_string()},
               {"assign_folds", d.assign_folds},
               {"folds", d.folds},
               {"fold_seed", d.fold_seed}};
  doc["data"] = std::move(data);
  return doc;
}

namespace {

/// Strict view of one JSON object: rejects unknown keys and mistyped values.
class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> keys)
      : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw UsageError(path_ + ": expected an object");
    for (const auto& [key, value] : j.items()) {
      if (!keys.contains(key)) throw UsageError(path_ + "." + key + ": unknown key");
    }
  }

  const json* find(const char* key) const {
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string where(const char* key) const { return path_ + "." + key; }

  void get(const char* key, double& out) const {
    if (auto* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) const {
    if (auto* v = find(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) const {
    if (auto* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }
  void get(const char* key, int& out) const {
    if (auto* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      const auto x = v->get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) fail(key, "an integer in range");
      out = static_cast<int>(x);
    }
  }
  void get(const char* key, std::uint64_t& out) const {
    if (auto* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* key, std::vector<std::size_t>& out) const {
    if (auto* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of positive integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0)
          fail(key, "an array of positive integers");
        out.push_back(e.get<std::size_t>());
      }
    }
  }
  Section sub(const char* key, std::set<std::string> keys) const {
    return Section(*find(key), where(key), std::move(keys));
  }

  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw UsageError(where(key) + ": expected " + expected);
  }

 private:
  const json& j_;
  std::string path_;
};

template <typename Parse>
void get_parsed(const Section& s, const char* key, Parse parse) {
  if (auto* v = s.find(key)) {
    if (!v->is_string()) s.fail(key, "a string");
    try {
      parse(v->get<std::string>());
    } catch (const UsageError& e) {
      throw UsageError(s.where(key) + ": " + e.what());
    }
  }
}

void apply_synth(SynthSpec& s, const Section& j) {
  j.get("families", s.families);
  j.get("genome_dim", s.genome_dim);
  j.get("dim", s.dim);
  j.get("rho", s.rho);
  j.get("sigma", s.sigma);
  j.get("mixing", s.mixing);
  j.get("flip_fraction", s.flip_fraction);
  j.get("folds", s.folds);
  j.get("tag_relations", s.tag_relations);
  j.get("seed", s.seed);
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.empty() || p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

RunConfig apply_json(RunConfig c, const json& doc, const std::filesystem::path& base_dir) {
  const Section root(doc, "config",
                     {"schema_version", "model", "encoder", "training", "data"});
  if (auto* v = root.find("schema_version")) {
    if (!v->is_number_integer() || v->get<int>() != kSchemaVersion) {
      throw UsageError("config.schema_version: expected " + std::to_string(kSchemaVersion));
    }
  }
  if (root.find("model")) {
    const Section m = root.sub("model", {"kind", "gkr", "baseline"});
    get_parsed(m, "kind", [&](const std::string& t) { c.train.model.kind = parse_model_kind(t); });
    if (m.find("gkr")) {
      GkrConfig& g = c.train.model.gkr;
      const Section s = m.sub("gkr", {"layer_dims", "central_init", "aggregator", "readout_hidden",
                                      "use_bias"});
      s.get("layer_dims", g.layer_dims);
      if (auto* v = s.find("central_init")) {
        if (v->is_number()) {
          g.central_init = CentralInit::constant(v->get<double>());
        } else {
          get_parsed(s, "central_init",
                     [&](const std::string& t) { g.central_init = CentralInit::parse(t); });
        }
      }
      get_parsed(s, "aggregator", [&](const std::string& t) { g.aggregator = parse_pool_mode(t); });
      if (auto* v = s.find("readout_hidden")) {
        if (v->is_null()) {
          g.readout_hidden.reset();
        } else {
          std::vector<std::size_t> h;
          s.get("readout_hidden", h);
          g.readout_hidden = h;
        }
      }
      s.get("use_bias", g.use_bias);
    }
    if (m.find("baseline")) {
      BaselineSpec& b = c.train.model.baseline;
      const Section s = m.sub("baseline", {"mlp_hidden", "metric_rank", "use_bias"});
      s.get("mlp_hidden", b.mlp_hidden);
      s.get("metric_rank", b.metric_rank);
      s.get("use_bias", b.use_bias);
    }
  }
  if (root.find("encoder")) {
    EncoderSpec& e = c.train.encoder;
    const Section s = root.sub("encoder", {"kind", "hidden", "output_dim"});
    get_parsed(s, "kind", [&](const std::string& t) {
      if (t == "identity") {
        e.kind = EncoderSpec::Kind::Identity;
      } else if (t == "shared_mlp") {
        e.kind = EncoderSpec::Kind::SharedMlp;
      } else {
        throw UsageError("unknown encoder '" + t + "' (expected identity|shared_mlp)");
      }
    });
    s.get("hidden", e.hidden);
    s.get("output_dim", e.output_dim);
  }
  if (root.find("training")) {
    TrainConfig& t = c.train;
    const Section s = root.sub("training", {"lr", "beta1", "beta2", "epsilon", "batch_size",
                                            "epochs", "seed", "resample_negatives", "precision",
                                            "threshold"});
    s.get("lr", t.adam.lr);
    s.get("beta1", t.adam.beta1);
    s.get("beta2", t.adam.beta2);
    s.get("epsilon", t.adam.epsilon);
    s.get("batch_size", t.batch_size);
    s.get("epochs", t.epochs);
    s.get("seed", t.seed);
    s.get("resample_negatives", t.resample_negatives);
    s.get("precision", t.precision);
    s.get("threshold", t.threshold);
  }
  if (root.find("data")) {
    DataSource& d = c.data;
    const Section s = root.sub("data", {"source", "synthetic", "features", "pairs",
                                        "assign_folds", "folds", "fold_seed"});
    get_parsed(s, "source", [&](const std::string& t) {
      if (t == "synthetic") {
        d.kind = DataSource::Kind::Synthetic;
      } else if (t == "files") {
        d.kind = DataSource::Kind::Files;
      } else {
        throw UsageError("unknown data source '" + t + "' (expected synthetic|files)");
      }
    });
    if (s.find("synthetic")) {
      apply_synth(d.synthetic,
                  s.sub("synthetic", {"families", "genome_dim", "dim", "rho", "sigma", "mixing",
                                      "flip_fraction", "folds", "tag_relations", "seed"}));
    }
    std::string path;
    if (s.find("features")) {
      s.get("features", path);
      d.features = resolve(path, base_dir);
    }
    if (s.find("pairs")) {
      s.get("pairs", path);
      d.pairs = resolve(path, base_dir);
    }
    s.get("assign_folds", d.assign_folds);
    s.get("folds", d.folds);
    s.get("fold_seed", d.fold_seed);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return apply_json(std::move(base), doc, path.parent_path());
  } catch (const UsageError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

LoadedData load_data(const DataSource& source) {
  if (source.kind == DataSource::Kind::Synthetic) {
    SynthData s = gen_synthetic(source.synthetic);
    return {std::move(s.features), std::move(s.pairs)};
  }
  if (source.features.empty() || source.pairs.empty()) {
    throw UsageError("data: file source needs both a features and a pairs path");
  }
  LoadedData out{read_features(source.features), {}};
  out.pairs = read_pairs(source.pairs, out.features,
                         source.assign_folds ? FoldColumn::Optional : FoldColumn::Required);
  const bool unassigned = !out.pairs.positives.empty() && out.pairs.positives.front().fold == 0;
  if (unassigned) {
    make_folds(out.pairs.positives, source.folds, source.fold_seed);
    inherit_negative_folds(out.pairs);
    out.pairs.validate(&out.features);
  }
  return out;
}

}  // namespace gkr
