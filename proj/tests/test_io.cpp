#include <doctest.h>

#include <fstream>

#include "gkr/checkpoint.hpp"
#include "gkr/config.hpp"
#include "gkr/errors.hpp"
#include "gkr/report.hpp"
#include "support.hpp"

using namespace gkr;
using nlohmann::json;

namespace {

bool usage_error_mentions(const json& doc, const std::string& needle) {
  try {
    apply_json(default_run_config(), doc);
  } catch (const UsageError& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

SynthData tiny_data() {
  SynthSpec spec;
  spec.families = 20;
  spec.dim = 5;
  spec.genome_dim = 3;
  return gen_synthetic(spec);
}

}  // namespace

TEST_CASE("config: defaults survive a JSON round trip") {
  const RunConfig base = default_run_config();
  CHECK(to_json(apply_json(base, to_json(base))) == to_json(base));
  CHECK(base.train.model.gkr.layer_dims == std::vector<std::size_t>{16, 4});
  CHECK(base.train.adam.lr == 0.0005);
  CHECK(base.train.batch_size == 16);
}

TEST_CASE("config: every field round trips") {
  RunConfig c = default_run_config();
  c.train.model.kind = ModelKind::LinearMetric;
  c.train.model.gkr.central_init = CentralInit::mean_pool();
  c.train.model.gkr.aggregator = PoolMode::Mean;
  c.train.model.gkr.readout_hidden = std::vector<std::size_t>{7, 3};
  c.train.model.gkr.use_bias = true;
  c.train.model.baseline.metric_rank = 3;
  c.train.model.baseline.mlp_hidden = {9};
  c.train.encoder.kind = EncoderSpec::Kind::SharedMlp;
  c.train.encoder.hidden = {8};
  c.train.encoder.output_dim = 4;
  c.train.adam.lr = 0.125;
  c.train.epochs = 7;
  c.train.seed = 99;
  c.train.resample_negatives = true;
  c.train.threshold = 0.25;
  c.data.synthetic.rho = 0.0;
  c.data.synthetic.families = 123;
  c.data.kind = DataSource::Kind::Files;
  c.data.features = "/abs/f.csv";
  c.data.pairs = "/abs/p.csv";
  c.data.assign_folds = true;
  const json doc = to_json(c);
  CHECK(to_json(apply_json(default_run_config(), doc)) == doc);
}

TEST_CASE("config: partial documents overlay the base") {
  const RunConfig c = apply_json(default_run_config(), json::parse(R"({"training": {"epochs": 3}})"));
  CHECK(c.train.epochs == 3);
  CHECK(c.train.adam.lr == 0.0005);
}

TEST_CASE("config: unknown keys and bad types name the key path") {
  CHECK(usage_error_mentions(json::parse(R"({"trainig": {}})"), "config.trainig"));
  CHECK(usage_error_mentions(json::parse(R"({"training": {"lrr": 1}})"), "config.training.lrr"));
  CHECK(usage_error_mentions(json::parse(R"({"training": {"epochs": "ten"}})"),
                             "config.training.epochs"));
  CHECK(usage_error_mentions(json::parse(R"({"model": {"kind": "svm"}})"), "config.model.kind"));
  CHECK(usage_error_mentions(json::parse(R"({"model": {"gkr": {"layer_dims": [4, 0]}}})"),
                             "layer_dims"));
  CHECK(usage_error_mentions(json::parse(R"({"schema_version": 2})"), "schema_version"));
  CHECK(usage_error_mentions(json::parse(R"({"data": {"synthetic": {"seed": -1}}})"), "seed"));
}

TEST_CASE("config: data paths resolve against the config file") {
  const auto dir = testing::scratch_dir("config_paths");
  std::ofstream(dir / "run.json") << R"({"data": {"source": "files", "features": "f.csv", "pairs": "/x/p.csv"}})";
  const RunConfig c = load_run_config(dir / "run.json");
  CHECK(c.data.kind == DataSource::Kind::Files);
  CHECK(c.data.features == dir / "f.csv");
  CHECK(c.data.pairs == std::filesystem::path("/x/p.csv"));
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS(load_run_config(dir / "bad.json"));
}

TEST_CASE("config: file data with fold assignment") {
  const auto dir = testing::scratch_dir("config_files");
  const SynthData d = tiny_data();
  write_features(dir / "f.csv", d.features);
  {
    std::ofstream out(dir / "p.csv");
    out << "parent_id,child_id,label\n";
    for (const auto& p : d.pairs.all()) out << p.parent << ',' << p.child << ',' << p.label << '\n';
  }
  DataSource src;
  src.kind = DataSource::Kind::Files;
  src.features = dir / "f.csv";
  src.pairs = dir / "p.csv";
  CHECK_THROWS_AS(load_data(src), ParseError);
  src.assign_folds = true;
  const LoadedData loaded = load_data(src);
  CHECK_NOTHROW(loaded.pairs.validate(&loaded.features));
  CHECK(loaded.pairs.folds() == std::vector<int>{1, 2, 3, 4, 5});
}

TEST_CASE("checkpoint: every model kind reloads bit-exactly") {
  const SynthData d = tiny_data();
  for (ModelKind kind :
       {ModelKind::Gkr, ModelKind::Cosine, ModelKind::MlpFusion, ModelKind::LinearMetric}) {
    for (bool encoder : {false, true}) {
      TrainConfig c;
      c.model.kind = kind;
      c.model.gkr.layer_dims = {4, 2};
      c.model.gkr.central_init = CentralInit::constant(0.25);
      c.model.gkr.use_bias = encoder;
      if (encoder) {
        c.encoder.kind = EncoderSpec::Kind::SharedMlp;
        c.encoder.hidden = {6};
        c.encoder.output_dim = 4;
      }
      c.epochs = 2;
      const TrainResult trained = train(c, d.pairs, d.features);
      const auto dir = testing::scratch_dir("ckpt");
      save_checkpoint(dir / "m.json", trained.model, c);
      const Checkpoint back = load_checkpoint(dir / "m.json");
      INFO(to_string(kind) << " encoder " << encoder);
      CHECK(back.model.parameter_names() == trained.model.parameter_names());
      const auto a = trained.model.parameters(), b = back.model.parameters();
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
      CHECK(to_json(back.config) == to_json(c));
      const auto fx = d.features.row(0), fy = d.features.row(1);
      CHECK(back.model.probability(fx, fy) == trained.model.probability(fx, fy));
    }
  }
}

TEST_CASE("checkpoint: malformed documents are rejected") {
  TrainConfig c;
  c.model.gkr.layer_dims = {3};
  const KinshipModel m = make_model(c.model, c.encoder, 4, 1);
  const json good = checkpoint_json(m, c);
  CHECK_NOTHROW(checkpoint_from_json(good));

  json bad = good;
  bad["format"] = "other";
  CHECK_THROWS_AS(checkpoint_from_json(bad), ParseError);
  bad = good;
  bad["version"] = 2;
  CHECK_THROWS_AS(checkpoint_from_json(bad), ParseError);
  bad = good;
  bad["tensors"][0]["rows"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(bad), ParseError);
  bad = good;
  bad["tensors"][0]["name"] = "nope";
  CHECK_THROWS_AS(checkpoint_from_json(bad), ParseError);
  bad = good;
  bad["tensors"].erase(bad["tensors"].size() - 1);
  CHECK_THROWS_AS(checkpoint_from_json(bad), ParseError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/m.json"), UsageError);
}

TEST_CASE("reports are byte-identical across equal runs") {
  const SynthData d = tiny_data();
  RunConfig run = default_run_config();
  run.train.model.gkr.layer_dims = {4, 2};
  run.train.epochs = 2;
  const std::string a = dump(crossval_report(crossval(run.train, d.pairs, d.features), run));
  const std::string b = dump(crossval_report(crossval(run.train, d.pairs, d.features), run));
  CHECK(a == b);
  CHECK(a.back() == '\n');
  const json doc = json::parse(a);
  CHECK(doc["report"] == "crossval");
  CHECK(doc["schema_version"] == kSchemaVersion);
  CHECK_FALSE(doc.contains("seconds"));
}

TEST_CASE("metrics JSON lists relations in table order") {
  Metrics m;
  m.by_relation[Relation::MotherDaughter].tp = 1;
  m.by_relation[Relation::FatherSon].tn = 2;
  m.overall.tp = 1;
  m.overall.tn = 2;
  const json j = to_json(m);
  CHECK(j["accuracy"] == 1.0);
  std::vector<std::string> order;
  for (const auto& r : j["by_relation"]) order.push_back(r["relation"]);
  CHECK(order == std::vector<std::string>{"F-S", "M-D"});
}

TEST_CASE("accuracy table columns") {
  Metrics tagged;
  for (Relation r : kTableRelations) tagged.by_relation[r].tp = 1;
  tagged.overall.tp = 4;
  const std::string t = render_table("T", {{"GKR", tagged}});
  const auto header = t.substr(t.find("Method"), t.find('\n', t.find("Method")) - t.find("Method"));
  std::size_t pos = 0;
  for (const char* col : {"F-S", "F-D", "M-S", "M-D", "Mean"}) {
    const auto at = header.find(col, pos);
    REQUIRE(at != std::string::npos);
    pos = at;
  }
  CHECK(t.find("100.0") != std::string::npos);

  Metrics plain;
  plain.overall.tp = 1;
  plain.overall.fn = 1;
  const std::string u = render_table("U", {{"Cos", plain}});
  CHECK(u.find("F-S") == std::string::npos);
  CHECK(u.find("Mean") != std::string::npos);
  CHECK(u.find("50.0") != std::string::npos);
}
