#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gkr/cli.hpp"
#include "support.hpp"

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome gkr_run(std::vector<std::string> args) {
  args.insert(args.begin(), "gkr");
  std::ostringstream out, err;
  const int code = gkr::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string& s, const std::string& needle) {
  return s.find(needle) != std::string::npos;
}

const std::vector<std::string> kQuick = {"--families", "30", "--dim", "6", "--genome-dim", "3",
                                         "--layers", "4,2", "--epochs", "2"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("cli: exit codes") {
  CHECK(gkr_run({"--help"}).code == 0);
  CHECK(gkr_run({"frobnicate"}).code == 1);
  CHECK(gkr_run({"crossval", "--epochs", "x"}).code == 1);
  const Outcome bad_dims = gkr_run({"gradcheck", "--dims", "4,3,2"});
  CHECK(bad_dims.code == 1);
  CHECK(contains(bad_dims.err, "F0"));
  CHECK(gkr_run({"eval"}).code == 1);
  CHECK(gkr_run({"gradcheck", "--dims", "4,2,3", "--tolerance", "1e-300"}).code == 2);
}

TEST_CASE("cli: gradcheck passes on the documented example") {
  const Outcome r = gkr_run({"gradcheck", "--seed", "7", "--dims", "4,2,3,2"});
  CHECK(r.code == 0);
  CHECK(contains(r.out, "max relative error"));
  CHECK(contains(r.out, "over 10 checks"));
  const Outcome one = gkr_run({"gradcheck", "--variant", "0.5/max", "--dims", "3,2,2"});
  CHECK(one.code == 0);
  CHECK(contains(one.out, "over 1 checks"));
  CHECK(gkr_run({"gradcheck", "--model", "metric", "--dims", "3,2,2"}).code == 0);
}

TEST_CASE("cli: synth-gen writes files that read back") {
  const auto dir = testing::scratch_dir("cli_synth");
  const Outcome r = gkr_run({"synth-gen", "--families", "20", "--dim", "4", "-o", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "features.csv"));
  CHECK(std::filesystem::exists(dir / "pairs.csv"));
  CHECK(testing::slurp(dir / "features.csv").rfind("id,role,f0,f1,f2,f3\n", 0) == 0);
  CHECK(testing::slurp(dir / "pairs.csv").rfind("parent_id,child_id,label,fold,relation\n", 0) == 0);

  const auto out2 = testing::scratch_dir("cli_cv_files");
  const Outcome cv = gkr_run({"crossval", "--features", (dir / "features.csv").string(), "--pairs",
                              (dir / "pairs.csv").string(), "--layers", "3,2", "--epochs", "1",
                              "-o", out2.string()});
  CHECK(cv.code == 0);
  CHECK(std::filesystem::exists(out2 / "report.json"));
}

TEST_CASE("cli: crossval writes a report and the accuracy table") {
  const auto dir = testing::scratch_dir("cli_cv");
  const Outcome r = gkr_run(with({"crossval", "-o", dir.string()}, kQuick));
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(testing::slurp(dir / "report.json"));
  CHECK(doc["report"] == "crossval");
  CHECK(doc["folds"].size() == 5);
  const std::string table = testing::slurp(dir / "report.txt");
  for (const char* col : {"Method", "F-S", "F-D", "M-S", "M-D", "Mean"}) CHECK(contains(table, col));
  CHECK(contains(r.out, "F-S"));
}

TEST_CASE("cli: same seed gives the same bytes, another seed differs") {
  const auto a = testing::scratch_dir("cli_seed_a"), b = testing::scratch_dir("cli_seed_b"),
             c = testing::scratch_dir("cli_seed_c");
  REQUIRE(gkr_run(with({"crossval", "--seed", "3", "-o", a.string()}, kQuick)).code == 0);
  REQUIRE(gkr_run(with({"crossval", "--seed", "3", "-o", b.string()}, kQuick)).code == 0);
  REQUIRE(gkr_run(with({"crossval", "--seed", "4", "-o", c.string()}, kQuick)).code == 0);
  CHECK(testing::slurp(a / "report.json") == testing::slurp(b / "report.json"));
  CHECK(testing::slurp(a / "report.json") != testing::slurp(c / "report.json"));
}

TEST_CASE("cli: output directory from the environment") {
  const auto dir = testing::scratch_dir("cli_env");
  ::setenv("GKR_OUT_DIR", dir.string().c_str(), 1);
  const Outcome r = gkr_run({"synth-gen", "--families", "10", "--dim", "3"});
  ::unsetenv("GKR_OUT_DIR");
  CHECK(r.code == 0);
  CHECK(std::filesystem::exists(dir / "features.csv"));
}

TEST_CASE("cli: config file with flag overrides") {
  const auto dir = testing::scratch_dir("cli_config");
  std::ofstream(dir / "run.json")
      << R"({"model": {"kind": "cosine"}, "training": {"epochs": 2},
            "data": {"synthetic": {"families": 20, "dim": 5, "genome_dim": 3}}})";
  REQUIRE(gkr_run({"crossval", "-c", (dir / "run.json").string(), "--epochs", "1", "-o",
                   dir.string()})
              .code == 0);
  const auto doc = nlohmann::json::parse(testing::slurp(dir / "report.json"));
  CHECK(doc["config"]["model"]["kind"] == "cosine");
  CHECK(doc["config"]["training"]["epochs"] == 1);
  CHECK(doc["config"]["data"]["synthetic"]["families"] == 20);
  std::ofstream(dir / "bad.json") << R"({"training": {"epoch": 2}})";
  const Outcome bad = gkr_run({"crossval", "-c", (dir / "bad.json").string(), "-o", dir.string()});
  CHECK(bad.code == 1);
  CHECK(contains(bad.err, "config.training.epoch"));
}

TEST_CASE("cli: train then eval") {
  const auto dir = testing::scratch_dir("cli_train");
  REQUIRE(gkr_run(with({"train", "--exclude-fold", "2", "-o", dir.string()}, kQuick)).code == 0);
  CHECK(std::filesystem::exists(dir / "model.json"));
  CHECK(std::filesystem::exists(dir / "train_report.json"));
  const Outcome e = gkr_run({"eval", "--checkpoint", (dir / "model.json").string(), "--fold", "2",
                             "--families", "30", "--dim", "6", "--genome-dim", "3", "-o",
                             dir.string()});
  CHECK(e.code == 0);
  const auto doc = nlohmann::json::parse(testing::slurp(dir / "eval_report.json"));
  CHECK(doc["metrics"]["confusion"]["pairs"] == 12);
  const Outcome mismatch = gkr_run({"eval", "--checkpoint", (dir / "model.json").string(),
                                    "--dim", "7", "-o", dir.string()});
  CHECK(mismatch.code == 1);
}

TEST_CASE("cli: ablate presets") {
  const auto dir = testing::scratch_dir("cli_ablate");
  const Outcome r = gkr_run(with({"ablate", "--preset", "mapping", "-o", dir.string()}, kQuick));
  REQUIRE(r.code == 0);
  const std::string text = testing::slurp(dir / "ablation.txt");
  const auto cos = text.find("Cos"), mlp = text.find("MLP"), g = text.find("GKR");
  CHECK(cos < mlp);
  CHECK(mlp < g);
  CHECK(g != std::string::npos);
  CHECK(gkr_run(with({"ablate", "--preset", "depth", "-o", dir.string()}, kQuick)).code == 1);
}

TEST_CASE("cli: inspect shows the shape ledger") {
  const Outcome r = gkr_run({"inspect", "--dims", "512,2,512,4"});
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "readout input 2052"));
  CHECK(contains(r.out, "2 x 512"));
  CHECK(contains(r.out, "1024 x 512"));
  CHECK(contains(r.out, "8 x 4"));
  CHECK(contains(r.out, "2052 x 513"));
}

TEST_CASE("cli: help text matches the golden files") {
  const std::filesystem::path golden = GKR_GOLDEN_DIR;
  const bool update = std::getenv("GKR_UPDATE_GOLDEN") != nullptr;
  for (const std::string sub :
       {"", "synth-gen", "train", "eval", "crossval", "ablate", "gradcheck", "inspect"}) {
    const Outcome r = sub.empty() ? gkr_run({"--help"}) : gkr_run({sub, "--help"});
    REQUIRE(r.code == 0);
    const auto file = golden / ((sub.empty() ? "gkr" : sub) + ".txt");
    if (update) std::ofstream(file, std::ios::binary) << r.out;
    INFO(file.string());
    CHECK(r.out == testing::slurp(file));
  }
}
