// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "gkr/cli.hpp"
#include "gkr/config.hpp"
#include "gkr/gkr_net.hpp"
#include "gkr/gradcheck_suite.hpp"
#include "gkr/report.hpp"
#include "gkr/trainer.hpp"
#include "oracle_bridge.hpp"
#include "support.hpp"

using namespace gkr;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Verdict gradient_oracle() {
  const GkrConfig base = parse_dims("4,2,3,2");
  const auto t0 = Clock::now();
  double worst = 0.0;
  int checks = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& v : gkr_variants(base)) {
      worst = std::max(worst, check_model_gradients(v.spec, base.dim, 4, seed).max_rel_error);
      ++checks;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-5 && secs < 10.0, std::to_string(checks) + " checks, max rel error " +
                                           fmt("%.2e", worst) + " (< 1e-5), " + fmt("%.2f", secs) +
                                           " s (< 10 s)"};
}

Verdict oracle_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<std::size_t> dim(1, 3), layers(1, 2), width(1, 2), init_pick(0, 4);
  const CentralInit inits[] = {CentralInit::mean_pool(), CentralInit::max_pool(),
                               CentralInit::constant(0.0), CentralInit::constant(0.5),
                               CentralInit::constant(1.0)};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    GkrConfig c;
    c.dim = dim(rng);
    c.layer_dims.resize(layers(rng));
    for (auto& f : c.layer_dims) f = width(rng);
    c.central_init = inits[init_pick(rng)];
    c.aggregator = i % 2 ? PoolMode::Max : PoolMode::Mean;
    const GkrNet net(c, static_cast<std::uint64_t>(1000 + i));
    std::vector<double> fx(c.dim), fy(c.dim);
    for (auto& v : fx) v = u(rng);
    for (auto& v : fy) v = u(rng);
    const double want = oracle::probability(testing::to_oracle(net), fx, fy);
    worst = std::max(worst, std::abs(net.probability(fx, fy) - want));
  }
  return {worst <= 1e-10, "50 configs, max |p - p_oracle| " + fmt("%.2e", worst) + " (<= 1e-10)"};
}

Verdict shape_ledger() {
  GkrConfig c;
  c.dim = 512;
  c.layer_dims = {512, 4};
  const GkrParams p = init_params(c, 1);
  const std::vector<std::pair<std::string, std::string>> want = {
      {p.layers[0].mess.shape_str(), "2x512"},   {p.layers[1].mess.shape_str(), "512x4"},
      {p.layers[0].peri.shape_str(), "1024x512"}, {p.layers[1].peri.shape_str(), "8x4"},
      {p.layers[0].cen.shape_str(), "1024x512"},  {p.layers[1].cen.shape_str(), "8x4"},
      {std::to_string(p.readout.input_dim()), "2052"}};
  std::string got;
  bool ok = true;
  for (const auto& [g, w] : want) {
    ok = ok && g == w;
    got += (got.empty() ? "" : " ") + g;
  }
  return {ok, "mess/peri/cen/readout-in = " + got};
}

Verdict equivariance() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<std::size_t> dim(2, 8), width(1, 4), layers(1, 2);
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    GkrConfig c;
    c.dim = dim(rng);
    c.layer_dims.resize(layers(rng));
    for (auto& f : c.layer_dims) f = width(rng);
    c.central_init = CentralInit::constant(0.5);
    c.aggregator = i % 2 ? PoolMode::Max : PoolMode::Mean;
    const GkrNet net(c, static_cast<std::uint64_t>(i));
    std::vector<double> fx(c.dim), fy(c.dim), px(c.dim), py(c.dim);
    for (auto& v : fx) v = u(rng);
    for (auto& v : fy) v = u(rng);
    std::vector<std::size_t> perm(c.dim);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t d = 0; d < c.dim; ++d) {
      px[d] = fx[perm[d]];
      py[d] = fy[perm[d]];
    }
    Tape t;
    const GraphState a = net.propagate(t, t.constant_row(fx), t.constant_row(fy));
    const GraphState b = net.propagate(t, t.constant_row(px), t.constant_row(py));
    bool ok = t.value(a.central) == t.value(b.central);
    const Matrix &ha = t.value(a.peripheral), &hb = t.value(b.peripheral);
    for (std::size_t d = 0; d < c.dim; ++d)
      for (std::size_t j = 0; j < ha.cols(); ++j) ok = ok && hb(d, j) == ha(perm[d], j);
    failures += !ok;
  }
  return {failures == 0, "100 permutations, " + std::to_string(failures) + " with nonzero ulp difference"};
}

CrossvalReport run_cv(ModelKind kind, std::uint64_t seed, double rho) {
  RunConfig run = default_run_config();
  run.train.model.kind = kind;
  run.train.seed = seed;
  run.data.synthetic.seed = seed;
  run.data.synthetic.rho = rho;
  const LoadedData data = load_data(run.data);
  return crossval(run.train, data.pairs, data.features);
}

Verdict separability() {
  Verdict v;
  double gkr_sum = 0.0, cos_sum = 0.0, slowest = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const CrossvalReport g = run_cv(ModelKind::Gkr, seed, 0.8);
    const CrossvalReport c = run_cv(ModelKind::Cosine, seed, 0.8);
    slowest = std::max({slowest, g.seconds, c.seconds});
    gkr_sum += g.mean_accuracy();
    cos_sum += c.mean_accuracy();
    const bool ok = g.mean_accuracy() >= 0.85 && g.mean_accuracy() >= c.mean_accuracy() + 0.05;
    v.pass = v.pass && ok;
    v.detail += "seed " + std::to_string(seed) + " GKR " + fmt("%.3f", g.mean_accuracy()) + " cos " +
                fmt("%.3f", c.mean_accuracy()) + "; ";
  }
  v.pass = v.pass && slowest < 60.0;
  v.detail += "mean GKR " + fmt("%.3f", gkr_sum / 3) + " (>= 0.85) vs cos " +
              fmt("%.3f", cos_sum / 3) + " (margin >= 0.05); slowest run " + fmt("%.1f", slowest) +
              " s (< 60 s)";
  return v;
}

Verdict chance_control() {
  Verdict v;
  double lo = 1.0, hi = 0.0;
  for (ModelKind kind :
       {ModelKind::Gkr, ModelKind::Cosine, ModelKind::MlpFusion, ModelKind::LinearMetric}) {
    v.detail += std::string(short_label(kind)) + "";
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const double acc = run_cv(kind, seed, 0.0).mean_accuracy();
      lo = std::min(lo, acc);
      hi = std::max(hi, acc);
      v.pass = v.pass && acc >= 0.40 && acc <= 0.60;
      v.detail += " " + fmt("%.3f", acc);
    }
    v.detail += "; ";
  }
  v.detail += "range [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "] within [0.40, 0.60]";
  return v;
}

// Header cells of the rendered table, left to right.
std::vector<std::string> header_cells(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("Method", 0) == 0) {
      std::istringstream cells(line);
      std::vector<std::string> out;
      for (std::string c; cells >> c;) out.push_back(c);
      return out;
    }
  }
  return {};
}

Verdict ablation_structure() {
  RunConfig run = default_run_config();
  run.train.epochs = 2;
  const LoadedData data = load_data(run.data);
  const std::vector<std::string> columns = {"Method", "F-S", "F-D", "M-S", "M-D", "Mean"};
  const std::map<AblationPreset, std::vector<std::string>> rows = {
      {AblationPreset::CentralInit, {"Mean", "Max", "0", "0.5", "1"}},
      {AblationPreset::Aggregator, {"Mean", "Max"}},
      {AblationPreset::Mapping, {"Cos", "MLP", "GKR"}}};
  Verdict v;
  for (const auto& [preset, want] : rows) {
    const AblationTable table =
        ablate(ablation_grid(preset, run.train), run.train, data.pairs, data.features);
    std::vector<std::string> got;
    bool complete = true;
    for (const auto& r : table.rows) {
      got.push_back(r.label);
      for (Relation rel : kTableRelations) complete = complete && r.report.pooled.by_relation.contains(rel);
    }
    const bool ok = got == want && complete && header_cells(render_ablation(table)) == columns;
    v.pass = v.pass && ok;
    v.detail += std::string(to_string(preset)) + " " + std::to_string(got.size()) + " rows " +
                (ok ? "ok" : "MISMATCH") + "; ";
  }
  v.detail += "columns F-S F-D M-S M-D Mean";
  return v;
}

Verdict balanced_protocol() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> families(4, 120);
  std::uniform_int_distribution<int> fold_count(2, 5);
  int bad = 0;
  for (int m = 0; m < 1000; ++m) {
    const int k = fold_count(rng);
    std::size_t n = families(rng);
    n = std::max(n, static_cast<std::size_t>(2 * k));
    std::vector<KinPair> pos;
    std::vector<int> children(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Every third manifest has parents with two children.
      const int kids = (m % 3 == 0 && i % 2 == 0) ? 2 : 1;
      for (int c = 0; c < kids; ++c)
        pos.push_back({"P" + std::to_string(i), "C" + std::to_string(i) + "_" + std::to_string(c), 1,
                       0, kTableRelations[i % 4]});
    }
    // Folds by family so a parent's pairs share one fold.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(n);
    for (std::size_t r = 0; r < n; ++r) fold_of[order[r]] = static_cast<int>(r % static_cast<std::size_t>(k)) + 1;
    for (auto& p : pos) p.fold = fold_of[std::stoul(p.parent.substr(1))];

    PairSet set{pos, build_negative_set(pos, rng())};
    std::set<std::pair<std::string, std::string>> kin;
    for (const auto& p : set.positives) kin.emplace(p.parent, p.child);
    bool ok = set.negatives.size() == set.positives.size();
    std::map<int, int> balance;
    for (const auto& p : set.positives) ++balance[p.fold];
    for (const auto& q : set.negatives) {
      --balance[q.fold];
      const int parent_fold = fold_of[std::stoul(q.parent.substr(1))];
      const std::string child_family = q.child.substr(1, q.child.find('_') - 1);
      ok = ok && q.label == 0 && !kin.contains({q.parent, q.child}) &&
           q.parent.substr(1) != child_family && q.fold == parent_fold &&
           fold_of[std::stoul(child_family)] == q.fold;
    }
    for (const auto& [f, diff] : balance) ok = ok && diff == 0;
    for (int f = 1; f <= k; ++f) {
      std::set<std::pair<std::string, std::string>> train, test;
      for (const auto& p : set.all()) (p.fold == f ? test : train).emplace(p.parent, p.child);
      for (const auto& p : test) ok = ok && !train.contains(p);
    }
    bad += !ok;
  }
  return {bad == 0, "1000 manifests, " + std::to_string(bad) + " violating |N'| = |P|, self-pair or fold rules"};
}

Verdict determinism() {
  const auto a = testing::scratch_dir("accept_det_a"), b = testing::scratch_dir("accept_det_b");
  std::ostringstream out, err;
  const auto args = [](const std::filesystem::path& dir) {
    return std::vector<std::string>{"gkr", "crossval", "--seed", "5", "--epochs", "10", "-o", dir.string()};
  };
  const int ca = cli::run(args(a), out, err), cb = cli::run(args(b), out, err);
  const std::string ja = testing::slurp(a / "report.json"), jb = testing::slurp(b / "report.json");
  return {ca == 0 && cb == 0 && !ja.empty() && ja == jb,
          "two crossval runs, report.json " + std::to_string(ja.size()) + " bytes, " +
              (ja == jb ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"scalar-oracle forward equivalence", oracle_equivalence},
      {"shape ledger", shape_ledger},
      {"permutation equivariance", equivariance},
      {"synthetic separability", separability},
      {"chance-level control", chance_control},
      {"ablation machinery", ablation_structure},
      {"balanced-protocol invariants", balanced_protocol},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s  %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
