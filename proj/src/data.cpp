#include "gkr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "gkr/errors.hpp"

namespace gkr {

std::string_view to_string(Role role) { return role == Role::Parent ? "parent" : "child"; }

std::string_view to_string(Relation relation) {
  switch (relation) {
    case Relation::FatherSon: return "F-S";
    case Relation::FatherDaughter: return "F-D";
    case Relation::MotherSon: return "M-S";
    case Relation::MotherDaughter: return "M-D";
    case Relation::Synthetic: return "synthetic";
  }
  return "?";
}

std::optional<Relation> parse_relation(std::string_view text) {
  for (Relation r : {Relation::FatherSon, Relation::FatherDaughter, Relation::MotherSon,
                     Relation::MotherDaughter, Relation::Synthetic}) {
    if (text == to_string(r)) return r;
  }
  if (text.empty()) return Relation::Synthetic;
  return std::nullopt;
}

void FeatureTable::add(std::string id, Role role, std::span<const double> values) {
  if (values.size() != dim_) {
    throw UsageError("feature row '" + id + "' has " + std::to_string(values.size()) +
                     " values, table has D = " + std::to_string(dim_));
  }
  if (!index_.try_emplace(id, ids_.size()).second) {
    throw UsageError("duplicate feature id '" + id + "'");
  }
  ids_.push_back(std::move(id));
  roles_.push_back(role);
  values_.insert(values_.end(), values.begin(), values.end());
}

std::optional<std::size_t> FeatureTable::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t FeatureTable::index(std::string_view id) const {
  if (auto r = find(id)) return *r;
  throw UsageError("unknown feature id '" + std::string(id) + "'");
}

std::vector<KinPair> PairSet::all() const {
  std::vector<KinPair> out = positives;
  out.insert(out.end(), negatives.begin(), negatives.end());
  return out;
}

std::vector<int> PairSet::folds() const {
  std::set<int> f;
  for (const auto& p : positives) f.insert(p.fold);
  return {f.begin(), f.end()};
}

namespace {

std::string describe(const KinPair& p) { return "(" + p.parent + ", " + p.child + ")"; }

using IdPair = std::pair<std::string, std::string>;

}  // namespace

void PairSet::validate(const FeatureTable* features) const {
  std::set<IdPair> kin;
  std::map<std::string, std::set<int>> parent_folds;
  for (const auto& p : positives) {
    if (p.label != 1) throw UsageError("positive pair " + describe(p) + " has label 0");
    if (p.fold < 0) throw UsageError("pair " + describe(p) + " has negative fold id");
    kin.emplace(p.parent, p.child);
    parent_folds[p.parent].insert(p.fold);
  }
  if (negatives.size() != positives.size()) {
    throw UsageError("unbalanced pair set: " + std::to_string(positives.size()) + " positives vs " +
                     std::to_string(negatives.size()) + " negatives");
  }
  std::set<IdPair> seen;
  for (const auto& n : negatives) {
    if (n.label != 0) throw UsageError("negative pair " + describe(n) + " has label 1");
    if (kin.contains({n.parent, n.child})) {
      throw UsageError("negative pair " + describe(n) + " pairs a parent with its own child");
    }
    if (!seen.emplace(n.parent, n.child).second) {
      throw UsageError("negative pair " + describe(n) + " appears twice");
    }
    auto it = parent_folds.find(n.parent);
    if (it == parent_folds.end()) {
      throw UsageError("negative pair " + describe(n) + " uses a parent with no positive pair");
    }
    if (!it->second.contains(n.fold)) {
      throw UsageError("negative pair " + describe(n) + " is in fold " + std::to_string(n.fold) +
                       " but its parent is not");
    }
  }
  if (features) {
    for (const auto& p : all()) {
      auto pr = features->find(p.parent);
      auto cr = features->find(p.child);
      if (!pr) throw UsageError("pair " + describe(p) + ": unknown parent id '" + p.parent + "'");
      if (!cr) throw UsageError("pair " + describe(p) + ": unknown child id '" + p.child + "'");
      if (features->role(*pr) != Role::Parent || features->role(*cr) != Role::Child) {
        throw UsageError("pair " + describe(p) + ": roles must be (parent, child)");
      }
    }
  }
}

void make_folds(std::vector<KinPair>& positives, int k, std::uint64_t seed) {
  if (k < 2) throw UsageError("make_folds: need at least 2 folds, got " + std::to_string(k));
  if (positives.size() < static_cast<std::size_t>(k)) {
    throw UsageError("make_folds: " + std::to_string(positives.size()) +
                     " positive pairs cannot fill " + std::to_string(k) + " folds");
  }
  const auto assigned = std::count_if(positives.begin(), positives.end(),
                                      [](const KinPair& p) { return p.fold != 0; });
  if (assigned == static_cast<std::ptrdiff_t>(positives.size())) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k) + 1, 0);
    for (const auto& p : positives) {
      if (p.fold < 1 || p.fold > k) {
        throw UsageError("make_folds: pair " + describe(p) + " has fold " + std::to_string(p.fold) +
                         " outside [1, " + std::to_string(k) + "]");
      }
      ++sizes[static_cast<std::size_t>(p.fold)];
    }
    for (int f = 1; f <= k; ++f) {
      if (sizes[static_cast<std::size_t>(f)] == 0)
        throw UsageError("make_folds: fold " + std::to_string(f) + " is empty");
    }
    return;
  }
  if (assigned != 0) {
    throw UsageError("make_folds: fold ids are assigned for some positives but not others");
  }
  std::vector<std::size_t> order(positives.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    positives[order[pos]].fold = static_cast<int>(pos % static_cast<std::size_t>(k)) + 1;
  }
}

void inherit_negative_folds(PairSet& pairs) {
  std::map<std::string, int> fold_of;
  for (const auto& p : pairs.positives) {
    auto [it, inserted] = fold_of.try_emplace(p.parent, p.fold);
    if (!inserted && it->second != p.fold) {
      throw UsageError("parent '" + p.parent + "' spans folds " + std::to_string(it->second) +
                       " and " + std::to_string(p.fold) + "; its negatives have no single fold");
    }
  }
  for (auto& n : pairs.negatives) {
    auto it = fold_of.find(n.parent);
    if (it == fold_of.end())
      throw UsageError("negative pair " + describe(n) + " uses a parent with no positive pair");
    n.fold = it->second;
  }
}

std::vector<KinPair> build_negative_set(std::span<const KinPair> positives, std::uint64_t seed) {
  if (positives.size() < 2) {
    throw UsageError("build_negative_set: need at least 2 positive pairs, got " +
                     std::to_string(positives.size()));
  }
  std::set<IdPair> kin;
  std::map<int, std::vector<std::size_t>> by_fold;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    kin.emplace(positives[i].parent, positives[i].child);
    by_fold[positives[i].fold].push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::vector<KinPair> out;
  out.reserve(positives.size());
  for (const auto& [fold, members] : by_fold) {
    const std::size_t n = members.size();
    if (n < 2) {
      throw UsageError("build_negative_set: fold " + std::to_string(fold) +
                       " has a single positive pair; cannot form negatives");
    }
    auto make = [&](std::size_t i, std::size_t j) {
      const KinPair& pi = positives[members[i]];
      return KinPair{pi.parent, positives[members[j]].child, 0, fold, pi.relation};
    };
    auto admissible = [&](std::size_t i, std::size_t j) {
      return i != j && !kin.contains({positives[members[i]].parent, positives[members[j]].child});
    };

    std::set<IdPair> taken;
    std::size_t drawn = 0;
    if (n <= 64) {
      // Small folds: enumerate the candidates and take a uniform prefix.
      std::vector<std::pair<std::size_t, std::size_t>> cand;
      std::set<IdPair> uniq;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (admissible(i, j) &&
              uniq.emplace(positives[members[i]].parent, positives[members[j]].child).second)
            cand.emplace_back(i, j);
      if (cand.size() < n) {
        throw UsageError("build_negative_set: fold " + std::to_string(fold) + " has only " +
                         std::to_string(cand.size()) + " non-kin pairs for " + std::to_string(n) +
                         " positives");
      }
      for (std::size_t t = 0; t < n; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, cand.size() - 1);
        std::swap(cand[t], cand[pick(rng)]);
        out.push_back(make(cand[t].first, cand[t].second));
      }
      continue;
    }
    std::uniform_int_distribution<std::size_t> idx(0, n - 1);
    while (drawn < n) {
      const std::size_t i = idx(rng), j = idx(rng);
      if (!admissible(i, j)) continue;
      if (!taken.emplace(positives[members[i]].parent, positives[members[j]].child).second) continue;
      out.push_back(make(i, j));
      ++drawn;
    }
  }
  return out;
}

void SynthSpec::validate() const {
  if (families < 2) throw UsageError("synth: need at least 2 families");
  if (genome_dim == 0 || dim == 0) throw UsageError("synth: genome and feature dims must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw UsageError("synth: rho must lie in [0, 1]");
  if (!(sigma >= 0.0)) throw UsageError("synth: sigma must be non-negative");
  if (!(mixing >= 0.0)) throw UsageError("synth: mixing must be non-negative");
  if (!(flip_fraction >= 0.0 && flip_fraction <= 1.0))
    throw UsageError("synth: flip fraction must lie in [0, 1]");
  if (folds < 2) throw UsageError("synth: need at least 2 folds");
  if (families < static_cast<std::size_t>(2 * folds))
    throw UsageError("synth: need at least 2 families per fold");
}

SynthData gen_synthetic(const SynthSpec& spec) {
  spec.validate();
  const std::size_t G = spec.genome_dim, D = spec.dim;
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthData data;
  std::mt19937_64 mix_rng(spec.seed);
  data.parent_map.assign(D * G, 0.0);
  const double cross = spec.mixing / std::sqrt(static_cast<double>(G));
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t g = 0; g < G; ++g) {
      data.parent_map[d * G + g] = (g == d % G ? 1.0 : 0.0) + cross * normal(mix_rng);
    }
  }
  std::vector<std::size_t> rows(D);
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), mix_rng);
  const auto flips = static_cast<std::size_t>(std::llround(spec.flip_fraction * static_cast<double>(D)));
  data.child_map = data.parent_map;
  for (std::size_t t = 0; t < flips; ++t)
    for (std::size_t g = 0; g < G; ++g) data.child_map[rows[t] * G + g] *= -1.0;

  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
  normal.reset();
  const double keep = spec.rho;
  const double fresh = std::sqrt(1.0 - spec.rho * spec.rho);
  auto express = [&](const std::vector<double>& map, const std::vector<double>& genome) {
    std::vector<double> f(D);
    for (std::size_t d = 0; d < D; ++d) {
      double z = 0.0;
      for (std::size_t g = 0; g < G; ++g) z += map[d * G + g] * genome[g];
      f[d] = std::tanh(z + spec.sigma * normal(rng));
    }
    return f;
  };

  const std::size_t width = std::to_string(spec.families).size();
  auto pad = [&](std::size_t i) {
    std::string s = std::to_string(i + 1);
    return std::string(width - std::min(width, s.size()), '0') + s;
  };

  data.features = FeatureTable(D);
  std::vector<double> genome(G), inherited(G);
  for (std::size_t i = 0; i < spec.families; ++i) {
    for (double& v : genome) v = normal(rng);
    for (std::size_t g = 0; g < G; ++g) inherited[g] = keep * genome[g] + fresh * normal(rng);
    const std::string pid = "P" + pad(i), cid = "C" + pad(i);
    data.features.add(pid, Role::Parent, express(data.parent_map, genome));
    data.features.add(cid, Role::Child, express(data.child_map, inherited));
    const Relation rel = spec.tag_relations ? kTableRelations[i % 4] : Relation::Synthetic;
    data.pairs.positives.push_back(KinPair{pid, cid, 1, 0, rel});
  }
  make_folds(data.pairs.positives, spec.folds, spec.seed + 1);
  data.pairs.negatives = build_negative_set(data.pairs.positives, spec.seed + 2);
  return data;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

double parse_double(std::string_view cell, const std::string& source, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw ParseError(where(source, line) + "non-numeric value '" + std::string(cell) + "'");
  }
  return v;
}

long parse_int(std::string_view cell, const std::string& source, std::size_t line,
               const char* what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw ParseError(where(source, line) + "invalid " + what + " '" + std::string(cell) + "'");
  }
  return v;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

void write_features(std::ostream& out, const FeatureTable& table) {
  std::string buf = "id,role";
  for (std::size_t d = 0; d < table.dim(); ++d) buf += ",f" + std::to_string(d);
  buf += '\n';
  for (std::size_t r = 0; r < table.size(); ++r) {
    buf += table.id(r);
    buf += ',';
    buf += to_string(table.role(r));
    for (double v : table.row(r)) {
      buf += ',';
      append_double(buf, v);
    }
    buf += '\n';
  }
  out << buf;
}

void write_features(const std::filesystem::path& path, const FeatureTable& table) {
  auto out = open_out(path);
  write_features(out, table);
}

FeatureTable read_features(std::istream& in, const std::string& source) {
  std::string line;
  if (!next_line(in, line)) throw ParseError(where(source, 1) + "empty file, expected header");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "role") {
    throw ParseError(where(source, 1) + "header must be id,role,f0..f{D-1}");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t d = 0; d < dim; ++d) {
    if (header[d + 2] != "f" + std::to_string(d)) {
      throw ParseError(where(source, 1) + "expected column 'f" + std::to_string(d) + "', found '" +
                       std::string(header[d + 2]) + "'");
    }
  }
  FeatureTable table(dim);
  std::vector<double> values(dim);
  std::size_t lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != dim + 2) {
      throw ParseError(where(source, lineno) + "expected " + std::to_string(dim + 2) +
                       " columns, found " + std::to_string(cells.size()));
    }
    Role role;
    if (cells[1] == "parent") {
      role = Role::Parent;
    } else if (cells[1] == "child") {
      role = Role::Child;
    } else {
      throw ParseError(where(source, lineno) + "role must be parent or child, found '" +
                       std::string(cells[1]) + "'");
    }
    if (cells[0].empty()) throw ParseError(where(source, lineno) + "empty id");
    for (std::size_t d = 0; d < dim; ++d) values[d] = parse_double(cells[d + 2], source, lineno);
    if (table.find(cells[0])) {
      throw ParseError(where(source, lineno) + "duplicate id '" + std::string(cells[0]) + "'");
    }
    table.add(std::string(cells[0]), role, values);
  }
  return table;
}

FeatureTable read_features(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_features(in, path.string());
}

void write_pairs(std::ostream& out, const PairSet& pairs) {
  std::string buf = "parent_id,child_id,label,fold,relation\n";
  for (const auto& p : pairs.all()) {
    buf += p.parent + ',' + p.child + ',' + std::to_string(p.label) + ',' +
           std::to_string(p.fold) + ',' + std::string(to_string(p.relation)) + '\n';
  }
  out << buf;
}

void write_pairs(const std::filesystem::path& path, const PairSet& pairs) {
  auto out = open_out(path);
  write_pairs(out, pairs);
}

PairSet read_pairs(std::istream& in, const FeatureTable& features, const std::string& source,
                   FoldColumn fold_column) {
  std::string line;
  if (!next_line(in, line)) throw ParseError(where(source, 1) + "empty file, expected header");
  const auto header = split_csv(line);
  std::map<std::string, std::size_t, std::less<>> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
  for (const char* required : {"parent_id", "child_id", "label"}) {
    if (!col.contains(required)) {
      throw ParseError(where(source, 1) + "missing column '" + required +
                       "' (header must be parent_id,child_id,label,fold,relation)");
    }
  }
  const bool has_fold = col.contains("fold");
  if (!has_fold && fold_column == FoldColumn::Required) {
    throw ParseError(where(source, 1) +
                     "missing column 'fold'; add fold ids 1-5 or let the tool assign them "
                     "(make_folds, CLI flag --assign-folds)");
  }
  const bool has_rel = col.contains("relation");

  PairSet set;
  std::size_t lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ParseError(where(source, lineno) + "expected " + std::to_string(header.size()) +
                       " columns, found " + std::to_string(cells.size()));
    }
    KinPair p;
    p.parent = std::string(cells[col.at("parent_id")]);
    p.child = std::string(cells[col.at("child_id")]);
    if (!features.find(p.parent))
      throw ParseError(where(source, lineno) + "unresolved parent id '" + p.parent + "'");
    if (!features.find(p.child))
      throw ParseError(where(source, lineno) + "unresolved child id '" + p.child + "'");
    const long label = parse_int(cells[col.at("label")], source, lineno, "label");
    if (label != 0 && label != 1)
      throw ParseError(where(source, lineno) + "label must be 0 or 1, found " + std::to_string(label));
    p.label = static_cast<int>(label);
    if (has_fold) {
      const long fold = parse_int(cells[col.at("fold")], source, lineno, "fold");
      if (fold < 1 || fold > 5)
        throw ParseError(where(source, lineno) + "fold must lie in [1, 5], found " +
                         std::to_string(fold));
      p.fold = static_cast<int>(fold);
    }
    if (has_rel) {
      auto rel = parse_relation(cells[col.at("relation")]);
      if (!rel) {
        throw ParseError(where(source, lineno) + "unknown relation '" +
                         std::string(cells[col.at("relation")]) + "' (F-S, F-D, M-S, M-D, synthetic)");
      }
      p.relation = *rel;
    }
    (p.label == 1 ? set.positives : set.negatives).push_back(std::move(p));
  }
  if (!has_fold) {
    // Folds come later; check the rest against a single provisional fold.
    PairSet probe = set;
    for (auto& n : probe.negatives) n.fold = 0;
    try {
      probe.validate(&features);
    } catch (const UsageError& e) {
      throw ParseError(source + ": " + e.what());
    }
    return set;
  }
  try {
    set.validate(&features);
  } catch (const UsageError& e) {
    throw ParseError(source + ": " + e.what());
  }
  return set;
}

PairSet read_pairs(const std::filesystem::path& path, const FeatureTable& features,
                   FoldColumn fold_column) {
  auto in = open_in(path);
  return read_pairs(in, features, path.string(), fold_column);
}

}  // namespace gkr
