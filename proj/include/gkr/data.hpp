#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gkr {

enum class Role { Parent, Child };
std::string_view to_string(Role role);

/// Parent–child relation tag. Synthetic marks pairs without a real relation.
enum class Relation { FatherSon, FatherDaughter, MotherSon, MotherDaughter, Synthetic };
std::string_view to_string(Relation relation);
std::optional<Relation> parse_relation(std::string_view text);
/// F-S, F-D, M-S, M-D: the column order of the per-relation report.
inline constexpr Relation kTableRelations[] = {Relation::FatherSon, Relation::FatherDaughter,
                                               Relation::MotherSon, Relation::MotherDaughter};

/// N rows of D features, each with a unique identifier and a role.
class FeatureTable {
 public:
  explicit FeatureTable(std::size_t dim = 0) : dim_(dim) {}

  /// Throws UsageError on a duplicate id or a row of the wrong width.
  void add(std::string id, Role role, std::span<const double> values);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::string& id(std::size_t row) const { return ids_[row]; }
  Role role(std::size_t row) const { return roles_[row]; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * dim_, dim_}; }

  std::optional<std::size_t> find(std::string_view id) const;
  /// Row of `id`; throws UsageError when absent.
  std::size_t index(std::string_view id) const;
  std::span<const double> features(std::string_view id) const { return row(index(id)); }

  friend bool operator==(const FeatureTable& a, const FeatureTable& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.roles_ == b.roles_ && a.values_ == b.values_;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<Role> roles_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct KinPair {
  std::string parent;
  std::string child;
  int label = 1;
  int fold = 0;  // 0 = unassigned
  Relation relation = Relation::Synthetic;

  friend bool operator==(const KinPair&, const KinPair&) = default;
};

/// Positive set P plus its balanced negative set N'.
struct PairSet {
  std::vector<KinPair> positives;
  std::vector<KinPair> negatives;

  /// Positives followed by negatives.
  std::vector<KinPair> all() const;
  std::vector<int> folds() const;
  /// Balance, self-pair and fold-inheritance invariants; ids must resolve in
  /// `features` when given. Throws UsageError naming the offending pair.
  void validate(const FeatureTable* features = nullptr) const;

  friend bool operator==(const PairSet&, const PairSet&) = default;
};

/// Assigns folds 1..k to positives with all-zero folds (shuffled round-robin,
/// sizes within one of each other), or validates an existing assignment.
void make_folds(std::vector<KinPair>& positives, int k, std::uint64_t seed);

/// Copies each parent's fold onto its negative pairs (after make_folds).
void inherit_negative_folds(PairSet& pairs);

/// Draws |P_f| distinct non-kin pairs (parent_i, child_j), i ≠ j, uniformly
/// without replacement inside each fold f, so every negative shares its
/// parent's fold and never pairs a parent with its own child.
std::vector<KinPair> build_negative_set(std::span<const KinPair> positives, std::uint64_t seed);

/// Desk-scale heritable-trait generator.
///
/// genome g ~ N(0, I_G); parent = tanh(M_p g + σε); child = tanh(M_c(ρg + √(1−ρ²)g') + σε').
/// M_p routes gene (d mod G) to observed dimension d plus `mixing` · N(0, 1/G)
/// cross-talk; M_c is M_p with the sign of a `flip_fraction` share of rows
/// reversed (traits that express inversely in the child).
struct SynthSpec {
  std::size_t families = 500;
  std::size_t genome_dim = 8;
  std::size_t dim = 16;
  double rho = 0.8;
  double sigma = 0.3;
  double mixing = 0.3;
  double flip_fraction = 0.5;
  int folds = 5;
  bool tag_relations = true;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthData {
  FeatureTable features;
  PairSet pairs;
  /// Mixing maps, D×G, row-major; exposed for tests.
  std::vector<double> parent_map;
  std::vector<double> child_map;
};

SynthData gen_synthetic(const SynthSpec& spec);

/// CSV `id,role,f0..f{D-1}`; doubles in shortest round-trip form.
void write_features(std::ostream& out, const FeatureTable& table);
void write_features(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable read_features(std::istream& in, const std::string& source = "<stream>");
FeatureTable read_features(const std::filesystem::path& path);

enum class FoldColumn { Required, Optional };

/// CSV `parent_id,child_id,label,fold,relation`.
void write_pairs(std::ostream& out, const PairSet& pairs);
void write_pairs(const std::filesystem::path& path, const PairSet& pairs);
PairSet read_pairs(std::istream& in, const FeatureTable& features,
                   const std::string& source = "<stream>",
                   FoldColumn fold_column = FoldColumn::Required);
PairSet read_pairs(const std::filesystem::path& path, const FeatureTable& features,
                   FoldColumn fold_column = FoldColumn::Required);

}  // namespace gkr
