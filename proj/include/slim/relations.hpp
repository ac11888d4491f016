#pragma once

#include <array>
#include <bitset>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace slim {

/// The six inter-object spatial relation labels. The label of an ordered
/// pair (i, j) reads as "i <label> j", e.g. In means i is inside j.
enum class Relation : int { In = 0, On = 1, Contain = 2, Support = 3, Proximity = 4, Disjoint = 5 };

constexpr int kNumRelations = 6;

constexpr std::array<Relation, 6> kAllRelations = {
    Relation::In,      Relation::On,        Relation::Contain,
    Relation::Support, Relation::Proximity, Relation::Disjoint};

/// Label of the reversed pair: In <-> Contain, On <-> Support,
/// Proximity and Disjoint are symmetric.
Relation inverse(Relation r);

const char* to_string(Relation r);
std::optional<Relation> relation_from_string(std::string_view s);

/// Normalized belief over the relation label of an ordered object pair.
struct RelationBelief {
  int i = 0;
  int j = 0;
  std::array<double, kNumRelations> probs{};

  double prob(Relation r) const { return probs[static_cast<int>(r)]; }

  /// Belief over the reversed pair (j, i).
  RelationBelief reversed() const;
};

/// Per-class-pair relation frequencies, the evidence behind the unary
/// factors. Frequencies are ingested from a CSV file; entries flagged
/// invalid are stored as exactly 0.
class CommonsenseTable {
 public:
  /// Default potential for pairs with no entry at all: mostly Disjoint,
  /// a little Proximity.
  static constexpr std::array<double, kNumRelations> kDefaultPrior = {0, 0, 0, 0, 0.1, 0.9};

  /// Parse `class_i,class_j,relation,frequency[,invalid]` rows. Lines
  /// starting with '#' are kept as the provenance note. Throws
  /// std::runtime_error with the offending line number on bad input.
  static CommonsenseTable load(const std::string& path);

  void set(const std::string& ci, const std::string& cj, Relation r, double freq);

  /// Unary potential vector for the ordered pair (ci, cj). Uses direct
  /// entries first, then entries of the reversed pair mapped through
  /// inverse labels; a pair absent in both directions gets kDefaultPrior.
  std::array<double, kNumRelations> pair_potential(const std::string& ci,
                                                   const std::string& cj) const;

  bool has_pair(const std::string& ci, const std::string& cj) const;
  std::optional<double> get(const std::string& ci, const std::string& cj, Relation r) const;
  const std::string& provenance() const { return provenance_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::tuple<std::string, std::string, int>, double> entries_;
  std::string provenance_;
};

/// Total 0/1 predicate over relation label triples (R_ij, R_ik, R_jk) of
/// an object triple (i, j, k) deciding logical consistency.
///
/// The standard table is generated from a small qualitative model: each
/// object is an interval footprint plus a discrete height layer. In/Contain
/// mean strict footprint containment at the same layer; On/Support mean
/// containment one layer up (resting on top); Proximity means nearby
/// without any containment configuration; Disjoint means far apart. A
/// triple is consistent iff some placement of three such objects satisfies
/// all three labels. This yields In-transitivity, On-chains collapsing to
/// Proximity after two hops, and a permissive default for everything not
/// derivably contradictory.
class ConsistencyRules {
 public:
  static const ConsistencyRules& standard();

  /// Apply overrides from a CSV `r_ij,r_ik,r_jk,value` on top of a base
  /// rule set.
  static ConsistencyRules load_overrides(const std::string& path,
                                         const ConsistencyRules& base = standard());

  bool consistent(Relation r_ij, Relation r_ik, Relation r_jk) const;
  void set(Relation r_ij, Relation r_ik, Relation r_jk, bool value);

 private:
  static int index(Relation a, Relation b, Relation c);
  std::bitset<216> table_;
};

/// Standard-rule consistency factor, the trinary factor value.
int consistency_factor(Relation r_ij, Relation r_ik, Relation r_jk);

/// Factor graph over all pairwise relations of an object set: one variable
/// per canonical pair (i < j), a unary commonsense factor per variable and
/// a trinary consistency factor per object triple.
struct RelationFactorGraph {
  struct Variable {
    int i = 0;
    int j = 0;  // canonical pair, i < j
    std::array<double, kNumRelations> unary{};
  };
  struct TriFactor {
    int a = 0, b = 0, c = 0;          // object triple, a < b < c
    int v_ab = 0, v_ac = 0, v_bc = 0;  // variable indices
  };

  std::vector<std::string> classes;
  std::vector<Variable> variables;
  std::vector<TriFactor> factors;
  ConsistencyRules rules;

  int var_index(int i, int j) const;
};

/// Build the graph for >= 2 objects; unary potentials are the commonsense
/// pair potentials normalized to sum 1.
RelationFactorGraph build_factor_graph(const std::vector<std::string>& object_classes,
                                       const CommonsenseTable& table,
                                       const ConsistencyRules& rules = ConsistencyRules::standard());

struct BpOptions {
  int max_iters = 200;
  double tol = 1e-8;
  double damping = 0.5;
  /// Run exact clique-tree sum-product when the triangulated graph has
  /// cliques of at most this many variables; larger graphs use the damped
  /// flooding schedule. 0 forces flooding everywhere.
  int exact_max_clique = 6;
};

struct BpResult {
  std::map<std::pair<int, int>, RelationBelief> beliefs;  // canonical pairs
  bool converged = false;
  bool exact = false;  // clique-tree pass vs loopy fixed point
  int iterations = 0;
  double final_delta = 0.0;

  /// Belief for any ordered pair; reversed pairs are derived by label
  /// inversion.
  RelationBelief belief(int i, int j) const;
};

/// Sum-product belief propagation. Small graphs (triangulated clique size
/// within opts.exact_max_clique) get an exact two-pass clique-tree run;
/// larger graphs get the synchronous flooding schedule with damping, which
/// is exact on trees and approximate on loopy graphs. Throws on a variable
/// with an all-zero unary factor.
BpResult run_belief_propagation(const RelationFactorGraph& graph, const BpOptions& opts = {});

/// Exact marginals by full joint enumeration. Requires at most 8 canonical
/// variables (6^8 assignments); throws beyond that.
std::map<std::pair<int, int>, RelationBelief> brute_force_marginals(
    const RelationFactorGraph& graph);

}  // namespace slim
