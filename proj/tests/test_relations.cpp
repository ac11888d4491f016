#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "slim/geometry.hpp"
#include "slim/relations.hpp"

using namespace slim;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

CommonsenseTable random_table(const std::vector<std::string>& classes, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.02, 1.0);
  CommonsenseTable table;
  for (const auto& ci : classes) {
    for (const auto& cj : classes) {
      if (ci == cj) continue;
      for (Relation r : kAllRelations) table.set(ci, cj, r, uni(rng));
    }
  }
  return table;
}

double linf(const RelationBelief& a, const RelationBelief& b) {
  double m = 0.0;
  for (int r = 0; r < kNumRelations; ++r) m = std::max(m, std::abs(a.probs[r] - b.probs[r]));
  return m;
}

}  // namespace

TEST_CASE("relation label inverses") {
  CHECK(inverse(Relation::In) == Relation::Contain);
  CHECK(inverse(Relation::Contain) == Relation::In);
  CHECK(inverse(Relation::On) == Relation::Support);
  CHECK(inverse(Relation::Support) == Relation::On);
  CHECK(inverse(Relation::Proximity) == Relation::Proximity);
  CHECK(inverse(Relation::Disjoint) == Relation::Disjoint);

  RelationBelief b;
  b.i = 0;
  b.j = 1;
  b.probs = {0.4, 0.3, 0.1, 0.05, 0.1, 0.05};
  const auto r = b.reversed();
  CHECK(r.prob(Relation::Contain) == doctest::Approx(0.4));
  CHECK(r.prob(Relation::Support) == doctest::Approx(0.3));
  CHECK(r.prob(Relation::In) == doctest::Approx(0.1));
  CHECK(r.prob(Relation::Proximity) == doctest::Approx(0.1));
}

TEST_CASE("commonsense table ingestion") {
  const auto path = write_temp("cs_ok.csv",
                               "# test provenance\n"
                               "class_i,class_j,relation,frequency,invalid\n"
                               "cup,table,On,0.6,0\n"
                               "laptop,kitchen_counter,On,0.2,1\n");
  const auto table = CommonsenseTable::load(path);
  CHECK(table.get("cup", "table", Relation::On) == 0.6);
  // invalid-expression rows are stored as exactly zero
  CHECK(table.get("laptop", "kitchen_counter", Relation::On) == 0.0);
  CHECK(table.provenance() == "test provenance");

  // absent pair falls back to the default prior
  const auto def = table.pair_potential("cup", "sofa");
  CHECK(def == CommonsenseTable::kDefaultPrior);

  // reversed lookup goes through label inverses
  const auto rev = table.pair_potential("table", "cup");
  CHECK(rev[static_cast<int>(Relation::Support)] == 0.6);
  CHECK(rev[static_cast<int>(Relation::On)] == 0.0);
}

TEST_CASE("commonsense table rejects bad rows with line numbers") {
  const auto bad_freq = write_temp("cs_bad1.csv",
                                   "class_i,class_j,relation,frequency\n"
                                   "cup,table,On,1.5\n");
  CHECK_THROWS_WITH_AS(CommonsenseTable::load(bad_freq), doctest::Contains(":2:"),
                       std::runtime_error);

  const auto bad_rel = write_temp("cs_bad2.csv",
                                  "class_i,class_j,relation,frequency\n"
                                  "cup,table,Under,0.5\n");
  CHECK_THROWS_WITH_AS(CommonsenseTable::load(bad_rel), doctest::Contains("Under"),
                       std::runtime_error);
}

TEST_CASE("consistency factor pinned entries") {
  CHECK(consistency_factor(Relation::In, Relation::In, Relation::In) == 1);
  CHECK(consistency_factor(Relation::In, Relation::Disjoint, Relation::In) == 0);
  CHECK(consistency_factor(Relation::Disjoint, Relation::Disjoint, Relation::Disjoint) == 1);
  // two-hop On chain closes as Proximity, not On
  CHECK(consistency_factor(Relation::On, Relation::Proximity, Relation::On) == 1);
  CHECK(consistency_factor(Relation::On, Relation::On, Relation::On) == 0);
  CHECK(consistency_factor(Relation::On, Relation::Disjoint, Relation::On) == 0);
  // being inside one (possibly big) object does not bound relations to a
  // third object; only containment chains do
  CHECK(consistency_factor(Relation::In, Relation::Disjoint, Relation::Proximity) == 1);
  CHECK(consistency_factor(Relation::In, Relation::Proximity, Relation::Proximity) == 1);
}

TEST_CASE("consistency factor is invariant under consistent relabelings") {
  const auto& rules = ConsistencyRules::standard();
  for (Relation a : kAllRelations) {
    for (Relation b : kAllRelations) {
      for (Relation c : kAllRelations) {
        const bool base = rules.consistent(a, b, c);
        CHECK(rules.consistent(inverse(a), c, b) == base);           // swap i, j
        CHECK(rules.consistent(b, a, inverse(c)) == base);           // swap j, k
        CHECK(rules.consistent(inverse(c), inverse(b), inverse(a)) == base);  // swap i, k
      }
    }
  }
}

TEST_CASE("consistency rule overrides") {
  const auto path = write_temp("rules_override.csv",
                               "r_ij,r_ik,r_jk,value\n"
                               "Disjoint,Disjoint,Disjoint,0\n");
  const auto rules = ConsistencyRules::load_overrides(path);
  CHECK_FALSE(rules.consistent(Relation::Disjoint, Relation::Disjoint, Relation::Disjoint));
  CHECK(rules.consistent(Relation::In, Relation::In, Relation::In));
}

TEST_CASE("factor graph counts") {
  Rng rng(1);
  const std::vector<std::string> three = {"a", "b", "c"};
  auto g3 = build_factor_graph(three, random_table(three, rng));
  CHECK(g3.variables.size() == 3);
  CHECK(g3.factors.size() == 1);

  std::vector<std::string> seven;
  for (int i = 0; i < 7; ++i) seven.push_back("c" + std::to_string(i));
  auto g7 = build_factor_graph(seven, random_table(seven, rng));
  CHECK(g7.variables.size() == 21);
  CHECK(g7.factors.size() == 35);

  const std::vector<std::string> two = {"a", "b"};
  auto g2 = build_factor_graph(two, random_table(two, rng));
  CHECK(g2.variables.size() == 1);
  CHECK(g2.factors.size() == 0);

  CHECK_THROWS_AS(build_factor_graph({"a"}, random_table(two, rng)), std::invalid_argument);
}

TEST_CASE("two-object marginal equals the normalized unary exactly") {
  CommonsenseTable table;
  table.set("a", "b", Relation::On, 0.6);
  table.set("a", "b", Relation::Proximity, 0.2);
  table.set("a", "b", Relation::Disjoint, 0.2);
  auto g = build_factor_graph({"a", "b"}, table);
  for (bool loopy : {false, true}) {
    BpOptions opts;
    if (loopy) opts.exact_max_clique = 0;
    auto bp = run_belief_propagation(g, opts);
    CHECK(bp.converged);
    CHECK(bp.belief(0, 1).prob(Relation::On) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(bp.belief(0, 1).prob(Relation::Proximity) == doctest::Approx(0.2).epsilon(1e-12));
    // reversed pair via inverse labels
    CHECK(bp.belief(1, 0).prob(Relation::Support) == doctest::Approx(0.6).epsilon(1e-12));
  }
}

TEST_CASE("three-object graph with uniform evidence matches enumeration") {
  CommonsenseTable table;
  for (const char* ci : {"a", "b", "c"}) {
    for (const char* cj : {"a", "b", "c"}) {
      if (std::string(ci) == cj) continue;
      for (Relation r : kAllRelations) table.set(ci, cj, r, 1.0);
    }
  }
  auto g = build_factor_graph({"a", "b", "c"}, table);
  auto bp = run_belief_propagation(g);
  auto bf = brute_force_marginals(g);
  for (const auto& [pair, belief] : bf) {
    CHECK(linf(belief, bp.beliefs.at(pair)) < 1e-9);
  }
}

TEST_CASE("hard evidence conditions the other pairs (hand enumeration)") {
  CommonsenseTable table;
  // force R_ab = In; leave the other pairs open
  table.set("a", "b", Relation::In, 1.0);
  for (const char* cj : {"c"}) {
    for (const char* ci : {"a", "b"}) {
      for (Relation r : kAllRelations) table.set(ci, cj, r, 1.0);
      (void)cj;
    }
  }
  auto g = build_factor_graph({"a", "b", "c"}, table);
  auto bf = brute_force_marginals(g);

  // independent enumeration over the <= 36 completions consistent with In
  const auto& rules = ConsistencyRules::standard();
  std::array<double, kNumRelations> m_ac{}, m_bc{};
  int count = 0;
  for (Relation r_ac : kAllRelations) {
    for (Relation r_bc : kAllRelations) {
      if (!rules.consistent(Relation::In, r_ac, r_bc)) continue;
      ++count;
      m_ac[static_cast<int>(r_ac)] += 1.0;
      m_bc[static_cast<int>(r_bc)] += 1.0;
    }
  }
  CHECK(count <= 36);
  CHECK(count > 0);
  for (int r = 0; r < kNumRelations; ++r) {
    CHECK(bf.at({0, 2}).probs[r] == doctest::Approx(m_ac[r] / count).epsilon(1e-12));
    CHECK(bf.at({1, 2}).probs[r] == doctest::Approx(m_bc[r] / count).epsilon(1e-12));
  }
  CHECK(bf.at({0, 1}).prob(Relation::In) == doctest::Approx(1.0));
}

TEST_CASE("bp matches brute force on random graphs up to four objects") {
  std::mt19937_64 seeder(20250809);
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    Rng rng(seeder());
    const int n = 2 + static_cast<int>(rng() % 3);
    std::vector<std::string> classes;
    for (int i = 0; i < n; ++i) classes.push_back("c" + std::to_string(i));
    auto g = build_factor_graph(classes, random_table(classes, rng));
    auto bp = run_belief_propagation(g);
    auto bf = brute_force_marginals(g);
    for (const auto& [pair, belief] : bf) {
      worst = std::max(worst, linf(belief, bp.beliefs.at(pair)));
    }
    // inverse-relation symmetry on every output belief
    for (const auto& [pair, belief] : bp.beliefs) {
      const auto rev = bp.belief(pair.second, pair.first);
      CHECK(rev.prob(Relation::In) == doctest::Approx(belief.prob(Relation::Contain)));
      CHECK(rev.prob(Relation::Support) == doctest::Approx(belief.prob(Relation::On)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("belief propagation rejects degenerate evidence") {
  CommonsenseTable table;
  table.set("a", "b", Relation::In, 0.0);  // only entry, all-zero unary
  auto g = build_factor_graph({"a", "b"}, table);
  CHECK_THROWS_AS(run_belief_propagation(g), std::runtime_error);
}

TEST_CASE("enumeration cap") {
  Rng rng(3);
  std::vector<std::string> five;
  for (int i = 0; i < 5; ++i) five.push_back("c" + std::to_string(i));
  auto g = build_factor_graph(five, random_table(five, rng));  // 10 variables
  CHECK_THROWS_AS(brute_force_marginals(g), std::runtime_error);
}

TEST_CASE("loopy flooding path reports convergence on loopy graphs") {
  Rng rng(11);
  std::vector<std::string> four;
  for (int i = 0; i < 4; ++i) four.push_back("c" + std::to_string(i));
  auto g = build_factor_graph(four, random_table(four, rng));
  BpOptions opts;
  opts.exact_max_clique = 0;  // force the flooding schedule
  auto bp = run_belief_propagation(g, opts);
  CHECK_FALSE(bp.exact);
  CHECK(bp.iterations > 1);
  for (const auto& [pair, belief] : bp.beliefs) {
    double sum = 0.0;
    for (double p : belief.probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    (void)pair;
  }
}
