#include "slim/relations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace slim {

Relation inverse(Relation r) {
  switch (r) {
    case Relation::In: return Relation::Contain;
    case Relation::Contain: return Relation::In;
    case Relation::On: return Relation::Support;
    case Relation::Support: return Relation::On;
    case Relation::Proximity: return Relation::Proximity;
    case Relation::Disjoint: return Relation::Disjoint;
  }
  return Relation::Disjoint;
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::In: return "In";
    case Relation::On: return "On";
    case Relation::Contain: return "Contain";
    case Relation::Support: return "Support";
    case Relation::Proximity: return "Proximity";
    case Relation::Disjoint: return "Disjoint";
  }
  return "?";
}

std::optional<Relation> relation_from_string(std::string_view s) {
  for (Relation r : kAllRelations) {
    if (s == to_string(r)) return r;
  }
  return std::nullopt;
}

RelationBelief RelationBelief::reversed() const {
  RelationBelief out;
  out.i = j;
  out.j = i;
  for (Relation r : kAllRelations) {
    out.probs[static_cast<int>(inverse(r))] = probs[static_cast<int>(r)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// CommonsenseTable

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

CommonsenseTable CommonsenseTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open commonsense table: " + path);

  CommonsenseTable table;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (!table.provenance_.empty()) table.provenance_ += "\n";
      table.provenance_ += trim(t.substr(1));
      continue;
    }
    auto fields = split_csv_line(t);
    if (!header_seen) {
      if (fields.size() < 4 || fields[0] != "class_i" || fields[1] != "class_j" ||
          fields[2] != "relation" || fields[3] != "frequency") {
        parse_fail(path, line_no, "expected header class_i,class_j,relation,frequency");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 4 && fields.size() != 5) {
      parse_fail(path, line_no, "expected 4 or 5 fields, got " + std::to_string(fields.size()));
    }
    const auto rel = relation_from_string(fields[2]);
    if (!rel) parse_fail(path, line_no, "unknown relation '" + fields[2] + "'");
    double freq = 0.0;
    try {
      freq = std::stod(fields[3]);
    } catch (const std::exception&) {
      parse_fail(path, line_no, "bad frequency '" + fields[3] + "'");
    }
    if (!(freq >= 0.0 && freq <= 1.0)) {
      parse_fail(path, line_no, "frequency out of [0,1]: " + fields[3]);
    }
    bool invalid = false;
    if (fields.size() == 5 && !fields[4].empty()) {
      if (fields[4] == "1") {
        invalid = true;
      } else if (fields[4] != "0") {
        parse_fail(path, line_no, "invalid flag must be 0 or 1, got '" + fields[4] + "'");
      }
    }
    table.set(fields[0], fields[1], *rel, invalid ? 0.0 : freq);
  }
  if (!header_seen) throw std::runtime_error(path + ": empty commonsense table");
  return table;
}

void CommonsenseTable::set(const std::string& ci, const std::string& cj, Relation r, double freq) {
  entries_[{ci, cj, static_cast<int>(r)}] = freq;
}

std::optional<double> CommonsenseTable::get(const std::string& ci, const std::string& cj,
                                            Relation r) const {
  const auto it = entries_.find({ci, cj, static_cast<int>(r)});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool CommonsenseTable::has_pair(const std::string& ci, const std::string& cj) const {
  for (Relation r : kAllRelations) {
    if (get(ci, cj, r)) return true;
  }
  return false;
}

std::array<double, kNumRelations> CommonsenseTable::pair_potential(const std::string& ci,
                                                                   const std::string& cj) const {
  const bool fwd = has_pair(ci, cj);
  const bool rev = has_pair(cj, ci);
  if (!fwd && !rev) return kDefaultPrior;

  std::array<double, kNumRelations> pot{};
  for (Relation r : kAllRelations) {
    if (auto v = get(ci, cj, r)) {
      pot[static_cast<int>(r)] = *v;
    } else if (auto w = get(cj, ci, inverse(r))) {
      pot[static_cast<int>(r)] = *w;
    }
  }
  return pot;
}

// ---------------------------------------------------------------------------
// ConsistencyRules

namespace {

// Qualitative placement of one object: interval footprint [x-r, x+r] on a
// line plus a height layer. Containment is strict interval containment.
// The radius range includes room-scale containers, so something inside or
// on a big object can still sit near a third object that the big object's
// center is far from; only containment *chains* bound the closing pair.
struct QualConfig {
  int x;
  int r;
  int layer;
};

constexpr int kNear = 8;
constexpr int kFar = 16;

bool contains_fp(const QualConfig& outer, const QualConfig& inner) {
  return outer.x - outer.r < inner.x - inner.r && inner.x + inner.r < outer.x + outer.r;
}

bool in_cfg(const QualConfig& a, const QualConfig& b) {
  return a.layer == b.layer && contains_fp(b, a);
}

bool on_cfg(const QualConfig& a, const QualConfig& b) {
  return a.layer == b.layer + 1 && contains_fp(b, a);
}

bool label_holds(Relation r, const QualConfig& a, const QualConfig& b) {
  const int d = std::abs(a.x - b.x);
  switch (r) {
    case Relation::In: return in_cfg(a, b);
    case Relation::On: return on_cfg(a, b);
    case Relation::Contain: return in_cfg(b, a);
    case Relation::Support: return on_cfg(b, a);
    case Relation::Proximity:
      return d <= kNear && !in_cfg(a, b) && !in_cfg(b, a) && !on_cfg(a, b) && !on_cfg(b, a);
    case Relation::Disjoint:
      return d >= kFar;
  }
  return false;
}

std::vector<QualConfig> all_configs() {
  static const int xs[] = {-18, -16, -12, -10, -8, -6, -4, -2, -1, 0,
                           1,   2,   4,   6,   8,  10, 12, 16, 18};
  static const int rs[] = {1, 2, 4, 12};
  std::vector<QualConfig> cfgs;
  for (int x : xs)
    for (int r : rs)
      for (int layer = 0; layer < 3; ++layer) cfgs.push_back({x, r, layer});
  return cfgs;
}

}  // namespace

int ConsistencyRules::index(Relation a, Relation b, Relation c) {
  return static_cast<int>(a) * 36 + static_cast<int>(b) * 6 + static_cast<int>(c);
}

bool ConsistencyRules::consistent(Relation r_ij, Relation r_ik, Relation r_jk) const {
  return table_[index(r_ij, r_ik, r_jk)];
}

void ConsistencyRules::set(Relation r_ij, Relation r_ik, Relation r_jk, bool value) {
  table_[index(r_ij, r_ik, r_jk)] = value;
}

const ConsistencyRules& ConsistencyRules::standard() {
  static const ConsistencyRules rules = [] {
    const auto cfgs = all_configs();
    const int n = static_cast<int>(cfgs.size());

    // sat[r][a] = bitmask over configs b with label_holds(r, cfgs[a], cfgs[b])
    std::vector<std::vector<std::bitset<256>>> sat(
        kNumRelations, std::vector<std::bitset<256>>(n));
    for (int r = 0; r < kNumRelations; ++r) {
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          if (label_holds(static_cast<Relation>(r), cfgs[a], cfgs[b])) sat[r][a][b] = true;
        }
      }
    }

    ConsistencyRules out;
    for (Relation r_ij : kAllRelations) {
      // pairs (ci, cj) realizing r_ij
      std::vector<std::pair<int, int>> pairs;
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          if (label_holds(r_ij, cfgs[a], cfgs[b])) pairs.emplace_back(a, b);
        }
      }
      for (Relation r_ik : kAllRelations) {
        for (Relation r_jk : kAllRelations) {
          bool ok = false;
          const auto& sik = sat[static_cast<int>(r_ik)];
          const auto& sjk = sat[static_cast<int>(r_jk)];
          for (const auto& [ci, cj] : pairs) {
            if ((sik[ci] & sjk[cj]).any()) {
              ok = true;
              break;
            }
          }
          out.set(r_ij, r_ik, r_jk, ok);
        }
      }
    }
    return out;
  }();
  return rules;
}

ConsistencyRules ConsistencyRules::load_overrides(const std::string& path,
                                                  const ConsistencyRules& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open consistency rules: " + path);
  ConsistencyRules rules = base;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto fields = split_csv_line(t);
    if (fields.size() == 4 && fields[0] == "r_ij") continue;  // header
    if (fields.size() != 4) parse_fail(path, line_no, "expected r_ij,r_ik,r_jk,value");
    std::array<Relation, 3> rs{};
    for (int k = 0; k < 3; ++k) {
      const auto r = relation_from_string(fields[k]);
      if (!r) parse_fail(path, line_no, "unknown relation '" + fields[k] + "'");
      rs[k] = *r;
    }
    if (fields[3] != "0" && fields[3] != "1") parse_fail(path, line_no, "value must be 0 or 1");
    rules.set(rs[0], rs[1], rs[2], fields[3] == "1");
  }
  return rules;
}

int consistency_factor(Relation r_ij, Relation r_ik, Relation r_jk) {
  return ConsistencyRules::standard().consistent(r_ij, r_ik, r_jk) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Factor graph

int RelationFactorGraph::var_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  for (std::size_t v = 0; v < variables.size(); ++v) {
    if (variables[v].i == i && variables[v].j == j) return static_cast<int>(v);
  }
  throw std::out_of_range("no relation variable for pair");
}

RelationFactorGraph build_factor_graph(const std::vector<std::string>& object_classes,
                                       const CommonsenseTable& table,
                                       const ConsistencyRules& rules) {
  const int n = static_cast<int>(object_classes.size());
  if (n < 2) throw std::invalid_argument("factor graph needs at least 2 objects");

  RelationFactorGraph g;
  g.classes = object_classes;
  g.rules = rules;

  std::map<std::pair<int, int>, int> var_of;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      RelationFactorGraph::Variable v;
      v.i = i;
      v.j = j;
      v.unary = table.pair_potential(object_classes[i], object_classes[j]);
      double sum = 0.0;
      for (double x : v.unary) sum += x;
      if (sum > 0.0) {
        for (double& x : v.unary) x /= sum;
      }
      var_of[{i, j}] = static_cast<int>(g.variables.size());
      g.variables.push_back(v);
    }
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (int c = b + 1; c < n; ++c) {
        RelationFactorGraph::TriFactor f;
        f.a = a;
        f.b = b;
        f.c = c;
        f.v_ab = var_of[{a, b}];
        f.v_ac = var_of[{a, c}];
        f.v_bc = var_of[{b, c}];
        g.factors.push_back(f);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

using Msg = std::array<double, kNumRelations>;

void normalize_msg(Msg& m) {
  double s = 0.0;
  for (double v : m) s += v;
  if (s <= 0.0) {
    m.fill(1.0 / kNumRelations);
  } else {
    for (double& v : m) v /= s;
  }
}

RelationBelief make_belief(int i, int j, const Msg& m) {
  RelationBelief b;
  b.i = i;
  b.j = j;
  b.probs = m;
  double s = 0.0;
  for (double v : b.probs) s += v;
  for (double& v : b.probs) v /= s;
  return b;
}

}  // namespace

RelationBelief BpResult::belief(int i, int j) const {
  const bool swap = i > j;
  const auto it = beliefs.find(swap ? std::make_pair(j, i) : std::make_pair(i, j));
  if (it == beliefs.end()) throw std::out_of_range("no belief for pair");
  return swap ? it->second.reversed() : it->second;
}

namespace {

// --- exact clique-tree pass ------------------------------------------------

struct CliqueNode {
  std::vector<int> vars;        // sorted variable ids
  std::vector<double> table;    // mixed-radix over vars
  int parent = -1;              // clique-tree edge toward the root
  std::vector<int> sep;         // separator with parent
};

std::size_t table_size(const std::vector<int>& vars) {
  std::size_t s = 1;
  for (std::size_t k = 0; k < vars.size(); ++k) s *= kNumRelations;
  return s;
}

// Elimination-order triangulation with a min-fill heuristic. Returns the
// elimination cliques (eliminated variable + its then-neighbors), or
// nullopt if some clique would exceed max_clique variables.
std::optional<std::vector<std::vector<int>>> elimination_cliques(
    int nv, const std::vector<std::vector<char>>& adj_in, int max_clique) {
  auto adj = adj_in;
  std::vector<char> gone(nv, 0);
  std::vector<std::vector<int>> cliques;
  for (int step = 0; step < nv; ++step) {
    int best = -1;
    long best_fill = -1;
    for (int v = 0; v < nv; ++v) {
      if (gone[v]) continue;
      std::vector<int> nb;
      for (int u = 0; u < nv; ++u)
        if (!gone[u] && u != v && adj[v][u]) nb.push_back(u);
      long fill = 0;
      for (std::size_t a = 0; a < nb.size(); ++a)
        for (std::size_t b = a + 1; b < nb.size(); ++b)
          if (!adj[nb[a]][nb[b]]) ++fill;
      if (best < 0 || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    std::vector<int> clique{best};
    for (int u = 0; u < nv; ++u)
      if (!gone[u] && u != best && adj[best][u]) clique.push_back(u);
    if (static_cast<int>(clique.size()) > max_clique) return std::nullopt;
    std::sort(clique.begin(), clique.end());
    cliques.push_back(clique);
    for (std::size_t a = 1; a < clique.size(); ++a)
      for (std::size_t b = a + 1; b < clique.size(); ++b) {
        adj[clique[a]][clique[b]] = 1;
        adj[clique[b]][clique[a]] = 1;
      }
    gone[best] = 1;
  }
  return cliques;
}

void multiply_into(CliqueNode& node, const std::vector<int>& scope,
                   const std::vector<double>& values) {
  // positions of scope vars within node.vars
  std::vector<int> pos(scope.size());
  for (std::size_t k = 0; k < scope.size(); ++k) {
    const auto it = std::find(node.vars.begin(), node.vars.end(), scope[k]);
    pos[k] = static_cast<int>(it - node.vars.begin());
  }
  const std::size_t n = node.table.size();
  std::vector<int> digits(node.vars.size(), 0);
  for (std::size_t code = 0; code < n; ++code) {
    std::size_t rest = code;
    for (std::size_t d = 0; d < node.vars.size(); ++d) {
      digits[d] = static_cast<int>(rest % kNumRelations);
      rest /= kNumRelations;
    }
    std::size_t scode = 0;
    for (std::size_t k = scope.size(); k-- > 0;) scode = scode * kNumRelations + digits[pos[k]];
    node.table[code] *= values[scode];
  }
}

std::vector<double> marginalize_to(const CliqueNode& node, const std::vector<int>& keep) {
  std::vector<int> pos(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto it = std::find(node.vars.begin(), node.vars.end(), keep[k]);
    pos[k] = static_cast<int>(it - node.vars.begin());
  }
  std::vector<double> out(table_size(keep), 0.0);
  std::vector<int> digits(node.vars.size(), 0);
  for (std::size_t code = 0; code < node.table.size(); ++code) {
    std::size_t rest = code;
    for (std::size_t d = 0; d < node.vars.size(); ++d) {
      digits[d] = static_cast<int>(rest % kNumRelations);
      rest /= kNumRelations;
    }
    std::size_t scode = 0;
    for (std::size_t k = keep.size(); k-- > 0;) scode = scode * kNumRelations + digits[pos[k]];
    out[scode] += node.table[code];
  }
  return out;
}

void normalize_table(std::vector<double>& t) {
  double s = 0.0;
  for (double v : t) s += v;
  if (s > 0.0)
    for (double& v : t) v /= s;
}

std::optional<BpResult> run_clique_tree(const RelationFactorGraph& graph, int max_clique) {
  const int nv = static_cast<int>(graph.variables.size());
  std::vector<std::vector<char>> adj(nv, std::vector<char>(nv, 0));
  for (const auto& f : graph.factors) {
    const int vs[3] = {f.v_ab, f.v_ac, f.v_bc};
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) {
        adj[vs[a]][vs[b]] = 1;
        adj[vs[b]][vs[a]] = 1;
      }
  }
  auto cliques_opt = elimination_cliques(nv, adj, max_clique);
  if (!cliques_opt) return std::nullopt;
  auto& cliques = *cliques_opt;

  // Drop cliques contained in a later one (elimination order guarantees the
  // containing clique appears after).
  std::vector<CliqueNode> nodes;
  std::vector<int> keep_index(cliques.size(), -1);
  for (std::size_t c = 0; c < cliques.size(); ++c) {
    bool contained = false;
    for (std::size_t d = c + 1; d < cliques.size() && !contained; ++d) {
      contained = std::includes(cliques[d].begin(), cliques[d].end(), cliques[c].begin(),
                                cliques[c].end());
    }
    if (contained) continue;
    keep_index[c] = static_cast<int>(nodes.size());
    CliqueNode node;
    node.vars = cliques[c];
    node.table.assign(table_size(node.vars), 1.0);
    nodes.push_back(std::move(node));
  }

  // Clique tree: connect each node to the first later elimination clique
  // containing its separator (running intersection property of elimination
  // orders). The last node is the root.
  for (std::size_t c = 0; c < cliques.size(); ++c) {
    const int me = keep_index[c];
    if (me < 0) continue;
    // separator = clique minus the variable eliminated at step c (front of
    // the pre-sort clique was the eliminated var; recompute as vars present
    // in any later clique)
    std::vector<int> sep;
    for (int v : nodes[me].vars) {
      bool later = false;
      for (std::size_t d = c + 1; d < cliques.size() && !later; ++d)
        later = std::binary_search(cliques[d].begin(), cliques[d].end(), v);
      if (later) sep.push_back(v);
    }
    if (sep.empty()) continue;  // root of its connected component
    for (std::size_t d = c + 1; d < cliques.size(); ++d) {
      if (keep_index[d] < 0) continue;
      if (std::includes(cliques[d].begin(), cliques[d].end(), sep.begin(), sep.end())) {
        nodes[me].parent = keep_index[d];
        nodes[me].sep = sep;
        break;
      }
    }
  }

  // Assign factors to cliques.
  auto find_home = [&](const std::vector<int>& scope) -> CliqueNode& {
    for (auto& node : nodes) {
      if (std::includes(node.vars.begin(), node.vars.end(), scope.begin(), scope.end()))
        return node;
    }
    throw std::logic_error("clique tree misses a factor scope");
  };
  for (int v = 0; v < nv; ++v) {
    std::vector<double> unary(graph.variables[v].unary.begin(), graph.variables[v].unary.end());
    multiply_into(find_home({v}), {v}, unary);
  }
  for (const auto& f : graph.factors) {
    std::vector<int> scope = {f.v_ab, f.v_ac, f.v_bc};
    std::sort(scope.begin(), scope.end());
    std::vector<double> values(216, 0.0);
    // scope is sorted; recover which slot each scope var is
    for (int x0 = 0; x0 < kNumRelations; ++x0)
      for (int x1 = 0; x1 < kNumRelations; ++x1)
        for (int x2 = 0; x2 < kNumRelations; ++x2) {
          // assignment by scope order
          int by_var[3] = {x0, x1, x2};
          auto value_of = [&](int var) {
            for (int k = 0; k < 3; ++k)
              if (scope[k] == var) return by_var[k];
            return 0;
          };
          const bool ok = graph.rules.consistent(static_cast<Relation>(value_of(f.v_ab)),
                                                 static_cast<Relation>(value_of(f.v_ac)),
                                                 static_cast<Relation>(value_of(f.v_bc)));
          values[(x2 * kNumRelations + x1) * kNumRelations + x0] = ok ? 1.0 : 0.0;
        }
    multiply_into(find_home(scope), scope, values);
  }

  // Upward pass: children listed before parents by construction.
  std::vector<std::vector<double>> up_msg(nodes.size());
  for (std::size_t c = 0; c < nodes.size(); ++c) {
    CliqueNode tmp = nodes[c];
    // fold in messages from children already processed
    for (std::size_t d = 0; d < c; ++d) {
      if (nodes[d].parent == static_cast<int>(c)) multiply_into(tmp, nodes[d].sep, up_msg[d]);
    }
    if (nodes[c].parent >= 0) {
      up_msg[c] = marginalize_to(tmp, nodes[c].sep);
      normalize_table(up_msg[c]);
    }
    nodes[c].table = std::move(tmp.table);  // cache folded table
  }
  // nodes[c].table now holds its potential times all child messages; the
  // downward pass divides out nothing because we recompute beliefs directly:
  // belief(root) is final; for others multiply parent's message.
  std::vector<std::vector<double>> down_msg(nodes.size());
  for (std::size_t c = nodes.size(); c-- > 0;) {
    const int p = nodes[c].parent;
    if (p < 0) continue;
    CliqueNode tmp;
    tmp.vars = nodes[p].vars;
    tmp.table = nodes[p].table;  // includes all children messages
    if (!down_msg[p].empty()) multiply_into(tmp, nodes[p].sep, down_msg[p]);
    // divide out this child's own upward contribution
    std::vector<double> inv = up_msg[c];
    for (double& x : inv) x = (x > 0.0) ? 1.0 / x : 0.0;
    multiply_into(tmp, nodes[c].sep, inv);
    down_msg[c] = marginalize_to(tmp, nodes[c].sep);
    normalize_table(down_msg[c]);
  }

  BpResult result;
  result.converged = true;
  result.exact = true;
  result.iterations = 2;  // one collect and one distribute pass
  for (int v = 0; v < nv; ++v) {
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      if (!std::binary_search(nodes[c].vars.begin(), nodes[c].vars.end(), v)) continue;
      CliqueNode tmp;
      tmp.vars = nodes[c].vars;
      tmp.table = nodes[c].table;
      if (!down_msg[c].empty()) multiply_into(tmp, nodes[c].sep, down_msg[c]);
      auto m = marginalize_to(tmp, {v});
      const auto& var = graph.variables[v];
      Msg msg{};
      for (int r = 0; r < kNumRelations; ++r) msg[r] = m[r];
      result.beliefs[{var.i, var.j}] = make_belief(var.i, var.j, msg);
      break;
    }
  }
  return result;
}

}  // namespace

BpResult run_belief_propagation(const RelationFactorGraph& graph, const BpOptions& opts) {
  const int nv = static_cast<int>(graph.variables.size());
  const int nf = static_cast<int>(graph.factors.size());

  for (const auto& v : graph.variables) {
    double s = 0.0;
    for (double x : v.unary) s += x;
    if (s <= 0.0) {
      throw std::runtime_error("all-zero unary potential for pair (" + std::to_string(v.i) + "," +
                               std::to_string(v.j) + ")");
    }
  }

  if (opts.exact_max_clique > 0) {
    if (auto exact = run_clique_tree(graph, opts.exact_max_clique)) return *exact;
  }

  // factor slot -> variable index, and per-variable incident (factor, slot)
  std::vector<std::array<int, 3>> fvars(nf);
  std::vector<std::vector<std::pair<int, int>>> incident(nv);
  for (int f = 0; f < nf; ++f) {
    fvars[f] = {graph.factors[f].v_ab, graph.factors[f].v_ac, graph.factors[f].v_bc};
    for (int s = 0; s < 3; ++s) incident[fvars[f][s]].emplace_back(f, s);
  }

  Msg uniform;
  uniform.fill(1.0 / kNumRelations);
  std::vector<std::array<Msg, 3>> f2v(nf, {uniform, uniform, uniform});
  std::vector<std::array<Msg, 3>> v2f(nf, {uniform, uniform, uniform});

  BpResult result;
  result.iterations = 0;
  result.final_delta = 0.0;

  for (int iter = 0; iter < opts.max_iters && nf > 0; ++iter) {
    // variable -> factor
    for (int f = 0; f < nf; ++f) {
      for (int s = 0; s < 3; ++s) {
        const int v = fvars[f][s];
        Msg m = graph.variables[v].unary;
        for (const auto& [of, os] : incident[v]) {
          if (of == f && os == s) continue;
          for (int r = 0; r < kNumRelations; ++r) m[r] *= f2v[of][os][r];
        }
        normalize_msg(m);
        v2f[f][s] = m;
      }
    }

    // factor -> variable, damped
    double delta = 0.0;
    std::vector<std::array<Msg, 3>> f2v_new = f2v;
    for (int f = 0; f < nf; ++f) {
      for (int s = 0; s < 3; ++s) {
        Msg m{};
        const int s1 = (s + 1) % 3;
        const int s2 = (s + 2) % 3;
        std::array<Relation, 3> assign{};
        for (int r = 0; r < kNumRelations; ++r) {
          assign[s] = static_cast<Relation>(r);
          double acc = 0.0;
          for (int r1 = 0; r1 < kNumRelations; ++r1) {
            assign[s1] = static_cast<Relation>(r1);
            for (int r2 = 0; r2 < kNumRelations; ++r2) {
              assign[s2] = static_cast<Relation>(r2);
              if (!graph.rules.consistent(assign[0], assign[1], assign[2])) continue;
              acc += v2f[f][s1][r1] * v2f[f][s2][r2];
            }
          }
          m[r] = acc;
        }
        normalize_msg(m);
        for (int r = 0; r < kNumRelations; ++r) {
          m[r] = opts.damping * f2v[f][s][r] + (1.0 - opts.damping) * m[r];
          delta = std::max(delta, std::abs(m[r] - f2v[f][s][r]));
        }
        f2v_new[f][s] = m;
      }
    }
    f2v = std::move(f2v_new);
    result.iterations = iter + 1;
    result.final_delta = delta;
    if (delta < opts.tol) {
      result.converged = true;
      break;
    }
  }
  if (nf == 0) result.converged = true;

  for (int v = 0; v < nv; ++v) {
    Msg m = graph.variables[v].unary;
    for (const auto& [f, s] : incident[v]) {
      for (int r = 0; r < kNumRelations; ++r) m[r] *= f2v[f][s][r];
    }
    const auto& var = graph.variables[v];
    result.beliefs[{var.i, var.j}] = make_belief(var.i, var.j, m);
  }
  return result;
}

std::map<std::pair<int, int>, RelationBelief> brute_force_marginals(
    const RelationFactorGraph& graph) {
  const int nv = static_cast<int>(graph.variables.size());
  if (nv > 8) throw std::runtime_error("graph too large for enumeration (max 8 variables)");

  std::vector<Msg> marg(nv);
  for (auto& m : marg) m.fill(0.0);

  std::vector<int> assign(nv, 0);
  long long total = 1;
  for (int v = 0; v < nv; ++v) total *= kNumRelations;

  for (long long code = 0; code < total; ++code) {
    long long rest = code;
    for (int v = 0; v < nv; ++v) {
      assign[v] = rest % kNumRelations;
      rest /= kNumRelations;
    }
    double w = 1.0;
    for (int v = 0; v < nv && w > 0.0; ++v) w *= graph.variables[v].unary[assign[v]];
    if (w <= 0.0) continue;
    for (const auto& f : graph.factors) {
      if (!graph.rules.consistent(static_cast<Relation>(assign[f.v_ab]),
                                  static_cast<Relation>(assign[f.v_ac]),
                                  static_cast<Relation>(assign[f.v_bc]))) {
        w = 0.0;
        break;
      }
    }
    if (w <= 0.0) continue;
    for (int v = 0; v < nv; ++v) marg[v][assign[v]] += w;
  }

  std::map<std::pair<int, int>, RelationBelief> out;
  for (int v = 0; v < nv; ++v) {
    const auto& var = graph.variables[v];
    out[{var.i, var.j}] = make_belief(var.i, var.j, marg[v]);
  }
  return out;
}

}  // namespace slim
