#pragma once

// Exact inference on a (possibly loopy) factor graph by merging variables
// that sit on cycles into cliques until the clique-level factor graph is a
// forest, then running two-pass sum-product on it.

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "fgddf/factor_graph.hpp"

namespace fgddf {

/// Potential attached to the cliques it touches; several original factors
/// with the same clique footprint are summed into one.
struct CliqueFactor {
  std::vector<std::size_t> cliques;  // indices into CliqueGraph::cliques, ascending
  std::vector<FactorId> members;     // original factor ids
  CanonicalFactor potential;         // over the union of the touched cliques
};

struct CliqueGraph {
  std::vector<Scope> cliques;  // partition of the graph variables
  std::vector<CliqueFactor> clique_factors;

  /// Variables shared between clique `c` and the factors it exchanges
  /// messages with; with a variable partition this is the clique itself.
  const Scope& separator(std::size_t c) const { return cliques.at(c); }

  /// True when the bipartite clique/factor graph has no cycle.
  bool is_forest() const {
    const std::size_t nodes = cliques.size() + clique_factors.size();
    std::vector<std::size_t> parent(nodes);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (std::size_t f = 0; f < clique_factors.size(); ++f) {
      for (auto c : clique_factors[f].cliques) {
        const auto a = find(cliques.size() + f);
        const auto b = find(c);
        if (a == b) return false;
        parent[a] = b;
      }
    }
    return true;
  }
};

namespace detail {

struct CliqueState {
  std::vector<std::size_t> root;  // per variable index, union-find parent

  std::size_t find(std::size_t a) {
    while (root[a] != a) a = root[a] = root[root[a]];
    return a;
  }
};

// Groups the original factors by the set of clique roots they touch.
inline std::map<std::vector<std::size_t>, std::vector<FactorId>> group_factors(
    const FactorGraph& g, const std::map<VariableKey, std::size_t>& index, CliqueState& st) {
  std::map<std::vector<std::size_t>, std::vector<FactorId>> groups;
  for (const auto& [id, f] : g.factors()) {
    std::vector<std::size_t> roots;
    for (const auto& k : f.scope()) roots.push_back(st.find(index.at(k)));
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
    groups[roots].push_back(id);
  }
  return groups;
}

// Returns the clique roots on some cycle of the clique/group bipartite graph.
inline std::optional<std::vector<std::size_t>> find_cycle(
    const std::map<std::vector<std::size_t>, std::vector<FactorId>>& groups, std::size_t num_vars) {
  // Node ids: [0, num_vars) cliques, [num_vars, ...) groups.
  std::vector<std::vector<std::size_t>> adj(num_vars + groups.size());
  std::size_t gi = num_vars;
  for (const auto& [roots, ids] : groups) {
    if (roots.size() > 1) {
      for (auto r : roots) {
        adj[gi].push_back(r);
        adj[r].push_back(gi);
      }
    }
    ++gi;
  }

  std::vector<int> state(adj.size(), 0);  // 0 unvisited, 1 on stack, 2 done
  std::vector<std::size_t> parent(adj.size(), adj.size());
  std::vector<std::size_t> cycle;

  std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
    state[u] = 1;
    for (auto w : adj[u]) {
      if (w == parent[u]) continue;
      if (state[w] == 1) {
        for (std::size_t x = u;; x = parent[x]) {
          cycle.push_back(x);
          if (x == w) break;
        }
        return true;
      }
      if (state[w] == 0) {
        parent[w] = u;
        if (dfs(w)) return true;
      }
    }
    state[u] = 2;
    return false;
  };

  for (std::size_t s = 0; s < num_vars; ++s) {
    if (state[s] == 0 && !adj[s].empty() && dfs(s)) {
      std::vector<std::size_t> on_cycle;
      for (auto n : cycle)
        if (n < num_vars) on_cycle.push_back(n);
      return on_cycle;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Merges variables that lie on cycles into cliques until the clique-level
/// factor graph is acyclic. On each cycle found, the two cliques with the
/// most distinct neighbouring factor groups are merged (ties go to the
/// canonically first), so hubs such as a robot's local block absorb the
/// shared common set and leave the pairwise sets as leaves.
inline CliqueGraph form_cliques(const FactorGraph& g) {
  const Scope vars = g.variables();
  std::map<VariableKey, std::size_t> index;
  for (std::size_t i = 0; i < vars.size(); ++i) index.emplace(vars[i], i);

  detail::CliqueState st;
  st.root.resize(vars.size());
  std::iota(st.root.begin(), st.root.end(), std::size_t{0});

  for (;;) {
    const auto groups = detail::group_factors(g, index, st);
    const auto cycle = detail::find_cycle(groups, vars.size());
    if (!cycle) break;

    std::map<std::size_t, std::size_t> degree;
    for (const auto& [roots, ids] : groups)
      for (auto r : roots) ++degree[r];
    std::vector<std::size_t> order = *cycle;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (degree[a] != degree[b]) return degree[a] > degree[b];
      return a < b;
    });
    const auto a = std::min(order[0], order[1]);
    const auto b = std::max(order[0], order[1]);
    st.root[b] = a;
  }

  // Number cliques by their smallest variable index so output is canonical.
  CliqueGraph out;
  std::map<std::size_t, std::size_t> clique_of_root;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto r = st.find(i);
    auto [it, inserted] = clique_of_root.try_emplace(r, out.cliques.size());
    if (inserted) out.cliques.emplace_back();
    out.cliques[it->second].push_back(vars[i]);
  }

  for (const auto& [roots, ids] : detail::group_factors(g, index, st)) {
    CliqueFactor cf;
    for (auto r : roots) cf.cliques.push_back(clique_of_root.at(r));
    std::sort(cf.cliques.begin(), cf.cliques.end());
    cf.members = ids;
    Scope scope;
    for (auto c : cf.cliques) scope.insert(scope.end(), out.cliques[c].begin(), out.cliques[c].end());
    std::vector<CanonicalFactor> parts{CanonicalFactor::zero(canonical(scope))};
    for (auto id : ids) parts.push_back(g.factors().at(id));
    cf.potential = factor_sum(parts);
    out.clique_factors.push_back(std::move(cf));
  }
  return out;
}

/// Clique beliefs (canonical factors over each clique) from sum-product on
/// the clique forest.
inline std::vector<CanonicalFactor> clique_beliefs(const CliqueGraph& cg) {
  const std::size_t nc = cg.cliques.size();
  std::vector<std::vector<std::size_t>> factors_of(nc);
  for (std::size_t f = 0; f < cg.clique_factors.size(); ++f)
    for (auto c : cg.clique_factors[f].cliques) factors_of[c].push_back(f);

  // Memoized messages keyed by (factor, clique) in both directions.
  std::map<std::pair<std::size_t, std::size_t>, CanonicalFactor> to_clique, to_factor;

  std::function<const CanonicalFactor&(std::size_t, std::size_t)> factor_to_clique;
  std::function<const CanonicalFactor&(std::size_t, std::size_t)> clique_to_factor;

  clique_to_factor = [&](std::size_t c, std::size_t f) -> const CanonicalFactor& {
    const auto key = std::make_pair(f, c);
    if (auto it = to_factor.find(key); it != to_factor.end()) return it->second;
    std::vector<CanonicalFactor> in{CanonicalFactor::zero(cg.cliques[c])};
    for (auto g : factors_of[c])
      if (g != f) in.push_back(factor_to_clique(g, c));
    return to_factor.emplace(key, factor_sum(in)).first->second;
  };

  factor_to_clique = [&](std::size_t f, std::size_t c) -> const CanonicalFactor& {
    const auto key = std::make_pair(f, c);
    if (auto it = to_clique.find(key); it != to_clique.end()) return it->second;
    const auto& cf = cg.clique_factors[f];
    std::vector<CanonicalFactor> in{cf.potential};
    for (auto d : cf.cliques)
      if (d != c) in.push_back(clique_to_factor(d, f));
    CanonicalFactor msg = marginalize(factor_sum(in), cg.cliques[c]);
    return to_clique.emplace(key, std::move(msg)).first->second;
  };

  std::vector<CanonicalFactor> beliefs;
  beliefs.reserve(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<CanonicalFactor> in{CanonicalFactor::zero(cg.cliques[c])};
    for (auto f : factors_of[c]) in.push_back(factor_to_clique(f, c));
    beliefs.push_back(factor_sum(in));
  }
  return beliefs;
}

/// Per-variable marginals via clique formation and sum-product.
inline std::map<VariableKey, MomentGaussian> infer_marginals(const FactorGraph& g) {
  const CliqueGraph cg = form_cliques(g);
  const auto beliefs = clique_beliefs(cg);
  std::map<VariableKey, MomentGaussian> out;
  for (std::size_t c = 0; c < cg.cliques.size(); ++c) {
    const MomentGaussian m = to_moments(CanonicalDensity(beliefs[c]));
    for (const auto& v : cg.cliques[c]) out.emplace(v, select_moments(m, {v}));
  }
  return out;
}

}  // namespace fgddf
