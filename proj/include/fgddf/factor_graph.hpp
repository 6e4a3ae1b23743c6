#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fgddf/gaussian.hpp"

namespace fgddf {

using FactorId = std::uint64_t;

/// Bipartite variable/factor graph encoding one robot's local joint pdf.
///
/// Factor ids increase monotonically; every iteration goes through ordered
/// containers so results never depend on hash order.
class FactorGraph {
 public:
  /// Adds the variable if absent. Re-adding with a different dim is an error.
  void add_variable(const VariableKey& v) {
    if (v.dim == 0) throw ScopeError("variable " + to_string(v) + " has zero dimension");
    auto [it, inserted] = adjacency_.try_emplace(v);
    if (!inserted && it->first.dim != v.dim)
      throw ScopeError("dimension conflict for variable " + to_string(v));
  }

  FactorId add_factor(CanonicalFactor f) {
    if (f.empty()) throw ScopeError("cannot add a factor with an empty scope");
    for (const auto& k : f.scope()) add_variable(k);
    const FactorId id = next_id_++;
    for (const auto& k : f.scope()) adjacency_[k].insert(id);
    factors_.emplace(id, std::move(f));
    return id;
  }

  void remove_factor(FactorId id) {
    auto it = factors_.find(id);
    if (it == factors_.end()) return;
    for (const auto& k : it->second.scope()) adjacency_[k].erase(id);
    factors_.erase(it);
  }

  /// Drops a variable together with every factor touching it.
  void remove_variable(const VariableKey& v) {
    auto it = adjacency_.find(v);
    if (it == adjacency_.end()) return;
    const auto ids = it->second;
    for (auto id : ids) remove_factor(id);
    adjacency_.erase(v);
  }

  void clear_factors() {
    factors_.clear();
    for (auto& [k, ids] : adjacency_) ids.clear();
  }

  bool has_variable(const VariableKey& v) const { return adjacency_.count(v) != 0; }

  /// Full key (including dim) for a (name, timestep) lookup.
  const VariableKey& variable(const VariableKey& v) const {
    auto it = adjacency_.find(v);
    if (it == adjacency_.end()) throw ScopeError("unknown variable " + to_string(v));
    return it->first;
  }

  /// Variables in canonical order.
  Scope variables() const {
    Scope out;
    out.reserve(adjacency_.size());
    for (const auto& [k, ids] : adjacency_) out.push_back(k);
    return out;
  }

  const std::map<FactorId, CanonicalFactor>& factors() const { return factors_; }
  std::size_t num_factors() const { return factors_.size(); }
  std::size_t num_variables() const { return adjacency_.size(); }

  std::vector<FactorId> adjacent_factors(const VariableKey& v) const {
    auto it = adjacency_.find(v);
    if (it == adjacency_.end()) throw ScopeError("unknown variable " + to_string(v));
    return {it->second.begin(), it->second.end()};
  }

  std::size_t degree(const VariableKey& v) const { return adjacent_factors(v).size(); }

  /// Sums every factor adjacent to `x`, takes the Schur marginal onto the
  /// Markov blanket and replaces them with that single factor.
  void eliminate_variable(const VariableKey& x) {
    const auto ids = adjacent_factors(x);
    std::vector<CanonicalFactor> adjacent;
    adjacent.reserve(ids.size());
    for (auto id : ids) adjacent.push_back(factors_.at(id));

    CanonicalFactor blanket_factor;
    if (!adjacent.empty()) {
      const CanonicalFactor summed = factor_sum(adjacent);
      Scope blanket;
      for (const auto& k : summed.scope())
        if (!(k == x)) blanket.push_back(k);
      blanket_factor = marginalize(summed, blanket);
    }
    for (auto id : ids) remove_factor(id);
    adjacency_.erase(x);
    if (!blanket_factor.empty()) add_factor(std::move(blanket_factor));
  }

  void eliminate_variables(const Scope& xs) {
    for (const auto& x : xs) eliminate_variable(x);
  }

  /// Sum of all factors over every variable (canonical order). May be improper.
  CanonicalFactor joint_factor() const {
    std::vector<CanonicalFactor> all;
    all.reserve(factors_.size() + 1);
    all.push_back(CanonicalFactor::zero(variables()));
    for (const auto& [id, f] : factors_) all.push_back(f);
    return factor_sum(all);
  }

  /// Joint density; throws DensityError when the graph is not anchored.
  CanonicalDensity joint_density() const {
    try {
      return CanonicalDensity(joint_factor());
    } catch (const DensityError&) {
      throw DensityError("joint of the factor graph is not positive definite (improper graph)");
    }
  }

  /// Replaces every factor by a copy scaled by `s`.
  void scale_factors(double s) {
    for (auto& [id, f] : factors_) f = f.scaled(s);
  }

  /// Sums factors that share the same variable set into one (kept at the
  /// lowest id). The joint is unchanged; the factor count stays bounded.
  void merge_duplicate_scopes() {
    std::map<Scope, std::vector<FactorId>> by_scope;
    for (const auto& [id, f] : factors_) by_scope[canonical(f.scope())].push_back(id);
    for (const auto& [scope, ids] : by_scope) {
      if (ids.size() < 2) continue;
      std::vector<CanonicalFactor> parts;
      parts.reserve(ids.size());
      for (auto id : ids) parts.push_back(factors_.at(id));
      factors_.at(ids.front()) = factor_sum(parts);
      for (std::size_t i = 1; i < ids.size(); ++i) remove_factor(ids[i]);
    }
  }

 private:
  std::map<VariableKey, std::set<FactorId>> adjacency_;
  std::map<FactorId, CanonicalFactor> factors_;
  FactorId next_id_ = 0;
};

/// Structured text dump of a graph (variables, factor scopes, zeta, Lambda).
inline std::string dump(const FactorGraph& g, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision);
  os << "variables:\n";
  for (const auto& v : g.variables()) os << "  - {name: " << v.name << ", timestep: " << v.timestep << ", dim: " << v.dim << "}\n";
  os << "factors:\n";
  for (const auto& [id, f] : g.factors()) {
    os << "  - id: " << id << "\n    scope: [";
    for (std::size_t i = 0; i < f.scope().size(); ++i) os << (i ? ", " : "") << to_string(f.scope()[i]);
    os << "]\n    zeta: [";
    for (Eigen::Index i = 0; i < f.dim(); ++i) os << (i ? ", " : "") << f.zeta()(i);
    os << "]\n    lambda:\n";
    for (Eigen::Index r = 0; r < f.dim(); ++r) {
      os << "      - [";
      for (Eigen::Index c = 0; c < f.dim(); ++c) os << (c ? ", " : "") << f.lambda()(r, c);
      os << "]\n";
    }
  }
  return os.str();
}

}  // namespace fgddf
