#pragma once

// Roll-up with conservative sparsification: keep the local graph's
// factorization sparse along a pattern and deflate it so it never claims
// more information than the dense (exact) roll-up would.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fgddf/filtering.hpp"

namespace fgddf {

struct ConservativeFilterSpec {
  Scope past;         // variables to roll up (eliminate)
  Scope local;        // variables not shared with any neighbour
  Scope common_past;  // shared variables among `past`
  SparsityPattern pattern;
};

struct ConservativeFilterResult {
  double lambda = 1.0;
  /// Smallest eigenvalue of Lambda_de - lambda * Lambda_sp (>= 0 up to rounding).
  double psd_margin = 0.0;
};

/// Snapshot, decouple, roll up, sparsify and deflate `g` in place.
inline ConservativeFilterResult conservative_filter(FactorGraph& g, const ConservativeFilterSpec& spec) {
  FactorGraph dense = g;
  decouple_hidden(g, spec.local, spec.common_past);
  g.eliminate_variables(spec.past);
  dense.eliminate_variables(spec.past);
  regain_conditional_independence(g, spec.pattern);

  const CanonicalFactor sparse_joint = g.joint_factor();
  const CanonicalFactor dense_joint = dense.joint_factor();
  ConservativeFilterResult out;
  out.lambda = deflation_constant(sparse_joint.lambda(), dense_joint.lambda());
  g.scale_factors(out.lambda);

  const MatrixXd gap = dense_joint.lambda() - out.lambda * sparse_joint.lambda();
  out.psd_margin = Eigen::SelfAdjointEigenSolver<MatrixXd>(gap, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  return out;
}

/// Builds the sparsity pattern from which neighbours share each variable:
/// the local block is detached, the variables shared with every neighbour
/// form the first head and every other sharing class is conditioned on it.
/// Without a variable shared by all neighbours the classes are detached.
inline SparsityPattern neighbour_sparsity_pattern(const Scope& local,
                                                  const std::map<std::uint32_t, Scope>& common_sets) {
  SparsityPattern p;
  if (!local.empty()) p.detached.push_back(local);

  std::map<VariableKey, std::set<std::uint32_t>> shared_with;
  for (const auto& [j, keys] : common_sets)
    for (const auto& k : keys) shared_with[k].insert(j);

  std::map<std::set<std::uint32_t>, Scope> classes;
  for (const auto& [k, who] : shared_with) classes[who].push_back(k);

  std::set<std::uint32_t> everyone;
  for (const auto& [j, keys] : common_sets) everyone.insert(j);

  Scope hub;
  if (auto it = classes.find(everyone); it != classes.end()) {
    hub = it->second;
    classes.erase(it);
  }
  if (hub.empty()) {
    for (const auto& [who, keys] : classes) p.detached.push_back(keys);
    return p;
  }
  p.entries.push_back({hub, {}});
  for (const auto& [who, keys] : classes) p.entries.push_back({keys, hub});
  return p;
}

}  // namespace fgddf
