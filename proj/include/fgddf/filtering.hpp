#pragma once

// Kalman-filter style graph operations (prediction, roll-up, estimation) and
// the building blocks of conservative filtering: hidden-dependency
// decoupling, sparse re-factorization and eigenvalue deflation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fgddf/factor_graph.hpp"

namespace fgddf {

struct LinearDynamics {
  MatrixXd F;  // state transition
  MatrixXd G;  // control matrix
  VectorXd u;  // control input
  MatrixXd Q;  // process-noise covariance
};

struct LinearMeasurement {
  MatrixXd H;
  MatrixXd R;
  VectorXd y;
};

/// h(x), its Jacobian and the noise model of a measurement that has to be
/// linearized about the current estimate. Entries flagged in `angular` have
/// their residual wrapped to (-pi, pi].
struct NonlinearMeasurement {
  std::function<VectorXd(const VectorXd&)> h;
  std::function<MatrixXd(const VectorXd&)> jacobian;
  MatrixXd R;
  VectorXd y;
  std::vector<bool> angular;
};

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

namespace detail {

inline MatrixXd spd_inverse(const MatrixXd& m, const char* what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw DensityError(std::string(what) + " is not positive definite");
  return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace detail

/// Key of the successor of `v` (same name, next timestep).
inline VariableKey next_key(const VariableKey& v) { return {v.name, v.timestep + 1, v.dim}; }

/// Adds x_{k+1} and the three prediction factors:
///   f(x_k)       = {-F'Q^-1 Gu, F'Q^-1 F}
///   f(x_{k+1})   = { Q^-1 Gu,   Q^-1}
///   f(x_k, x_k+1) with zero zeta/diagonal and -Q^-1 F off-diagonal blocks.
inline VariableKey add_prediction(FactorGraph& g, const VariableKey& vk, const LinearDynamics& dyn) {
  const VariableKey cur = g.variable(vk);
  const Eigen::Index n = cur.dim;
  if (dyn.F.rows() != n || dyn.F.cols() != n || dyn.Q.rows() != n || dyn.Q.cols() != n ||
      dyn.G.rows() != n || dyn.G.cols() != dyn.u.size())
    throw ScopeError("prediction model dimensions do not match variable " + to_string(cur));

  const MatrixXd qinv = detail::spd_inverse(dyn.Q, "process noise");
  const VectorXd gu = dyn.G * dyn.u;
  const VariableKey nxt = next_key(cur);

  g.add_factor(CanonicalFactor({cur}, -dyn.F.transpose() * qinv * gu, dyn.F.transpose() * qinv * dyn.F));
  g.add_factor(CanonicalFactor({nxt}, qinv * gu, qinv));

  MatrixXd cross = MatrixXd::Zero(2 * n, 2 * n);
  cross.block(0, n, n, n) = -dyn.F.transpose() * qinv;
  cross.block(n, 0, n, n) = -qinv * dyn.F;
  g.add_factor(CanonicalFactor({cur, nxt}, VectorXd::Zero(2 * n), std::move(cross)));
  return nxt;
}

/// Adds {H'R^-1 y, H'R^-1 H} over `vars`; H's column blocks follow `vars`.
inline FactorId add_measurement(FactorGraph& g, const Scope& vars, const LinearMeasurement& m) {
  Scope scope;
  for (const auto& v : vars) scope.push_back(g.variable(v));
  const auto n = static_cast<Eigen::Index>(scope_dim(scope));
  if (m.H.cols() != n || m.H.rows() != m.y.size() || m.R.rows() != m.y.size() || m.R.cols() != m.y.size())
    throw ScopeError("measurement dimensions do not match its variables");
  const MatrixXd rinv = detail::spd_inverse(m.R, "measurement noise");
  const MatrixXd ht_rinv = m.H.transpose() * rinv;
  return g.add_factor(CanonicalFactor(std::move(scope), ht_rinv * m.y, ht_rinv * m.H));
}

/// EKF-style factor {J'R^-1 (y - h(x0) + J x0), J'R^-1 J} linearized at x0.
inline FactorId add_linearized_measurement(FactorGraph& g, const Scope& vars, const NonlinearMeasurement& m,
                                           const VectorXd& x0) {
  Scope scope;
  for (const auto& v : vars) scope.push_back(g.variable(v));
  const auto n = static_cast<Eigen::Index>(scope_dim(scope));
  if (x0.size() != n) throw ScopeError("linearization point has the wrong dimension");
  const MatrixXd J = m.jacobian(x0);
  if (J.cols() != n || J.rows() != m.y.size()) throw ScopeError("Jacobian dimensions do not match the measurement");
  VectorXd residual = m.y - m.h(x0);
  for (std::size_t i = 0; i < m.angular.size() && i < static_cast<std::size_t>(residual.size()); ++i)
    if (m.angular[i]) residual(static_cast<Eigen::Index>(i)) = wrap_angle(residual(static_cast<Eigen::Index>(i)));
  return add_measurement(g, scope, {J, m.R, residual + J * x0});
}

/// Removes every factor coupling `local_vars` to `common_past_vars` and
/// replaces them with one factor per side that reproduces that side's exact
/// marginal. Afterwards the two sides are independent; their marginals are
/// unchanged. No-op when nothing couples them.
inline void decouple_hidden(FactorGraph& g, const Scope& local_vars, const Scope& common_past_vars) {
  auto is_local = [&](const VariableKey& k) { return scope_contains(local_vars, k); };

  std::vector<FactorId> coupling, local_only, other_only;
  for (const auto& [id, f] : g.factors()) {
    bool any_local = false, any_other = false, any_past = false;
    for (const auto& k : f.scope()) {
      if (is_local(k)) {
        any_local = true;
      } else {
        any_other = true;
        any_past = any_past || scope_contains(common_past_vars, k);
      }
    }
    if (any_local && any_other) {
      if (!any_past) throw ScopeError("decouple_hidden: factor couples local variables to non-past variables");
      coupling.push_back(id);
    } else if (any_local) {
      local_only.push_back(id);
    } else {
      other_only.push_back(id);
    }
  }
  if (coupling.empty()) return;

  Scope local_boundary, other_boundary;
  for (auto id : coupling) {
    for (const auto& k : g.factors().at(id).scope()) {
      auto& side = is_local(k) ? local_boundary : other_boundary;
      if (!scope_contains(side, k)) side.push_back(k);
    }
  }

  auto side_marginal = [&](const std::vector<FactorId>& far_side, const Scope& keep) {
    std::vector<CanonicalFactor> parts;
    for (auto id : coupling) parts.push_back(g.factors().at(id));
    for (auto id : far_side) parts.push_back(g.factors().at(id));
    return marginalize(factor_sum(parts), keep);
  };
  CanonicalFactor to_local = side_marginal(other_only, local_boundary);
  CanonicalFactor to_other = side_marginal(local_only, other_boundary);

  for (auto id : coupling) g.remove_factor(id);
  g.add_factor(std::move(to_local));
  g.add_factor(std::move(to_other));
}

/// Target factorization: independent `detached` blocks, then a chain of
/// conditionals p(head | given) where each `given` lies in earlier heads.
struct SparsityPattern {
  struct Entry {
    Scope head;
    Scope given;
  };
  std::vector<Scope> detached;
  std::vector<Entry> entries;

  bool trivial(const Scope& all) const {
    if (entries.empty() && detached.size() == 1) return canonical(detached[0]) == canonical(all);
    if (detached.empty() && entries.size() == 1 && entries[0].given.empty())
      return canonical(entries[0].head) == canonical(all);
    return false;
  }
};

/// Replaces the graph by the sparse factorization of its dense joint along
/// `pattern`: marginals of detached blocks and of the first heads, and
/// conditionals for the rest.
inline void regain_conditional_independence(FactorGraph& g, const SparsityPattern& pattern) {
  const Scope all = g.variables();
  Scope covered;
  auto cover = [&](const Scope& s) {
    for (const auto& k : s) {
      if (!g.has_variable(k)) throw ScopeError("sparsity pattern names unknown variable " + to_string(k));
      if (scope_contains(covered, k)) throw ScopeError("sparsity pattern blocks overlap at " + to_string(k));
      covered.push_back(g.variable(k));
    }
  };
  for (const auto& d : pattern.detached) cover(d);
  for (const auto& e : pattern.entries) {
    for (const auto& k : e.given)
      if (!scope_contains(covered, k)) throw ScopeError("conditioning variable " + to_string(k) + " is not an earlier head");
    cover(e.head);
  }
  if (covered.size() != all.size()) throw ScopeError("sparsity pattern does not cover every variable");
  if (pattern.trivial(all)) return;

  const CanonicalFactor joint = g.joint_density().factor();
  std::vector<CanonicalFactor> sparse;
  for (const auto& d : pattern.detached)
    if (!d.empty()) sparse.push_back(marginalize(joint, d));
  for (const auto& e : pattern.entries) {
    if (e.head.empty()) continue;
    if (e.given.empty()) {
      sparse.push_back(marginalize(joint, e.head));
    } else {
      Scope both = e.head;
      both.insert(both.end(), e.given.begin(), e.given.end());
      sparse.push_back(conditional(marginalize(joint, both), e.head));
    }
  }
  g.clear_factors();
  for (auto& f : sparse) g.add_factor(std::move(f));
}

/// Eigenvalue floor used when forming Lambda_sp^{-1/2}.
inline constexpr double kDeflationEigenFloor = 1e-12;

/// lambda* = min(1, min eig(Lsp^-1/2 Lde Lsp^-1/2)); Lde - lambda* Lsp is PSD.
inline double deflation_constant(const MatrixXd& lambda_sp, const MatrixXd& lambda_de) {
  if (lambda_sp.rows() != lambda_de.rows() || lambda_sp.cols() != lambda_de.cols() ||
      lambda_sp.rows() != lambda_sp.cols())
    throw ScopeError("deflation_constant: matrices differ in size");
  if (Eigen::LLT<MatrixXd>(lambda_sp).info() != Eigen::Success)
    throw DensityError("deflation_constant: sparse information matrix is not positive definite");
  if (Eigen::LLT<MatrixXd>(lambda_de).info() != Eigen::Success)
    throw DensityError("deflation_constant: dense information matrix is not positive definite");

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (lambda_sp + lambda_sp.transpose()));
  const VectorXd inv_sqrt = es.eigenvalues().cwiseMax(kDeflationEigenFloor).cwiseSqrt().cwiseInverse();
  const MatrixXd s = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  const MatrixXd q = s * lambda_de * s;
  const double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (q + q.transpose()), Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .minCoeff();
  return std::min(1.0, lmin);
}

}  // namespace fgddf
