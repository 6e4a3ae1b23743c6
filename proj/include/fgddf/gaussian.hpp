#pragma once

// Gaussian potentials and densities in canonical (information) form.
//
// A CanonicalFactor is the pair {zeta, Lambda} over an ordered scope of
// variable blocks. Factors are unnormalized potentials: Lambda may be
// indefinite or singular. CanonicalDensity adds the positive-definite
// requirement, and MomentGaussian holds the equivalent (mean, covariance).

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace fgddf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Identifies one variable block. Identity is (name, timestep); dim is payload.
struct VariableKey {
  std::string name;
  std::uint32_t timestep = 0;
  std::uint16_t dim = 1;

  friend bool operator==(const VariableKey& a, const VariableKey& b) {
    return a.timestep == b.timestep && a.name == b.name;
  }
  friend std::strong_ordering operator<=>(const VariableKey& a, const VariableKey& b) {
    if (auto c = a.name <=> b.name; c != 0) return c;
    return a.timestep <=> b.timestep;
  }
};

inline std::string to_string(const VariableKey& k) {
  return k.name + "@" + std::to_string(k.timestep);
}

using Scope = std::vector<VariableKey>;

class ScopeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the block being eliminated is singular or ill-conditioned.
class EliminationError : public std::runtime_error {
 public:
  EliminationError(const std::string& what, Scope keys)
      : std::runtime_error(what), keys_(std::move(keys)) {}
  const Scope& keys() const { return keys_; }

 private:
  Scope keys_;
};

class DensityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest tolerated condition number of an eliminated block.
inline constexpr double kMaxEliminationCondition = 1e12;

inline std::size_t scope_dim(const Scope& scope) {
  std::size_t n = 0;
  for (const auto& k : scope) n += k.dim;
  return n;
}

inline bool scope_contains(const Scope& scope, const VariableKey& key) {
  return std::find(scope.begin(), scope.end(), key) != scope.end();
}

/// Sorts into canonical (name, timestep) order.
inline Scope canonical(Scope scope) {
  std::sort(scope.begin(), scope.end());
  return scope;
}

/// Offsets of each block of `scope` inside its stacked vector.
inline std::vector<std::size_t> block_offsets(const Scope& scope) {
  std::vector<std::size_t> off(scope.size());
  std::size_t acc = 0;
  for (std::size_t i = 0; i < scope.size(); ++i) {
    off[i] = acc;
    acc += scope[i].dim;
  }
  return off;
}

/// Scalar indices (in `scope`'s stacking) covering the blocks in `keys`, in
/// the order the keys appear in `scope`.
inline std::vector<Eigen::Index> indices_of(const Scope& scope, const Scope& keys) {
  std::vector<Eigen::Index> idx;
  const auto off = block_offsets(scope);
  for (std::size_t i = 0; i < scope.size(); ++i) {
    if (!scope_contains(keys, scope[i])) continue;
    for (std::size_t d = 0; d < scope[i].dim; ++d) idx.push_back(static_cast<Eigen::Index>(off[i] + d));
  }
  return idx;
}

class CanonicalFactor {
 public:
  CanonicalFactor() = default;

  CanonicalFactor(Scope scope, VectorXd zeta, MatrixXd lambda)
      : scope_(std::move(scope)), zeta_(std::move(zeta)), lambda_(std::move(lambda)) {
    validate();
    lambda_ = 0.5 * (lambda_ + lambda_.transpose()).eval();
  }

  static CanonicalFactor zero(Scope scope) {
    const auto n = static_cast<Eigen::Index>(scope_dim(scope));
    return CanonicalFactor(std::move(scope), VectorXd::Zero(n), MatrixXd::Zero(n, n));
  }

  const Scope& scope() const { return scope_; }
  const VectorXd& zeta() const { return zeta_; }
  const MatrixXd& lambda() const { return lambda_; }
  Eigen::Index dim() const { return zeta_.size(); }
  bool empty() const { return scope_.empty(); }

  bool touches(const VariableKey& k) const { return scope_contains(scope_, k); }

  CanonicalFactor scaled(double s) const {
    CanonicalFactor out = *this;
    out.zeta_ *= s;
    out.lambda_ *= s;
    return out;
  }

 private:
  void validate() const {
    for (std::size_t i = 0; i < scope_.size(); ++i) {
      if (scope_[i].dim == 0) throw ScopeError("variable " + to_string(scope_[i]) + " has zero dimension");
      for (std::size_t j = i + 1; j < scope_.size(); ++j)
        if (scope_[i] == scope_[j]) throw ScopeError("duplicate variable " + to_string(scope_[i]) + " in scope");
    }
    const auto n = static_cast<Eigen::Index>(scope_dim(scope_));
    if (zeta_.size() != n || lambda_.rows() != n || lambda_.cols() != n)
      throw ScopeError("factor dimensions do not match scope (expected " + std::to_string(n) + ")");
  }

  Scope scope_;
  VectorXd zeta_;
  MatrixXd lambda_;
};

/// A canonical factor whose information matrix is positive definite.
class CanonicalDensity {
 public:
  explicit CanonicalDensity(CanonicalFactor f) : f_(std::move(f)) {
    if (f_.dim() == 0) throw DensityError("density over an empty scope");
    Eigen::LLT<MatrixXd> llt(f_.lambda());
    if (llt.info() != Eigen::Success) throw DensityError("information matrix is not positive definite");
  }

  const CanonicalFactor& factor() const { return f_; }
  const Scope& scope() const { return f_.scope(); }
  const VectorXd& zeta() const { return f_.zeta(); }
  const MatrixXd& lambda() const { return f_.lambda(); }

 private:
  CanonicalFactor f_;
};

struct MomentGaussian {
  Scope scope;
  VectorXd mean;
  MatrixXd covariance;
};

/// Embeds `f` into `target`; blocks for variables outside f.scope() are zero.
inline CanonicalFactor align_scope(const CanonicalFactor& f, const Scope& target) {
  const auto toff = block_offsets(target);
  const auto foff = block_offsets(f.scope());
  std::vector<std::ptrdiff_t> where(f.scope().size(), -1);
  for (std::size_t i = 0; i < f.scope().size(); ++i) {
    for (std::size_t j = 0; j < target.size(); ++j) {
      if (target[j] == f.scope()[i]) {
        if (target[j].dim != f.scope()[i].dim)
          throw ScopeError("dimension conflict for variable " + to_string(target[j]));
        where[i] = static_cast<std::ptrdiff_t>(j);
        break;
      }
    }
    if (where[i] < 0) throw ScopeError("variable " + to_string(f.scope()[i]) + " missing from target scope");
  }

  const auto n = static_cast<Eigen::Index>(scope_dim(target));
  VectorXd zeta = VectorXd::Zero(n);
  MatrixXd lambda = MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < f.scope().size(); ++i) {
    const auto di = f.scope()[i].dim;
    const auto ti = static_cast<Eigen::Index>(toff[static_cast<std::size_t>(where[i])]);
    const auto fi = static_cast<Eigen::Index>(foff[i]);
    zeta.segment(ti, di) = f.zeta().segment(fi, di);
    for (std::size_t j = 0; j < f.scope().size(); ++j) {
      const auto dj = f.scope()[j].dim;
      const auto tj = static_cast<Eigen::Index>(toff[static_cast<std::size_t>(where[j])]);
      const auto fj = static_cast<Eigen::Index>(foff[j]);
      lambda.block(ti, tj, di, dj) = f.lambda().block(fi, fj, di, dj);
    }
  }
  return CanonicalFactor(target, std::move(zeta), std::move(lambda));
}

/// Union of the scopes in canonical order. Conflicting dims raise ScopeError.
inline Scope union_scope(std::span<const CanonicalFactor> fs) {
  Scope out;
  for (const auto& f : fs) {
    for (const auto& k : f.scope()) {
      auto it = std::find(out.begin(), out.end(), k);
      if (it == out.end()) {
        out.push_back(k);
      } else if (it->dim != k.dim) {
        throw ScopeError("conflicting dimensions for variable " + to_string(k));
      }
    }
  }
  return canonical(std::move(out));
}

/// Direct sum of potentials over the union of their scopes.
inline CanonicalFactor factor_sum(std::span<const CanonicalFactor> fs) {
  if (fs.empty()) throw ScopeError("factor_sum of an empty list");
  const Scope scope = union_scope(fs);
  const auto n = static_cast<Eigen::Index>(scope_dim(scope));
  VectorXd zeta = VectorXd::Zero(n);
  MatrixXd lambda = MatrixXd::Zero(n, n);
  const auto off = block_offsets(scope);
  for (const auto& f : fs) {
    // Scatter blocks directly instead of materializing aligned copies.
    std::vector<Eigen::Index> pos(f.scope().size());
    for (std::size_t i = 0; i < f.scope().size(); ++i) {
      auto it = std::lower_bound(scope.begin(), scope.end(), f.scope()[i]);
      pos[i] = static_cast<Eigen::Index>(off[static_cast<std::size_t>(it - scope.begin())]);
    }
    const auto foff = block_offsets(f.scope());
    for (std::size_t i = 0; i < f.scope().size(); ++i) {
      const auto di = f.scope()[i].dim;
      const auto fi = static_cast<Eigen::Index>(foff[i]);
      zeta.segment(pos[i], di) += f.zeta().segment(fi, di);
      for (std::size_t j = 0; j < f.scope().size(); ++j) {
        const auto dj = f.scope()[j].dim;
        lambda.block(pos[i], pos[j], di, dj) +=
            f.lambda().block(fi, static_cast<Eigen::Index>(foff[j]), di, dj);
      }
    }
  }
  return CanonicalFactor(scope, std::move(zeta), std::move(lambda));
}

inline CanonicalFactor factor_sum(const CanonicalFactor& a, const CanonicalFactor& b) {
  const CanonicalFactor fs[] = {a, b};
  return factor_sum(fs);
}

/// a - b with b's scope contained in a's; the result keeps a's scope order.
inline CanonicalFactor factor_diff(const CanonicalFactor& a, const CanonicalFactor& b) {
  for (const auto& k : b.scope())
    if (!a.touches(k)) throw ScopeError("factor_diff: " + to_string(k) + " is not in the minuend scope");
  const CanonicalFactor bb = align_scope(b, a.scope());
  return CanonicalFactor(a.scope(), a.zeta() - bb.zeta(), a.lambda() - bb.lambda());
}

namespace detail {

inline MatrixXd select(const MatrixXd& m, const std::vector<Eigen::Index>& r,
                       const std::vector<Eigen::Index>& c) {
  MatrixXd out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(r[i], c[j]);
  return out;
}

inline VectorXd select(const VectorXd& v, const std::vector<Eigen::Index>& r) {
  VectorXd out(static_cast<Eigen::Index>(r.size()));
  for (std::size_t i = 0; i < r.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(r[i]);
  return out;
}

}  // namespace detail

/// Schur-complement marginal of `d` onto `keep`, ordered as in d.scope().
inline CanonicalFactor marginalize(const CanonicalFactor& d, const Scope& keep) {
  for (const auto& k : keep)
    if (!d.touches(k)) throw ScopeError("marginalize: " + to_string(k) + " is not in the factor scope");

  Scope kept, dropped;
  for (const auto& k : d.scope()) (scope_contains(keep, k) ? kept : dropped).push_back(k);
  if (dropped.empty()) return d;

  const auto ik = indices_of(d.scope(), kept);
  const auto ix = indices_of(d.scope(), dropped);
  const MatrixXd lxx = detail::select(d.lambda(), ix, ix);
  Eigen::LDLT<MatrixXd> ldlt(lxx);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() * kMaxEliminationCondition >= 1.0))
    throw EliminationError("eliminated block is singular or ill-conditioned", dropped);
  if (kept.empty()) return CanonicalFactor{};

  const MatrixXd lkx = detail::select(d.lambda(), ik, ix);
  const MatrixXd gain = ldlt.solve(lkx.transpose());  // Lxx^-1 Lxk
  VectorXd zeta = detail::select(d.zeta(), ik) - gain.transpose() * detail::select(d.zeta(), ix);
  MatrixXd lambda = detail::select(d.lambda(), ik, ik) - lkx * gain;
  return CanonicalFactor(std::move(kept), std::move(zeta), std::move(lambda));
}

/// p(head | rest) as joint minus the marginal over the conditioning set.
inline CanonicalFactor conditional(const CanonicalFactor& joint, const Scope& head) {
  for (const auto& k : head)
    if (!joint.touches(k)) throw ScopeError("conditional: " + to_string(k) + " is not in the joint scope");
  Scope given;
  for (const auto& k : joint.scope())
    if (!scope_contains(head, k)) given.push_back(k);
  if (given.empty()) return joint;
  return factor_diff(joint, marginalize(joint, given));
}

inline MomentGaussian to_moments(const CanonicalDensity& d) {
  Eigen::LLT<MatrixXd> llt(d.lambda());
  if (llt.info() != Eigen::Success) throw DensityError("to_moments: information matrix is not positive definite");
  const auto n = d.lambda().rows();
  MatrixXd cov = llt.solve(MatrixXd::Identity(n, n));
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {d.scope(), llt.solve(d.zeta()), std::move(cov)};
}

inline CanonicalDensity from_moments(const MomentGaussian& m) {
  const auto n = static_cast<Eigen::Index>(scope_dim(m.scope));
  if (m.mean.size() != n || m.covariance.rows() != n || m.covariance.cols() != n)
    throw ScopeError("from_moments: moment dimensions do not match scope");
  Eigen::LLT<MatrixXd> llt(m.covariance);
  if (llt.info() != Eigen::Success) throw DensityError("from_moments: covariance is not positive definite");
  MatrixXd lambda = llt.solve(MatrixXd::Identity(n, n));
  return CanonicalDensity(CanonicalFactor(m.scope, llt.solve(m.mean), std::move(lambda)));
}

/// Marginal moments of `m` over the listed blocks, ordered as in m.scope.
inline MomentGaussian select_moments(const MomentGaussian& m, const Scope& keys) {
  Scope kept;
  for (const auto& k : m.scope)
    if (scope_contains(keys, k)) kept.push_back(k);
  const auto idx = indices_of(m.scope, kept);
  return {kept, detail::select(m.mean, idx), detail::select(m.covariance, idx, idx)};
}

}  // namespace fgddf
