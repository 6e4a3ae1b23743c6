#pragma once

// Centralized reference estimator over the full global state, written in
// moment (covariance) form so it shares no code path with the factor graph.

#include <map>
#include <string>
#include <vector>

#include "fgddf/filtering.hpp"

namespace fgddf::scenarios {

class CentralizedFilter {
 public:
  /// Appends a state block with its prior.
  void add_state(const std::string& name, const VectorXd& mean, const MatrixXd& cov, bool dynamic = true) {
    if (offset_.count(name)) throw ScopeError("duplicate centralized state " + name);
    const auto n = mean.size(), old = x_.size();
    offset_[name] = {old, n};
    dynamic_[name] = dynamic;
    order_.push_back(name);
    VectorXd x(old + n);
    x << x_, mean;
    MatrixXd p = MatrixXd::Zero(old + n, old + n);
    p.topLeftCorner(old, old) = P_;
    p.bottomRightCorner(n, n) = cov;
    x_ = std::move(x);
    P_ = std::move(p);
  }

  Eigen::Index dim() const { return x_.size(); }
  const VectorXd& mean() const { return x_; }
  const MatrixXd& covariance() const { return P_; }

  /// Block-diagonal linear prediction; static states are held constant.
  void predict(const std::map<std::string, LinearDynamics>& dynamics) {
    const auto n = x_.size();
    MatrixXd F = MatrixXd::Identity(n, n), Q = MatrixXd::Zero(n, n);
    VectorXd u = VectorXd::Zero(n);
    for (const auto& name : order_) {
      if (!dynamic_.at(name)) continue;
      const auto [o, d] = offset_.at(name);
      const auto& dyn = dynamics.at(name);
      F.block(o, o, d, d) = dyn.F;
      u.segment(o, d) = dyn.G * dyn.u;
      Q.block(o, o, d, d) = dyn.Q;
    }
    x_ = F * x_ + u;
    P_ = F * P_ * F.transpose() + Q;
    P_ = 0.5 * (P_ + P_.transpose()).eval();
  }

  /// Kalman update with y = H [states...] + v.
  void update(const std::vector<std::string>& names, const LinearMeasurement& m) {
    const MatrixXd H = embed(names, m.H);
    apply(H, m.y - H * x_, m.R);
  }

  /// Extended Kalman update linearized at the current mean.
  void update(const std::vector<std::string>& names, const NonlinearMeasurement& m) {
    const auto idx = indices(names);
    VectorXd xs(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) xs(static_cast<Eigen::Index>(i)) = x_(idx[i]);
    const MatrixXd H = embed(names, m.jacobian(xs));
    VectorXd r = m.y - m.h(xs);
    for (std::size_t i = 0; i < m.angular.size() && i < static_cast<std::size_t>(r.size()); ++i)
      if (m.angular[i]) r(static_cast<Eigen::Index>(i)) = wrap_angle(r(static_cast<Eigen::Index>(i)));
    apply(H, r, m.R);
  }

  /// Mean and covariance over `names` in that order.
  std::pair<VectorXd, MatrixXd> marginal(const std::vector<std::string>& names) const {
    const auto idx = indices(names);
    const auto n = static_cast<Eigen::Index>(idx.size());
    VectorXd m(n);
    MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m(i) = x_(idx[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < n; ++j) c(i, j) = P_(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    return {m, c};
  }

 private:
  std::vector<Eigen::Index> indices(const std::vector<std::string>& names) const {
    std::vector<Eigen::Index> out;
    for (const auto& n : names) {
      auto it = offset_.find(n);
      if (it == offset_.end()) throw ScopeError("unknown centralized state " + n);
      for (Eigen::Index d = 0; d < it->second.second; ++d) out.push_back(it->second.first + d);
    }
    return out;
  }

  MatrixXd embed(const std::vector<std::string>& names, const MatrixXd& h) const {
    const auto idx = indices(names);
    if (h.cols() != static_cast<Eigen::Index>(idx.size())) throw ScopeError("measurement matrix has the wrong width");
    MatrixXd H = MatrixXd::Zero(h.rows(), x_.size());
    for (std::size_t c = 0; c < idx.size(); ++c) H.col(idx[c]) = h.col(static_cast<Eigen::Index>(c));
    return H;
  }

  void apply(const MatrixXd& H, const VectorXd& innovation, const MatrixXd& R) {
    const MatrixXd HP = H * P_;
    const MatrixXd S = HP * H.transpose() + R;
    const MatrixXd K = S.ldlt().solve(HP).transpose();
    x_ += K * innovation;
    P_ -= K * HP;
    P_ = 0.5 * (P_ + P_.transpose()).eval();
  }

  VectorXd x_;
  MatrixXd P_;
  std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> offset_;
  std::map<std::string, bool> dynamic_;
  std::vector<std::string> order_;
};

}  // namespace fgddf::scenarios
