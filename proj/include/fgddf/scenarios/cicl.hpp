#pragma once

// Ego-only cooperative localization baseline: each robot runs an EKF on its
// own pose, and neighbours send memoryless position estimates derived from
// their ego estimate and a relative measurement, fused with CI.

#include <cmath>

#include "fgddf/agent.hpp"
#include "fgddf/scenarios/models.hpp"

namespace fgddf::scenarios {

struct PositionEstimate {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
};

class CiclRobot {
 public:
  CiclRobot() = default;
  CiclRobot(const VectorXd& mean, const MatrixXd& cov) : x_(mean), P_(cov) {}

  const VectorXd& mean() const { return x_; }
  const MatrixXd& covariance() const { return P_; }

  void predict(const LinearDynamics& d) {
    x_ = d.F * x_ + d.G * d.u;
    P_ = d.F * P_ * d.F.transpose() + d.G * d.Q * d.G.transpose();
  }

  /// EKF update with a measurement of the ego pose.
  void update(const NonlinearMeasurement& m) {
    const MatrixXd H = m.jacobian(x_);
    VectorXd r = m.y - m.h(x_);
    for (std::size_t i = 0; i < m.angular.size(); ++i)
      if (m.angular[i]) r(static_cast<Eigen::Index>(i)) = wrap_angle(r(static_cast<Eigen::Index>(i)));
    const MatrixXd HP = H * P_;
    const MatrixXd K = (HP * H.transpose() + m.R).ldlt().solve(HP).transpose();
    x_ += K * r;
    P_ -= K * HP;
    P_ = 0.5 * (P_ + P_.transpose()).eval();
  }

  /// Neighbour position implied by a bearing/range measurement taken by this robot.
  PositionEstimate neighbour_position(const VectorXd& z, double sigma_bearing, double sigma_range) const {
    const double a = x_(2) + z(0), r = z(1), c = std::cos(a), s = std::sin(a);
    PositionEstimate out;
    out.mean << x_(0) + r * c, x_(1) + r * s;
    MatrixXd jx(2, 3), jz(2, 2);
    jx << 1, 0, -r * s, 0, 1, r * c;
    jz << -r * s, c, r * c, s;
    const Eigen::Matrix2d R = Eigen::Vector2d(sigma_bearing * sigma_bearing, sigma_range * sigma_range).asDiagonal();
    out.cov = jx * P_ * jx.transpose() + jz * R * jz.transpose();
    return out;
  }

  /// CI of the ego pose with a position-only estimate (no heading
  /// information). Returns the weight kept on the ego estimate.
  double fuse_position(const PositionEstimate& p) {
    MatrixXd H = MatrixXd::Zero(2, 3);
    H(0, 0) = H(1, 1) = 1;
    const MatrixXd Y = fgddf::detail::spd_inverse(P_, "ego covariance");
    const MatrixXd Ir = H.transpose() * p.cov.inverse() * H;
    const VectorXd y = Y * x_, ir = H.transpose() * p.cov.inverse() * p.mean;
    // Position-only information is singular in heading, so omega stays above zero.
    auto cost = [&](double w) { return fgddf::detail::spd_inverse(w * Y + (1 - w) * Ir, "fused information").trace(); };
    const double w = golden_section_minimize(cost, kMinOmega, 1.0, kOmegaTolerance);
    const MatrixXd Yf = w * Y + (1 - w) * Ir;
    P_ = fgddf::detail::spd_inverse(Yf, "fused information");
    x_ = P_ * (w * y + (1 - w) * ir);
    return w;
  }

  static constexpr double kMinOmega = 1e-3;

 private:
  VectorXd x_ = VectorXd::Zero(3);
  MatrixXd P_ = MatrixXd::Identity(3, 3);
};

}  // namespace fgddf::scenarios
