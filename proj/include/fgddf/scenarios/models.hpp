#pragma once

// Truth-side motion and sensor models shared by the scenarios.

#include <cmath>
#include <optional>
#include <random>

#include "fgddf/filtering.hpp"

namespace fgddf::scenarios {

inline VectorXd gaussian_draw(std::mt19937_64& rng, const MatrixXd& cov) {
  std::normal_distribution<double> nd;
  VectorXd z(cov.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = nd(rng);
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    // Semi-definite noise (e.g. a zero block): fall back to an eigen factor.
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z;
  }
  return llt.matrixL() * z;
}

// Nearly-constant-velocity target, state [n, n_dot, e, e_dot].

inline MatrixXd ncv_transition(double dt) {
  MatrixXd f = MatrixXd::Identity(4, 4);
  f(0, 1) = dt;
  f(2, 3) = dt;
  return f;
}

inline MatrixXd ncv_control(double dt) {
  MatrixXd g = MatrixXd::Zero(4, 2);
  g(0, 0) = 0.5 * dt * dt;
  g(1, 0) = dt;
  g(2, 1) = 0.5 * dt * dt;
  g(3, 1) = dt;
  return g;
}

/// Process noise q * I enters the state directly.
inline LinearDynamics ncv_dynamics(double dt, double q) {
  return {ncv_transition(dt), ncv_control(dt), VectorXd::Zero(2), q * MatrixXd::Identity(4, 4)};
}

inline VectorXd step_ncv(const VectorXd& x, double dt, double q, std::mt19937_64& rng) {
  return ncv_transition(dt) * x + gaussian_draw(rng, q * MatrixXd::Identity(4, 4));
}

/// Position rows [n, e] of an NCV state.
inline MatrixXd ncv_position_selector() {
  MatrixXd h = MatrixXd::Zero(2, 4);
  h(0, 0) = 1;
  h(1, 2) = 1;
  return h;
}

/// y = target position + bias + v.
inline VectorXd measure_relative(const VectorXd& target, const VectorXd& bias, const MatrixXd& R, std::mt19937_64& rng) {
  return ncv_position_selector() * target + bias + gaussian_draw(rng, R);
}

/// m = bias + v (landmark position known, so only the bias remains).
inline VectorXd measure_landmark(const VectorXd& bias, const MatrixXd& R, std::mt19937_64& rng) {
  return bias + gaussian_draw(rng, R);
}

// Dubins car, pose [x, y, theta].

struct DubinsControl {
  double v = 1.0;    // m/s
  double phi = 0.0;  // steering angle, rad
};

/// Noise-free Euler step.
inline VectorXd dubins_mean(const VectorXd& pose, const DubinsControl& u, double wheelbase, double dt) {
  VectorXd out(3);
  out(0) = pose(0) + u.v * std::cos(pose(2)) * dt;
  out(1) = pose(1) + u.v * std::sin(pose(2)) * dt;
  out(2) = wrap_angle(pose(2) + u.v / wheelbase * std::tan(u.phi) * dt);
  return out;
}

inline MatrixXd dubins_jacobian(const VectorXd& pose, const DubinsControl& u, double dt) {
  MatrixXd f = MatrixXd::Identity(3, 3);
  f(0, 2) = -u.v * std::sin(pose(2)) * dt;
  f(1, 2) = u.v * std::cos(pose(2)) * dt;
  return f;
}

inline VectorXd step_dubins(const VectorXd& pose, const DubinsControl& u, double wheelbase, double dt, const MatrixXd& Q,
                            std::mt19937_64& rng) {
  VectorXd out = dubins_mean(pose, u, wheelbase, dt) + gaussian_draw(rng, Q);
  out(2) = wrap_angle(out(2));
  return out;
}

/// Dubins step linearized about `about`: x' = F x + (f(about) - F about) + w.
inline LinearDynamics dubins_linearized(const VectorXd& about, const DubinsControl& u, double wheelbase, double dt,
                                        const MatrixXd& Q) {
  const MatrixXd F = dubins_jacobian(about, u, dt);
  VectorXd offset = dubins_mean(about, u, wheelbase, dt) - F * about;
  // Keep the heading offset consistent with an unwrapped propagation.
  offset(2) = u.v / wheelbase * std::tan(u.phi) * dt;
  return {F, MatrixXd::Identity(3, 3), offset, Q};
}

/// Bearing (relative to heading) and range from a pose to a 2-d point.
inline VectorXd bearing_range(const VectorXd& pose, const Eigen::Vector2d& point) {
  const double dx = point(0) - pose(0), dy = point(1) - pose(1);
  return (VectorXd(2) << wrap_angle(std::atan2(dy, dx) - pose(2)), std::hypot(dx, dy)).finished();
}

/// Jacobian of bearing_range w.r.t. [x, y, theta, px, py].
inline MatrixXd bearing_range_jacobian(const VectorXd& pose, const Eigen::Vector2d& point) {
  const double dx = point(0) - pose(0), dy = point(1) - pose(1), q = dx * dx + dy * dy, r = std::sqrt(q);
  MatrixXd j(2, 5);
  j << dy / q, -dx / q, -1, -dy / q, dx / q,  //
      -dx / r, -dy / r, 0, dx / r, dy / r;
  return j;
}

/// Noisy bearing/range; nullopt when the point coincides with the robot.
inline std::optional<VectorXd> measure_bearing_range(const VectorXd& pose, const Eigen::Vector2d& point, double sigma_bearing,
                                                     double sigma_range, std::mt19937_64& rng) {
  if ((point - pose.head<2>()).norm() < 1e-9) return std::nullopt;
  std::normal_distribution<double> nd;
  VectorXd z = bearing_range(pose, point);
  z(0) = wrap_angle(z(0) + sigma_bearing * nd(rng));
  z(1) += sigma_range * nd(rng);
  return z;
}

}  // namespace fgddf::scenarios
