#pragma once

// Consistency and accuracy statistics over Monte Carlo results.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fgddf/network.hpp"

namespace fgddf {

/// Per-robot record at one timestep of one run.
struct RobotStep {
  double nees = 0.0;                 // over the whole task
  std::uint32_t dim = 0;             // task dimension
  double min_eig = 0.0;              // min eig(Sigma_local - Sigma_central) over the task
  double lambda = 1.0;               // deflation constant applied at this step
  double psd_margin = std::numeric_limits<double>::infinity();  // min eig(L_de - lambda L_sp)
  std::size_t bytes_sent = 0;
  std::size_t bytes_delivered = 0;   // of the messages this robot sent
  double pos_sq_err = 0.0;           // summed over position components
  double pos_var = 0.0;              // summed variance of the same components
  std::uint32_t pos_dim = 0;
  double central_pos_sq_err = 0.0;
  double central_pos_var = 0.0;
  double baseline_pos_sq_err = 0.0;  // CI-CL, cooperative localization only
  double baseline_pos_var = 0.0;
};

struct EstimateRow {
  std::uint32_t run = 0;
  std::uint32_t timestep = 0;
  std::uint32_t robot = 0;  // 1-based
  std::string state;
  std::uint32_t component = 0;
  double truth = 0.0, estimate = 0.0, variance = 0.0;
};

struct RunResult {
  std::uint32_t run = 0;
  std::vector<std::vector<RobotStep>> steps;  // [timestep - 1][robot]
  std::vector<DeliveryRecord> deliveries;
  std::vector<EstimateRow> estimates;
  double min_psd_margin = std::numeric_limits<double>::infinity();
  std::string failure;  // empty on success
  std::uint32_t failed_step = 0;
  bool ok() const { return failure.empty(); }
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// e^T Sigma^-1 e.
inline double nees(const VectorXd& error, const MatrixXd& cov) {
  if (error.size() != cov.rows() || cov.rows() != cov.cols()) throw EvaluationError("nees: dimension mismatch");
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw EvaluationError("nees: covariance is not positive definite");
  return error.dot(llt.solve(error));
}

/// Two-sided bounds for the M-run average of n-dof NEES values.
inline std::pair<double, double> nees_bounds(std::uint32_t n, std::uint32_t runs, double confidence = 0.95) {
  if (runs == 0 || n == 0) throw EvaluationError("nees_bounds: need runs and dimension");
  boost::math::chi_squared dist(static_cast<double>(n) * runs);
  const double a = 0.5 * (1.0 - confidence);
  return {boost::math::quantile(dist, a) / runs, boost::math::quantile(dist, 1.0 - a) / runs};
}

/// Minimum eigenvalue of Sigma_local - Sigma_central (>= 0 means conservative).
inline double conservativeness(const MatrixXd& local, const MatrixXd& central) {
  if (local.rows() != central.rows() || local.cols() != central.cols()) throw EvaluationError("conservativeness: scope mismatch");
  const MatrixXd d = 0.5 * ((local - central) + (local - central).transpose());
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(d, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

/// sqrt(mean(sq_errors)), each entry a squared error of one scalar.
inline double rmse(const std::vector<double>& sq_errors) {
  if (sq_errors.empty()) return 0.0;
  double s = 0.0;
  for (double e : sq_errors) s += e;
  return std::sqrt(s / static_cast<double>(sq_errors.size()));
}

/// Monte Carlo averages per (timestep, robot).
struct StepSummary {
  double nees = 0.0;
  std::uint32_t dim = 0;
  double min_eig_min = std::numeric_limits<double>::infinity();
  double min_eig_mean = 0.0;
  double lambda_mean = 0.0;
  double lambda_min = std::numeric_limits<double>::infinity();
  double lambda_max = -std::numeric_limits<double>::infinity();
  double psd_margin_min = std::numeric_limits<double>::infinity();
  double bytes_sent = 0.0;
  double bytes_delivered = 0.0;
  double rmse = 0.0, sigma = 0.0;
  double central_rmse = 0.0, central_sigma = 0.0;
  double baseline_rmse = 0.0, baseline_sigma = 0.0;
};

struct Summary {
  std::uint32_t runs = 0;
  std::vector<std::vector<StepSummary>> steps;  // [timestep - 1][robot]
  std::size_t robots() const { return steps.empty() ? 0 : steps.front().size(); }
};

/// Averages over the successful runs, accumulated in run order.
inline Summary summarize(const std::vector<RunResult>& results) {
  Summary s;
  const RunResult* first = nullptr;
  for (const auto& r : results)
    if (r.ok()) {
      first = &r;
      break;
    }
  if (!first) return s;
  const auto T = first->steps.size(), R = first->steps.front().size();
  s.steps.assign(T, std::vector<StepSummary>(R));
  std::vector<std::vector<std::array<double, 6>>> pos(T, std::vector<std::array<double, 6>>(R, std::array<double, 6>{}));
  for (const auto& r : results) {
    if (!r.ok()) continue;
    if (r.steps.size() != T) throw EvaluationError("summarize: runs differ in length");
    ++s.runs;
    for (std::size_t k = 0; k < T; ++k)
      for (std::size_t i = 0; i < R; ++i) {
        const auto& x = r.steps[k][i];
        auto& o = s.steps[k][i];
        o.nees += x.nees;
        o.dim = x.dim;
        o.min_eig_min = std::min(o.min_eig_min, x.min_eig);
        o.min_eig_mean += x.min_eig;
        o.lambda_mean += x.lambda;
        o.lambda_min = std::min(o.lambda_min, x.lambda);
        o.lambda_max = std::max(o.lambda_max, x.lambda);
        o.psd_margin_min = std::min(o.psd_margin_min, x.psd_margin);
        o.bytes_sent += static_cast<double>(x.bytes_sent);
        o.bytes_delivered += static_cast<double>(x.bytes_delivered);
        const double d = std::max<std::uint32_t>(x.pos_dim, 1);
        auto& p = pos[k][i];
        p[0] += x.pos_sq_err / d;
        p[1] += x.pos_var / d;
        p[2] += x.central_pos_sq_err / d;
        p[3] += x.central_pos_var / d;
        p[4] += x.baseline_pos_sq_err / d;
        p[5] += x.baseline_pos_var / d;
      }
  }
  const double m = s.runs;
  for (std::size_t k = 0; k < T; ++k)
    for (std::size_t i = 0; i < R; ++i) {
      auto& o = s.steps[k][i];
      o.nees /= m;
      o.min_eig_mean /= m;
      o.lambda_mean /= m;
      o.bytes_sent /= m;
      o.bytes_delivered /= m;
      const auto& p = pos[k][i];
      o.rmse = std::sqrt(p[0] / m);
      o.sigma = std::sqrt(p[1] / m);
      o.central_rmse = std::sqrt(p[2] / m);
      o.central_sigma = std::sqrt(p[3] / m);
      o.baseline_rmse = std::sqrt(p[4] / m);
      o.baseline_sigma = std::sqrt(p[5] / m);
    }
  return s;
}

/// Time average of a per-step quantity for one robot.
template <class F>
double time_average(const Summary& s, std::size_t robot, F&& get, std::size_t from = 0) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = from; k < s.steps.size(); ++k, ++n) acc += get(s.steps[k][robot]);
  return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace fgddf
