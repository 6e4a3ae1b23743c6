#pragma once

#include <random>
#include <string>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fgddf/gaussian.hpp"

namespace fgddf::testing {

inline MatrixXd random_pd(std::mt19937_64& rng, Eigen::Index n, double ridge = 0.5) {
  std::normal_distribution<double> nd;
  MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = nd(rng);
  return a * a.transpose() + ridge * MatrixXd::Identity(n, n);
}

inline VectorXd random_vec(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> nd;
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

inline VariableKey key(std::string name, std::uint32_t t = 0, std::uint16_t dim = 1) {
  return {std::move(name), t, dim};
}

inline double rel_err(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(1.0, b.norm());
  return (a - b).norm() / scale;
}

// Covariance-form reference marginal: invert, pick rows/cols, invert back.
// Index lists are built by hand here rather than through library helpers.
inline std::pair<VectorXd, MatrixXd> covariance_marginal(const MatrixXd& lambda, const VectorXd& zeta,
                                                         const std::vector<int>& idx) {
  const MatrixXd cov = lambda.inverse();
  const VectorXd mean = cov * zeta;
  const auto m = static_cast<Eigen::Index>(idx.size());
  MatrixXd sub(m, m);
  VectorXd mu(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    mu(i) = mean(idx[i]);
    for (Eigen::Index j = 0; j < m; ++j) sub(i, j) = cov(idx[i], idx[j]);
  }
  return {mu, sub};
}

}  // namespace fgddf::testing
