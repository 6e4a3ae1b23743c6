#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fgddf/scenarios/cl.hpp"
#include "fgddf/scenarios/tracking.hpp"
#include "test_util.hpp"

using namespace fgddf;
using namespace fgddf::scenarios;
using fgddf::testing::rel_err;

namespace {

MatrixXd sample_cov(const std::vector<VectorXd>& xs) {
  const auto n = xs.front().size();
  VectorXd m = VectorXd::Zero(n);
  for (const auto& x : xs) m += x;
  m /= static_cast<double>(xs.size());
  MatrixXd c = MatrixXd::Zero(n, n);
  for (const auto& x : xs) c += (x - m) * (x - m).transpose();
  return c / static_cast<double>(xs.size() - 1);
}

std::filesystem::path source_dir() { return std::filesystem::path(FGDDF_SOURCE_DIR); }

}  // namespace

// Truth models.

TEST(StepNcv, NoiseFreeKinematics) {
  std::mt19937_64 rng(1);
  VectorXd still = VectorXd::Zero(4);
  still(0) = 3;
  still(2) = -1;
  EXPECT_EQ(step_ncv(still, 0.1, 0.0, rng), still);
  VectorXd moving(4);
  moving << 0, 1, 0, 0;
  const VectorXd next = step_ncv(moving, 0.1, 0.0, rng);
  EXPECT_NEAR(next(0), 0.1, 1e-15);
  EXPECT_NEAR(next(1), 1.0, 1e-15);
}

TEST(StepNcv, ProcessNoiseCovariance) {
  std::mt19937_64 rng(2);
  std::vector<VectorXd> w;
  for (int i = 0; i < 100000; ++i) w.push_back(step_ncv(VectorXd::Zero(4), 0.1, 0.08, rng));
  const MatrixXd c = sample_cov(w);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(c(i, i), 0.08, 0.03 * 0.08);
    for (int j = 0; j < i; ++j) EXPECT_NEAR(c(i, j), 0.0, 0.03 * 0.08);
  }
}

TEST(StepDubins, StraightLineAndStandstill) {
  std::mt19937_64 rng(3);
  const MatrixXd Z = MatrixXd::Zero(3, 3);
  VectorXd p(3);
  p << 1, 2, 0.3;
  const VectorXd s = step_dubins(p, {2.0, 0.0}, 1.0, 0.5, Z, rng);
  EXPECT_NEAR(s(0), 1 + std::cos(0.3), 1e-14);
  EXPECT_NEAR(s(1), 2 + std::sin(0.3), 1e-14);
  EXPECT_NEAR(s(2), 0.3, 1e-14);
  EXPECT_TRUE(step_dubins(p, {0.0, 0.4}, 1.0, 0.5, Z, rng).isApprox(p));
}

TEST(StepDubins, QuarterTurnConvergesToCircularArc) {
  // v = 1, L = 1, tan(phi) = 0.5: turn rate 0.5 rad/s on a circle of radius 2.
  const DubinsControl u{1.0, std::atan(0.5)};
  const MatrixXd Z = MatrixXd::Zero(3, 3);
  auto arc_error = [&](double dt) {
    std::mt19937_64 rng(4);
    VectorXd p = VectorXd::Zero(3);
    const int steps = static_cast<int>(std::round((std::numbers::pi / 2) / 0.5 / dt));
    for (int i = 0; i < steps; ++i) p = step_dubins(p, u, 1.0, dt, Z, rng);
    const double th = 0.5 * steps * dt;
    EXPECT_NEAR(p(2), th, 1e-9);
    return std::hypot(p(0) - 2 * std::sin(th), p(1) - 2 * (1 - std::cos(th)));
  };
  const double T = std::numbers::pi, omega = 0.5;
  const double e1 = arc_error(1e-3), e2 = arc_error(5e-4);
  EXPECT_LT(e1, omega * T * 1e-3);
  EXPECT_NEAR(e1 / e2, 2.0, 0.2);
}

TEST(DubinsLinearized, MatchesFiniteDifferencesAndMean) {
  VectorXd x(3);
  x << 1.0, -2.0, 2.9;
  const DubinsControl u{1.3, 0.2};
  const auto d = dubins_linearized(x, u, 1.0, 0.1, MatrixXd::Identity(3, 3));
  const double h = 1e-6;
  for (int c = 0; c < 3; ++c) {
    VectorXd a = x, b = x;
    a(c) += h;
    b(c) -= h;
    VectorXd diff = dubins_mean(a, u, 1.0, 0.1) - dubins_mean(b, u, 1.0, 0.1);
    diff(2) = wrap_angle(diff(2));
    EXPECT_LT((d.F.col(c) - diff / (2 * h)).norm(), 1e-6);
  }
  VectorXd pred = d.F * x + d.G * d.u, want = dubins_mean(x, u, 1.0, 0.1);
  EXPECT_NEAR(pred(0), want(0), 1e-12);
  EXPECT_NEAR(pred(1), want(1), 1e-12);
  EXPECT_NEAR(wrap_angle(pred(2) - want(2)), 0.0, 1e-12);
}

TEST(MeasureRelative, NoiseFreeAndBiasOffset) {
  std::mt19937_64 rng(5);
  VectorXd x(4);
  x << 4, 1, -3, 2;
  const MatrixXd Z = MatrixXd::Zero(2, 2);
  EXPECT_EQ(measure_relative(x, VectorXd::Zero(2), Z, rng), (VectorXd(2) << 4, -3).finished());
  EXPECT_EQ(measure_relative(x, (VectorXd(2) << 1, 2).finished(), Z, rng), (VectorXd(2) << 5, -1).finished());
  EXPECT_EQ(measure_landmark((VectorXd(2) << 1, 2).finished(), Z, rng), (VectorXd(2) << 1, 2).finished());
}

TEST(MeasureRelative, SampleVarianceMatchesNoiseTable) {
  std::mt19937_64 rng(6);
  const MatrixXd R = (MatrixXd(2, 2) << 1, 0, 0, 5).finished();
  std::vector<VectorXd> ys, ms;
  for (int i = 0; i < 100000; ++i) {
    ys.push_back(measure_relative(VectorXd::Zero(4), VectorXd::Zero(2), R, rng));
    ms.push_back(measure_landmark(VectorXd::Zero(2), R, rng));
  }
  for (const auto& c : {sample_cov(ys), sample_cov(ms)}) {
    EXPECT_NEAR(c(0, 0), 1.0, 0.03);
    EXPECT_NEAR(c(1, 1), 5.0, 0.15);
  }
}

TEST(BearingRange, CardinalGeometry) {
  VectorXd p = VectorXd::Zero(3);
  const auto z = bearing_range(p, {5, 0});
  EXPECT_NEAR(z(0), 0.0, 1e-15);
  EXPECT_NEAR(z(1), 5.0, 1e-15);
  p(2) = std::numbers::pi / 2;
  EXPECT_NEAR(bearing_range(p, {5, 0})(0), -std::numbers::pi / 2, 1e-15);
}

TEST(BearingRange, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-10, 10), A(-3, 3);
  for (int t = 0; t < 200; ++t) {
    VectorXd x(5);
    x << U(rng), U(rng), A(rng), U(rng), U(rng);
    if ((x.segment<2>(3) - x.head<2>()).norm() < 0.5) continue;
    auto h = [](const VectorXd& v) { return bearing_range(v.head(3), v.segment<2>(3)); };
    const MatrixXd J = bearing_range_jacobian(x.head(3), x.segment<2>(3));
    const double e = 1e-6;
    for (int c = 0; c < 5; ++c) {
      VectorXd a = x, b = x;
      a(c) += e;
      b(c) -= e;
      VectorXd d = h(a) - h(b);
      d(0) = wrap_angle(d(0));
      EXPECT_LT((J.col(c) - d / (2 * e)).norm(), 1e-6);
    }
  }
}

TEST(BearingRange, CoincidentPointSkipped) {
  std::mt19937_64 rng(8);
  VectorXd p(3);
  p << 1, 1, 0;
  EXPECT_FALSE(measure_bearing_range(p, {1, 1}, 0.01, 1.0, rng).has_value());
  EXPECT_TRUE(measure_bearing_range(p, {2, 1}, 0.01, 1.0, rng).has_value());
}

// Centralized oracle.

TEST(CentralizedFilter, SingleTargetEqualsLoneAgent) {
  const double dt = 0.1, q = 0.08;
  CentralizedFilter c;
  VectorXd m0(4);
  m0 << 1, 0, -1, 0.5;
  const MatrixXd P0 = 4 * MatrixXd::Identity(4, 4);
  c.add_state("x1", m0, P0);
  AgentOptions opt;
  opt.conservative = false;
  FusionAgent a(0, {{"x1", 4, true}}, opt);
  a.add_prior("x1", m0, P0);
  std::mt19937_64 rng(9);
  const auto dyn = ncv_dynamics(dt, q);
  MatrixXd R = (MatrixXd(2, 2) << 2, 0.3, 0.3, 1).finished();
  for (int k = 0; k < 30; ++k) {
    c.predict({{"x1", dyn}});
    a.predict({{"x1", dyn}});
    const LinearMeasurement m{ncv_position_selector(), R, gaussian_draw(rng, R)};
    c.update({"x1"}, m);
    a.measure({"x1"}, m);
    const auto [cm, cP] = c.marginal({"x1"});
    EXPECT_LT(rel_err(a.estimate().covariance, cP), 1e-10);
    EXPECT_LT(rel_err(a.estimate().mean, cm), 1e-10);
  }
}

TEST(CentralizedFilter, RepeatedMeasurementsShrinkCovariance) {
  CentralizedFilter c;
  c.add_state("s", VectorXd::Zero(2), 5 * MatrixXd::Identity(2, 2), false);
  const LinearMeasurement m{MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2), VectorXd::Ones(2)};
  double prev = c.covariance().trace();
  for (int i = 0; i < 10; ++i) {
    c.update({"s"}, m);
    EXPECT_LT(c.covariance().trace(), prev);
    prev = c.covariance().trace();
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatrixXd>(c.covariance()).eigenvalues()(0), 0.0);
  }
  // Static states are untouched by prediction.
  const MatrixXd before = c.covariance();
  c.predict({});
  EXPECT_EQ(c.covariance(), before);
}

TEST(CentralizedFilter, UnknownStateThrows) {
  CentralizedFilter c;
  c.add_state("a", VectorXd::Zero(1), MatrixXd::Identity(1, 1));
  EXPECT_THROW(c.marginal({"b"}), ScopeError);
  EXPECT_THROW(c.add_state("a", VectorXd::Zero(1), MatrixXd::Identity(1, 1)), ScopeError);
}

// Tracking scenario.

TEST(TrackingScenario, DimensionBookkeeping) {
  auto c = default_tracking_config();
  std::vector<std::size_t> dims;
  for (std::size_t i = 0; i < 4; ++i) dims.push_back(task_dim(tracking_task(c.tracking, i)));
  EXPECT_EQ(dims, (std::vector<std::size_t>{14, 10, 18, 14}));
  const auto agents = make_agents({tracking_task(c.tracking, 0), tracking_task(c.tracking, 1), tracking_task(c.tracking, 2),
                                   tracking_task(c.tracking, 3)},
                                  make_topology(c.edges), c.agent);
  std::size_t max_common = 0;
  for (const auto& a : agents)
    for (auto j : a.neighbors()) max_common = std::max(max_common, scope_dim(a.common_keys(j)));
  EXPECT_EQ(max_common, 8u);
  c.tracking.homogeneous = true;
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(task_dim(tracking_task(c.tracking, i)), 32u);
  // Dense payload n + n^2: 8 common states vs 32.
  EXPECT_LE((8.0 + 64.0) / (32.0 + 1024.0), 0.10);
}

TEST(TrackingScenario, DeterministicForSeed) {
  auto c = default_tracking_config();
  c.tracking.horizon = 15;
  const auto a = run_tracking(c, 3, true), b = run_tracking(c, 3, true);
  ASSERT_TRUE(a.ok()) << a.failure;
  ASSERT_EQ(a.estimates.size(), b.estimates.size());
  for (std::size_t i = 0; i < a.estimates.size(); ++i) {
    EXPECT_EQ(a.estimates[i].estimate, b.estimates[i].estimate);
    EXPECT_EQ(a.estimates[i].truth, b.estimates[i].truth);
  }
  const auto other = run_tracking(c, 4, true);
  EXPECT_NE(other.estimates.front().truth, a.estimates.front().truth);
}

TEST(TrackingScenario, HomogeneousPairMatchesCentralized) {
  auto c = default_tracking_config();
  c.tracking.robots.resize(2);
  c.tracking.homogeneous = true;
  c.tracking.horizon = 30;
  c.edges = {{1, 2}};
  c.agent.conservative = false;
  const auto r = run_tracking(c, 0);
  ASSERT_TRUE(r.ok()) << r.failure;
  for (const auto& step : r.steps)
    for (const auto& s : step) {
      EXPECT_NEAR(s.min_eig, 0.0, 1e-8);
      EXPECT_NEAR(s.pos_sq_err, s.central_pos_sq_err, 1e-8 * std::max(1.0, s.central_pos_sq_err));
    }
}

TEST(TrackingScenario, ConservativeFilterKeepsDeflationPsd) {
  auto c = default_tracking_config();
  c.tracking.horizon = 40;
  const auto r = run_tracking(c, 0);
  ASSERT_TRUE(r.ok()) << r.failure;
  EXPECT_GE(r.min_psd_margin, -1e-9);
  for (const auto& step : r.steps)
    for (const auto& s : step) {
      EXPECT_GT(s.lambda, 0.0);
      EXPECT_LE(s.lambda, 1.0);
    }
}

TEST(TrackingScenario, MessageBytesScaleWithCommonSet) {
  auto c = default_tracking_config();
  c.tracking.horizon = 3;
  const auto het = run_tracking(c, 0);
  c.tracking.homogeneous = true;
  const auto hom = run_tracking(c, 0);
  ASSERT_TRUE(het.ok() && hom.ok());
  for (std::size_t i = 0; i < 4; ++i) {
    const double ratio = static_cast<double>(het.steps[1][i].bytes_sent) / hom.steps[1][i].bytes_sent;
    EXPECT_LT(ratio, 0.10) << "robot " << i + 1;
  }
}

// Config.

TEST(ScenarioConfig, ShippedTrackingConfigMatchesDefaults) {
  const auto c = load_config(source_dir() / "configs" / "tracking_4r6t.yaml");
  const auto d = default_tracking_config();
  EXPECT_EQ(c.scenario, "tracking");
  EXPECT_EQ(c.runs, 250u);
  EXPECT_EQ(c.edges, d.edges);
  ASSERT_EQ(c.tracking.robots.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(c.tracking.robots[i].targets, d.tracking.robots[i].targets);
    EXPECT_EQ(c.tracking.robots[i].r_target, d.tracking.robots[i].r_target);
    EXPECT_EQ(c.tracking.robots[i].r_landmark, d.tracking.robots[i].r_landmark);
  }
  EXPECT_DOUBLE_EQ(c.tracking.process_noise, 0.08);
  EXPECT_EQ(c.agent.algo, FusionAlgo::ChannelFilter);
}

TEST(ScenarioConfig, ShippedClConfigLoads) {
  const auto c = load_config(source_dir() / "configs" / "cl_20r.yaml");
  EXPECT_EQ(c.scenario, "cl");
  EXPECT_EQ(c.cl.robots, 20u);
  EXPECT_EQ(c.agent.algo, FusionAlgo::CovarianceIntersection);
}

TEST(ScenarioConfig, ErrorsNameTheProblem) {
  try {
    load_config("/nonexistent/cfg.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/cfg.yaml"), std::string::npos);
  }
  EXPECT_THROW(parse_config(YAML::Load("fusion: {algo: magic}")), ConfigError);
  EXPECT_THROW(parse_config(YAML::Load("network: {p_success: 1.5}")), ConfigError);
  EXPECT_THROW(parse_config(YAML::Load("network: {edges: [[1, 9]]}")), ConfigError);
  EXPECT_THROW(parse_config(YAML::Load(
                   "tracking: {robots: [{id: 1, targets: [1], r_target: [[1, 2], [0, 1]], r_landmark: [[1, 0], [0, 1]]}]}")),
               ConfigError);
  EXPECT_THROW(parse_config(YAML::Load("[1, 2]")), ConfigError);
}

// Cooperative localization scenario.

TEST(ClScenario, DefaultTopologyIsCyclicRingsOfFive) {
  CLConfig c;
  const Topology t = make_topology(cl_edges(c));
  EXPECT_EQ(t.edges().size(), 24u);
  EXPECT_TRUE(t.cyclic());
  std::vector<std::uint32_t> all(20);
  for (std::uint32_t i = 0; i < 20; ++i) all[i] = i;
  EXPECT_TRUE(t.connected(all));
  for (std::uint32_t i = 0; i < 20; ++i) {
    const auto task = cl_task(i, t);
    EXPECT_EQ(task.front().name, pose_name(i + 1));
    EXPECT_EQ(task.size(), t.neighbors(i).size() + 1);
  }
}

TEST(ClScenario, GeometryLandmarksAndRangeNoise) {
  CLConfig c;
  const auto g = cl_geometry(c, 11), h = cl_geometry(c, 11);
  ASSERT_EQ(g.observed.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_GE(g.observed[i].size(), 3u);
    EXPECT_LE(g.observed[i].size(), 4u);
    EXPECT_TRUE(g.sigma_range[i] == 2.0 || g.sigma_range[i] == 4.0 || g.sigma_range[i] == 6.0);
  }
  EXPECT_EQ(g.sigma_range, h.sigma_range);
}

TEST(ClScenario, ShortRunCompletes) {
  auto c = default_cl_config();
  c.cl.robots = 6;
  c.cl.group_size = 3;
  c.cl.horizon = 20;
  const auto r = run_cl(c, 0);
  ASSERT_TRUE(r.ok()) << r.failure;
  ASSERT_EQ(r.steps.size(), 20u);
  for (const auto& s : r.steps.back()) {
    EXPECT_TRUE(std::isfinite(s.pos_sq_err));
    EXPECT_GT(s.pos_var, 0.0);
    EXPECT_GT(s.baseline_pos_var, 0.0);
  }
}

// CI-CL baseline.

TEST(Cicl, WithoutRelativeMeasurementsMatchesEgoEkf) {
  VectorXd x0(3);
  x0 << 0, 0, 0.2;
  const MatrixXd P0 = MatrixXd::Identity(3, 3) * 0.5;
  CiclRobot r(x0, P0);
  CentralizedFilter c;
  c.add_state("p1", x0, P0);
  const Eigen::Vector2d lm(5, 3);
  const auto m = landmark_measurement(lm, (VectorXd(2) << 0.3, 5.5).finished(), 0.02, 2.0);
  r.update(m);
  c.update({"p1"}, m);
  EXPECT_LT(rel_err(r.covariance(), c.covariance()), 1e-12);
  EXPECT_LT(rel_err(r.mean(), c.mean()), 1e-12);
}

TEST(Cicl, PreciseNeighbourEstimateShrinksUncertainty) {
  CiclRobot sender((VectorXd(3) << 0, 0, 0).finished(), 1e-8 * MatrixXd::Identity(3, 3));
  CiclRobot receiver((VectorXd(3) << 4.5, 0.3, 1.0).finished(), MatrixXd::Identity(3, 3));
  const auto est = sender.neighbour_position((VectorXd(2) << 0.0, 5.0).finished(), 1e-4, 1e-3);
  EXPECT_NEAR(est.mean(0), 5.0, 1e-12);
  EXPECT_NEAR(est.mean(1), 0.0, 1e-12);
  const double before = receiver.covariance().topLeftCorner(2, 2).trace();
  const double w = receiver.fuse_position(est);
  EXPECT_GT(w, 0.0);
  EXPECT_LT(w, 1.0);
  EXPECT_LT(receiver.covariance().topLeftCorner(2, 2).trace(), before);
  EXPECT_LT((receiver.mean().head<2>() - Eigen::Vector2d(5.0, 0.0)).norm(), 0.5);
}
