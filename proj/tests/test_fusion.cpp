#include <random>

#include <gtest/gtest.h>

#include "fgddf/agent.hpp"
#include "test_util.hpp"

using namespace fgddf;
using fgddf::testing::key;
using fgddf::testing::random_pd;
using fgddf::testing::random_vec;
using fgddf::testing::rel_err;

namespace {

LinearDynamics static_dynamics(int n) {
  return {MatrixXd::Identity(n, n), MatrixXd::Identity(n, 1), VectorXd::Zero(1), 1e-3 * MatrixXd::Identity(n, n)};
}

}  // namespace

TEST(MessageCodec, HeaderLayoutAndRoundTrip) {
  std::mt19937_64 rng(50);
  FusionMessage m{3, 7, 42, FusionAlgo::CovarianceIntersection, {}};
  m.factors.push_back(CanonicalFactor({key("x2", 42, 4)}, random_vec(rng, 4), random_pd(rng, 4)));
  m.factors.push_back(CanonicalFactor({key("x3", 42, 2)}, random_vec(rng, 2), random_pd(rng, 2)));
  auto bytes = encode_message(m);
  const std::vector<std::uint8_t> head{3, 0, 0, 0, 7, 0, 0, 0, 42, 0, 0, 0, 1, 2, 0};
  EXPECT_TRUE(std::equal(head.begin(), head.end(), bytes.begin()));
  auto back = decode_message(bytes);
  EXPECT_EQ(back.sender, 3u);
  EXPECT_EQ(back.recipient, 7u);
  EXPECT_EQ(back.timestep, 42u);
  EXPECT_EQ(back.algo, FusionAlgo::CovarianceIntersection);
  ASSERT_EQ(back.factors.size(), 2u);
  EXPECT_EQ(encode_message(back), bytes);
  bytes.pop_back();
  EXPECT_THROW(decode_message(bytes), DecodeError);
}

TEST(OptimizeOmega, IdenticalDensitiesGiveHalf) {
  std::mt19937_64 rng(51);
  CanonicalDensity d(CanonicalFactor({key("a", 0, 3)}, random_vec(rng, 3), random_pd(rng, 3)));
  EXPECT_DOUBLE_EQ(optimize_omega(d, d), 0.5);
  EXPECT_DOUBLE_EQ(optimize_omega(d, d, OmegaCost::LogDet), 0.5);
}

TEST(OptimizeOmega, MirroredDiagonalsGiveHalf) {
  const Scope s{key("a", 0, 2)};
  CanonicalDensity l(CanonicalFactor(s, VectorXd::Zero(2), (VectorXd(2) << 10, 0.1).finished().asDiagonal()));
  CanonicalDensity r(CanonicalFactor(s, VectorXd::Zero(2), (VectorXd(2) << 0.1, 10).finished().asDiagonal()));
  EXPECT_NEAR(optimize_omega(l, r), 0.5, 1e-5);
}

TEST(OptimizeOmega, MatchesDenseGridScan) {
  std::mt19937_64 rng(52);
  for (int t = 0; t < 10; ++t) {
    const Scope s{key("a", 0, 4)};
    const MatrixXd a = random_pd(rng, 4, 0.1), b = random_pd(rng, 4, 0.1);
    CanonicalDensity l(CanonicalFactor(s, VectorXd::Zero(4), a)), r(CanonicalFactor(s, VectorXd::Zero(4), b));
    for (auto cost : {OmegaCost::Trace, OmegaCost::LogDet}) {
      double best = 0, fbest = 1e300;
      for (int i = 0; i <= 100000; ++i) {
        const double w = i / 100000.0;
        const MatrixXd c = (w * a + (1 - w) * b).inverse();
        const double f = cost == OmegaCost::Trace ? c.trace() : std::log(c.determinant());
        if (f < fbest) fbest = f, best = w;
      }
      EXPECT_NEAR(optimize_omega(l, r, cost), best, 1e-4);
    }
  }
}

TEST(OptimizeOmega, ScopeMismatchThrows) {
  CanonicalDensity l(CanonicalFactor({key("a")}, VectorXd::Zero(1), MatrixXd::Identity(1, 1)));
  CanonicalDensity r(CanonicalFactor({key("b")}, VectorXd::Zero(1), MatrixXd::Identity(1, 1)));
  EXPECT_THROW(optimize_omega(l, r), ScopeError);
}

namespace {

// Two agents: i has {a, c}, j has {c, b}; shared state c.
std::pair<FusionAgent, FusionAgent> two_agents(AgentOptions opt) {
  std::vector<StateSpec> ti{{"a", 1, true}, {"c", 2, true}}, tj{{"b", 1, true}, {"c", 2, true}};
  FusionAgent i(0, ti, opt), j(1, tj, opt);
  i.add_neighbor(1, tj);
  j.add_neighbor(0, ti);
  i.add_prior("a", VectorXd::Zero(1), MatrixXd::Identity(1, 1));
  i.add_prior("c", VectorXd::Zero(2), 4.0 * MatrixXd::Identity(2, 2));
  j.add_prior("b", VectorXd::Zero(1), MatrixXd::Identity(1, 1));
  j.add_prior("c", VectorXd::Zero(2), 4.0 * MatrixXd::Identity(2, 2));
  i.initialize_channels();
  j.initialize_channels();
  return {std::move(i), std::move(j)};
}

}  // namespace

TEST(ChannelFilter, FirstMessageFromEmptyChannelIsPriorMarginal) {
  AgentOptions opt;
  opt.channel_prior = false;
  auto [i, j] = two_agents(opt);
  auto msg = i.prepare_message(1);
  ASSERT_EQ(msg.factors.size(), 1u);
  auto expected = from_moments({{key("c", 0, 2)}, VectorXd::Zero(2), 4.0 * MatrixXd::Identity(2, 2)});
  EXPECT_LT(rel_err(msg.factors[0].lambda(), expected.lambda()), 1e-14);
}

TEST(ChannelFilter, SecondMessageWithoutNewDataIsZero) {
  AgentOptions opt;
  opt.channel_prior = false;
  auto [i, j] = two_agents(opt);
  i.measure({"a", "c"}, LinearMeasurement{MatrixXd::Ones(1, 3), MatrixXd::Identity(1, 1), VectorXd::Ones(1)});
  auto first = i.prepare_message(1);
  auto second = i.prepare_message(1);
  EXPECT_GT(first.factors[0].lambda().norm(), 0.0);
  EXPECT_LT(second.factors[0].lambda().norm(), 1e-12);
  EXPECT_LT(second.factors[0].zeta().norm(), 1e-12);
}

TEST(ChannelFilter, AcknowledgedModeDefersChannelUpdate) {
  AgentOptions opt;
  opt.channel_update = ChannelUpdate::OnDelivery;
  auto [i, j] = two_agents(opt);
  i.measure({"c"}, LinearMeasurement{MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2), VectorXd::Ones(2)});
  auto first = i.prepare_message(1);
  auto again = i.prepare_message(1);  // nothing recorded: same content
  EXPECT_LT(rel_err(again.factors[0].lambda(), first.factors[0].lambda()), 1e-14);
  i.confirm_delivery(first);
  auto after = i.prepare_message(1);
  EXPECT_LT(after.factors[0].lambda().norm(), 1e-12);
}

TEST(ChannelFilter, MessageOutsideCommonSetRejected) {
  auto [i, j] = two_agents({});
  FusionMessage bad{1, 0, 0, FusionAlgo::ChannelFilter, {CanonicalFactor({key("b")}, VectorXd::Zero(1), MatrixXd::Identity(1, 1))}};
  EXPECT_THROW(i.fuse_message(bad), ScopeError);
}

TEST(ChannelFilter, HomogeneousPairMatchesCentralizedInformationFilter) {
  // Identical tasks over a static 2-d state; each agent measures once.
  std::vector<StateSpec> task{{"x", 2, true}};
  AgentOptions opt;
  opt.conservative = false;
  FusionAgent i(0, task, opt), j(1, task, opt);
  i.add_neighbor(1, task);
  j.add_neighbor(0, task);
  const MatrixXd P0 = 3.0 * MatrixXd::Identity(2, 2);
  for (auto* a : {&i, &j}) a->add_prior("x", VectorXd::Zero(2), P0);
  i.initialize_channels();
  j.initialize_channels();

  const MatrixXd H1 = (MatrixXd(1, 2) << 1, 0).finished(), H2 = (MatrixXd(1, 2) << 1, 1).finished();
  const MatrixXd R1 = MatrixXd::Constant(1, 1, 0.5), R2 = MatrixXd::Constant(1, 1, 2.0);
  const VectorXd y1 = VectorXd::Constant(1, 1.2), y2 = VectorXd::Constant(1, -0.4);
  i.measure({"x"}, LinearMeasurement{H1, R1, y1});
  j.measure({"x"}, LinearMeasurement{H2, R2, y2});

  auto mij = i.prepare_message(1);
  auto mji = j.prepare_message(0);
  j.fuse_message(mij);
  i.fuse_message(mji);

  // Centralized information filter.
  const MatrixXd L = P0.inverse() + H1.transpose() * R1.inverse() * H1 + H2.transpose() * R2.inverse() * H2;
  const VectorXd z = H1.transpose() * R1.inverse() * y1 + H2.transpose() * R2.inverse() * y2;
  const MatrixXd cov = L.inverse();
  const VectorXd mean = cov * z;
  for (auto* a : {&i, &j}) {
    auto est = a->estimate();
    EXPECT_LT(rel_err(est.covariance, cov), 1e-12);
    EXPECT_LT(rel_err(est.mean, mean), 1e-12);
  }

  // A second exchange with no new data changes nothing.
  i.fuse_message(j.prepare_message(0));
  EXPECT_LT(rel_err(i.estimate().covariance, cov), 1e-12);
}

TEST(CovarianceIntersection, MessageIsDenseMarginal) {
  AgentOptions opt;
  opt.algo = FusionAlgo::CovarianceIntersection;
  auto [i, j] = two_agents(opt);
  i.measure({"a", "c"}, LinearMeasurement{MatrixXd::Ones(1, 3), MatrixXd::Identity(1, 1), VectorXd::Ones(1)});
  auto msg = i.prepare_message(1);
  const auto joint = i.graph().joint_factor();  // scope a, c
  auto [mu, cov] = fgddf::testing::covariance_marginal(joint.lambda(), joint.zeta(), {1, 2});
  auto got = to_moments(CanonicalDensity(msg.factors[0]));
  EXPECT_LT(rel_err(got.covariance, cov), 1e-12);
  EXPECT_LT(rel_err(got.mean, mu), 1e-12);
}

TEST(CovarianceIntersection, IdenticalMarginalsLeaveEstimateUnchanged) {
  AgentOptions opt;
  opt.algo = FusionAlgo::CovarianceIntersection;
  auto [i, j] = two_agents(opt);
  const auto before = i.estimate();
  auto w = i.fuse_message(j.prepare_message(0));
  ASSERT_TRUE(w.has_value());
  EXPECT_DOUBLE_EQ(*w, 0.5);
  EXPECT_LT(rel_err(i.estimate().covariance, before.covariance), 1e-12);
}

TEST(CovarianceIntersection, FusedTraceNotAboveEitherInput) {
  std::mt19937_64 rng(53);
  AgentOptions opt;
  opt.algo = FusionAlgo::CovarianceIntersection;
  for (int t = 0; t < 10; ++t) {
    auto [i, j] = two_agents(opt);
    MatrixXd Hi = random_pd(rng, 2), Hj = random_pd(rng, 2);
    i.measure({"c"}, LinearMeasurement{Hi, MatrixXd::Identity(2, 2), random_vec(rng, 2)});
    j.measure({"c"}, LinearMeasurement{Hj, MatrixXd::Identity(2, 2), random_vec(rng, 2)});
    const double ti = i.estimate(i.keys({"c"})).covariance.trace();
    const double tj = j.estimate(j.keys({"c"})).covariance.trace();
    i.fuse_message(j.prepare_message(0));
    const double tf = i.estimate(i.keys({"c"})).covariance.trace();
    EXPECT_LE(tf, std::min(ti, tj) + 1e-12);
  }
}

TEST(CovarianceIntersection, FusedCovarianceBoundsTrueErrorUnderAnyCorrelation) {
  // Two estimates of the same 2-d state with correlated errors. For every
  // omega, the CI covariance must dominate the fused estimator's true error.
  std::mt19937_64 rng(54);
  std::vector<StateSpec> task{{"x", 2, true}};
  AgentOptions opt;
  opt.algo = FusionAlgo::CovarianceIntersection;
  for (int t = 0; t < 20; ++t) {
    const MatrixXd J = random_pd(rng, 4, 0.2);  // joint error covariance
    const MatrixXd P1 = J.topLeftCorner(2, 2), P2 = J.bottomRightCorner(2, 2);
    FusionAgent i(0, task, opt);
    i.add_neighbor(1, task);
    i.add_prior("x", VectorXd::Zero(2), P1);
    FusionMessage msg{1, 0, 0, FusionAlgo::CovarianceIntersection,
                      {from_moments({{key("x", 0, 2)}, VectorXd::Zero(2), P2}).factor()}};
    const double w = *i.fuse_message(msg);
    const MatrixXd L1 = P1.inverse(), L2 = P2.inverse();
    const MatrixXd Lf = w * L1 + (1 - w) * L2;
    EXPECT_LT(rel_err(i.graph().joint_factor().lambda(), Lf), 1e-10);
    const MatrixXd C = Lf.inverse();
    MatrixXd gain(2, 4);
    gain << C * w * L1, C * (1 - w) * L2;
    const MatrixXd truth = gain * J * gain.transpose();
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(C - truth).eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(FusionAgent, CommonAndLocalSetsFromTasks) {
  std::vector<StateSpec> t1{{"x1", 4, true}, {"x2", 4, true}, {"x3", 4, true}, {"s1", 2, false}};
  std::vector<StateSpec> t2{{"x2", 4, true}, {"x3", 4, true}, {"s2", 2, false}};
  FusionAgent a(0, t1);
  a.add_neighbor(1, t2);
  EXPECT_EQ(a.common_names(1), (std::vector<std::string>{"x2", "x3"}));
  EXPECT_EQ(a.local_names(), (std::vector<std::string>{"x1", "s1"}));
  EXPECT_EQ(a.key("s1").timestep, 0u);
}

TEST(FusionAgent, PredictRollsUpAndAdvancesTime) {
  std::vector<StateSpec> task{{"x", 2, true}, {"s", 1, false}};
  FusionAgent a(0, task);
  a.add_prior("x", VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  a.add_prior("s", VectorXd::Zero(1), MatrixXd::Identity(1, 1));
  a.initialize_channels();
  auto res = a.predict({{"x", static_dynamics(2)}});
  EXPECT_EQ(a.timestep(), 1u);
  EXPECT_DOUBLE_EQ(res.lambda, 1.0);
  EXPECT_TRUE(a.graph().has_variable(key("x", 1)));
  EXPECT_FALSE(a.graph().has_variable(key("x", 0)));
  EXPECT_TRUE(a.graph().has_variable(key("s", 0)));
}
