#pragma once

// Cooperative localization: Dubins robots on a cyclic network, each
// estimating its own pose and its neighbours' poses from landmark and
// robot-to-robot bearing/range measurements. Runs FG-DDF, the ego-only
// CI-CL baseline and the centralized EKF on the same measurement stream.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fgddf/evaluation.hpp"
#include "fgddf/network.hpp"
#include "fgddf/scenarios/centralized.hpp"
#include "fgddf/scenarios/cicl.hpp"
#include "fgddf/scenarios/config.hpp"
#include "fgddf/scenarios/models.hpp"
#include "fgddf/scenarios/tracking.hpp"

namespace fgddf::scenarios {

inline std::string pose_name(std::uint32_t i) { return "p" + std::to_string(i); }

/// Rings of `group_size` robots, consecutive groups joined last-to-first
/// so that the groups themselves form a cycle. 1-based ids.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> cl_default_edges(std::uint32_t robots, std::uint32_t group_size) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> e;
  const std::uint32_t groups = (robots + group_size - 1) / group_size;
  for (std::uint32_t g = 0; g < groups; ++g) {
    const std::uint32_t first = g * group_size + 1, last = std::min(robots, first + group_size - 1);
    for (std::uint32_t i = first; i < last; ++i) e.emplace_back(i, i + 1);
    if (last - first + 1 >= 3) e.emplace_back(first, last);
    if (groups > 1) {
      const std::uint32_t next_first = ((g + 1) % groups) * group_size + 1;
      if (next_first != first) e.emplace_back(last, next_first);
    }
  }
  return e;
}

inline std::vector<std::pair<std::uint32_t, std::uint32_t>> cl_edges(const CLConfig& c) {
  return c.edges.empty() ? cl_default_edges(c.robots, c.group_size) : c.edges;
}

/// Fixed scenario geometry shared by every Monte Carlo run.
struct CLGeometry {
  std::vector<VectorXd> start;                      // initial poses
  std::vector<double> phase;                        // steering phase per robot
  std::vector<Eigen::Vector2d> landmarks;           // all landmarks
  std::vector<std::vector<std::size_t>> observed;   // landmark indices per robot
  std::vector<double> sigma_range;                  // per robot
};

inline DubinsControl cl_control(const CLConfig& c, const CLGeometry& geo, std::size_t i, double time) {
  return {c.speed, c.steer_mean + c.steer_amplitude * std::sin(2 * std::numbers::pi * time / c.steer_period + geo.phase[i])};
}

/// Groups sit on a square grid; robots of a group start evenly spaced on a
/// circle around its centre, heading counter-clockwise. Each robot observes
/// its nearest grid landmarks. Range noise is drawn once from `seed`.
inline CLGeometry cl_geometry(const CLConfig& c, std::uint64_t seed) {
  CLGeometry geo;
  const std::uint32_t groups = (c.robots + c.group_size - 1) / c.group_size;
  const auto cols = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(groups))));
  for (std::uint32_t i = 0; i < c.robots; ++i) {
    const std::uint32_t g = i / c.group_size, m = i % c.group_size;
    const Eigen::Vector2d centre(c.group_spacing * (g % cols), c.group_spacing * (g / cols));
    const double a = 2 * std::numbers::pi * m / c.group_size;
    VectorXd p(3);
    p << centre.x() + c.loop_radius * std::cos(a), centre.y() + c.loop_radius * std::sin(a), wrap_angle(a + std::numbers::pi / 2);
    geo.start.push_back(p);
    geo.phase.push_back(2 * std::numbers::pi * i / c.robots);
  }
  // Grid covering every start position with a margin.
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  for (const auto& p : geo.start) {
    lo_x = std::min(lo_x, p(0)), lo_y = std::min(lo_y, p(1));
    hi_x = std::max(hi_x, p(0)), hi_y = std::max(hi_y, p(1));
  }
  const double s = c.landmark_spacing, margin = 2 * s;
  for (double x = std::floor((lo_x - margin) / s) * s; x <= hi_x + margin; x += s)
    for (double y = std::floor((lo_y - margin) / s) * s; y <= hi_y + margin; y += s) geo.landmarks.emplace_back(x + 0.5 * s, y + 0.5 * s);
  for (std::uint32_t i = 0; i < c.robots; ++i) {
    const std::uint32_t count = c.landmarks_min + i % (c.landmarks_max - c.landmarks_min + 1);
    std::vector<std::size_t> idx(geo.landmarks.size());
    for (std::size_t l = 0; l < idx.size(); ++l) idx[l] = l;
    const Eigen::Vector2d p = geo.start[i].head<2>();
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return (geo.landmarks[a] - p).squaredNorm() < (geo.landmarks[b] - p).squaredNorm();
    });
    idx.resize(std::min<std::size_t>(count, idx.size()));
    geo.observed.push_back(idx);
  }
  auto rng = stream_rng(seed, 0xFFFFFFFFu, 7);
  for (std::uint32_t i = 0; i < c.robots; ++i) {
    const auto pick = static_cast<std::size_t>(rng() % c.sigma_range_choices.size());
    geo.sigma_range.push_back(c.sigma_range_choices[pick]);
  }
  return geo;
}

inline std::vector<StateSpec> cl_task(std::uint32_t index, const Topology& topo) {
  std::vector<StateSpec> task{{pose_name(index + 1), 3, true}};
  for (auto j : topo.neighbors(index)) task.push_back({pose_name(j + 1), 3, true});
  return task;
}

inline NonlinearMeasurement landmark_measurement(const Eigen::Vector2d& lm, const VectorXd& z, double sb, double sr) {
  NonlinearMeasurement m;
  m.h = [lm](const VectorXd& x) { return bearing_range(x, lm); };
  m.jacobian = [lm](const VectorXd& x) -> MatrixXd { return bearing_range_jacobian(x, lm).leftCols(3); };
  m.R = Eigen::Vector2d(sb * sb, sr * sr).asDiagonal();
  m.y = z;
  m.angular = {true, false};
  return m;
}

/// Measurement of the neighbour's position over [ego pose, neighbour pose].
inline NonlinearMeasurement relative_measurement(const VectorXd& z, double sb, double sr) {
  NonlinearMeasurement m;
  m.h = [](const VectorXd& x) { return bearing_range(x.head(3), x.segment<2>(3)); };
  m.jacobian = [](const VectorXd& x) -> MatrixXd {
    MatrixXd j = MatrixXd::Zero(2, 6);
    j.leftCols(5) = bearing_range_jacobian(x.head(3), x.segment<2>(3));
    return j;
  };
  m.R = Eigen::Vector2d(sb * sb, sr * sr).asDiagonal();
  m.y = z;
  m.angular = {true, false};
  return m;
}

inline RunResult run_cl(const ScenarioConfig& c, std::uint32_t run, bool keep_estimates = false) {
  const CLConfig& cc = c.cl;
  const std::uint32_t N = cc.robots;
  const CLGeometry geo = cl_geometry(cc, c.seed);
  const Topology topo = make_topology(cl_edges(cc));
  const double sb = cc.sigma_bearing_deg * std::numbers::pi / 180.0;
  const MatrixXd Q = cc.process_noise.asDiagonal();
  const MatrixXd P0 = cc.prior_std.cwiseAbs2().asDiagonal();

  RunResult out;
  out.run = run;
  auto rng = stream_rng(c.seed, run, 0);
  auto drop_rng = stream_rng(c.seed, run, 1);
  auto base_drop_rng = stream_rng(c.seed, run, 2);

  std::vector<VectorXd> truth = geo.start, prior(N);
  for (std::uint32_t i = 0; i < N; ++i) prior[i] = truth[i] + gaussian_draw(rng, P0);

  std::vector<std::vector<StateSpec>> tasks;
  for (std::uint32_t i = 0; i < N; ++i) tasks.push_back(cl_task(i, topo));
  std::vector<FusionAgent> agents = make_agents(tasks, topo, c.agent);
  std::vector<CiclRobot> base;
  CentralizedFilter central;
  for (std::uint32_t i = 0; i < N; ++i) {
    for (const auto& s : tasks[i]) {
      const std::uint32_t j = static_cast<std::uint32_t>(std::stoul(s.name.substr(1))) - 1;
      agents[i].add_prior(s.name, prior[j], P0);
    }
    base.emplace_back(prior[i], P0);
    central.add_state(pose_name(i + 1), prior[i], P0);
  }
  for (auto& a : agents) a.initialize_channels();

  auto pose_of = [](const MomentGaussian& m, std::size_t block) { return m.mean.segment(static_cast<Eigen::Index>(3 * block), 3); };
  auto pos_err = [](const VectorXd& est, const VectorXd& tru) { return (est.head<2>() - tru.head<2>()).squaredNorm(); };

  std::uint32_t k = 0;
  try {
    for (k = 1; k <= cc.horizon; ++k) {
      const double time = (k - 1) * cc.dt;
      std::vector<DubinsControl> u(N);
      for (std::uint32_t i = 0; i < N; ++i) {
        u[i] = cl_control(cc, geo, i, time);
        truth[i] = step_dubins(truth[i], u[i], cc.wheelbase, cc.dt, Q, rng);
      }

      std::vector<RobotStep> rec(N);
      for (std::uint32_t i = 0; i < N; ++i) {
        const MomentGaussian est = agents[i].estimate();
        std::map<std::string, LinearDynamics> dyn;
        for (std::size_t b = 0; b < tasks[i].size(); ++b) {
          const auto j = static_cast<std::uint32_t>(std::stoul(tasks[i][b].name.substr(1))) - 1;
          dyn[tasks[i][b].name] = dubins_linearized(pose_of(est, b), u[j], cc.wheelbase, cc.dt, Q);
        }
        const auto res = agents[i].predict(dyn);
        rec[i].lambda = res.lambda;
        if (c.agent.conservative) {
          rec[i].psd_margin = res.psd_margin;
          out.min_psd_margin = std::min(out.min_psd_margin, res.psd_margin);
        }
        base[i].predict(dubins_linearized(base[i].mean(), u[i], cc.wheelbase, cc.dt, Q));
      }
      {
        std::map<std::string, LinearDynamics> dyn;
        for (std::uint32_t i = 0; i < N; ++i) {
          const auto [m, P] = central.marginal({pose_name(i + 1)});
          dyn[pose_name(i + 1)] = dubins_linearized(m, u[i], cc.wheelbase, cc.dt, Q);
        }
        central.predict(dyn);
      }

      // Baseline messages: position estimates of the measured neighbour.
      std::vector<std::pair<std::uint32_t, PositionEstimate>> base_msgs;
      for (std::uint32_t i = 0; i < N; ++i) {
        const std::string me = pose_name(i + 1);
        for (auto l : geo.observed[i]) {
          const auto z = measure_bearing_range(truth[i], geo.landmarks[l], sb, geo.sigma_range[i], rng);
          if (!z) continue;
          const auto m = landmark_measurement(geo.landmarks[l], *z, sb, geo.sigma_range[i]);
          agents[i].measure({me}, m);
          central.update({me}, m);
          base[i].update(m);
        }
        for (auto j : topo.neighbors(i)) {
          const auto z = measure_bearing_range(truth[i], truth[j].head<2>(), sb, geo.sigma_range[i], rng);
          if (!z) continue;
          const auto m = relative_measurement(*z, sb, geo.sigma_range[i]);
          agents[i].measure({me, pose_name(j + 1)}, m);
          central.update({me, pose_name(j + 1)}, m);
          base_msgs.emplace_back(j, base[i].neighbour_position(*z, sb, geo.sigma_range[i]));
        }
      }
      for (const auto& [j, p] : base_msgs)
        if (bernoulli(base_drop_rng, c.p_success)) base[j].fuse_position(p);

      exchange(agents, topo, c, drop_rng, rec, out);

      for (std::uint32_t i = 0; i < N; ++i) {
        const MomentGaussian est = agents[i].estimate();
        auto& r = rec[i];
        VectorXd x_true(static_cast<Eigen::Index>(3 * tasks[i].size()));
        std::vector<std::string> names;
        for (std::size_t b = 0; b < tasks[i].size(); ++b) {
          const auto j = static_cast<std::uint32_t>(std::stoul(tasks[i][b].name.substr(1))) - 1;
          x_true.segment(static_cast<Eigen::Index>(3 * b), 3) = truth[j];
          names.push_back(tasks[i][b].name);
        }
        VectorXd e = est.mean - x_true;
        for (Eigen::Index b = 2; b < e.size(); b += 3) e(b) = wrap_angle(e(b));
        const auto [cm, cP] = central.marginal(names);
        r.dim = static_cast<std::uint32_t>(e.size());
        r.nees = nees(e, est.covariance);
        r.min_eig = conservativeness(est.covariance, cP);
        r.pos_dim = 2;
        r.pos_sq_err = pos_err(est.mean.head(3), truth[i]);
        r.pos_var = est.covariance(0, 0) + est.covariance(1, 1);
        r.central_pos_sq_err = pos_err(cm.head(3), truth[i]);
        r.central_pos_var = cP(0, 0) + cP(1, 1);
        r.baseline_pos_sq_err = pos_err(base[i].mean(), truth[i]);
        r.baseline_pos_var = base[i].covariance()(0, 0) + base[i].covariance()(1, 1);
        if (keep_estimates) {
          for (std::uint32_t d = 0; d < 3; ++d)
            out.estimates.push_back({run, k, i + 1, names[0], d, truth[i](d), est.mean(d), est.covariance(d, d)});
        }
      }
      out.steps.push_back(std::move(rec));
    }
  } catch (const std::exception& e) {
    out.failure = e.what();
    out.failed_step = k;
  }
  return out;
}

}  // namespace fgddf::scenarios
