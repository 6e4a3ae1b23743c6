#pragma once

// Multi-robot multi-target tracking with unknown per-robot measurement
// biases: linear NCV targets, relative target and landmark measurements.

#include <random>
#include <string>
#include <vector>

#include "fgddf/evaluation.hpp"
#include "fgddf/network.hpp"
#include "fgddf/scenarios/centralized.hpp"
#include "fgddf/scenarios/config.hpp"
#include "fgddf/scenarios/models.hpp"

namespace fgddf::scenarios {

inline std::string target_name(std::uint32_t t) { return "x" + std::to_string(t); }
inline std::string bias_name(std::uint32_t i) { return "s" + std::to_string(i); }

/// RNG for one (run, stream) pair, independent of thread scheduling.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t run, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), run, stream};
  return std::mt19937_64(seq);
}

/// Task of robot `index` (0-based) in task order: targets then bias.
inline std::vector<StateSpec> tracking_task(const TrackingConfig& t, std::size_t index) {
  std::vector<StateSpec> task;
  if (t.homogeneous) {
    for (std::uint32_t x = 1; x <= t.targets; ++x) task.push_back({target_name(x), 4, true});
    for (std::uint32_t i = 1; i <= t.robots.size(); ++i) task.push_back({bias_name(i), 2, false});
    return task;
  }
  for (auto x : t.robots.at(index).targets) task.push_back({target_name(x), 4, true});
  task.push_back({bias_name(t.robots[index].id), 2, false});
  return task;
}

inline std::size_t task_dim(const std::vector<StateSpec>& task) {
  std::size_t n = 0;
  for (const auto& s : task) n += s.dim;
  return n;
}

inline Topology make_topology(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& one_based) {
  Topology topo;
  for (auto [a, b] : one_based) topo.add_edge(a - 1, b - 1);
  return topo;
}

inline std::vector<FusionAgent> make_agents(const std::vector<std::vector<StateSpec>>& tasks, const Topology& topo,
                                            const AgentOptions& opt) {
  std::vector<FusionAgent> agents;
  for (std::size_t i = 0; i < tasks.size(); ++i) agents.emplace_back(static_cast<std::uint32_t>(i), tasks[i], opt);
  for (auto [a, b] : topo.edges()) {
    agents.at(a).add_neighbor(b, tasks.at(b));
    agents.at(b).add_neighbor(a, tasks.at(a));
  }
  return agents;
}

/// Rounds of message exchange for one timestep; accumulates bytes per sender.
inline void exchange(std::vector<FusionAgent>& agents, const Topology& topo, const ScenarioConfig& c, std::mt19937_64& drop_rng,
                     std::vector<RobotStep>& rec, RunResult& out) {
  for (std::uint32_t r = 0; r < c.rounds_per_step; ++r) {
    auto log = run_round(agents, topo, {c.p_success, 1}, drop_rng);
    for (const auto& d : log) {
      rec[d.sender].bytes_sent += d.bytes;
      if (d.delivered) rec[d.sender].bytes_delivered += d.bytes;
    }
    out.deliveries.insert(out.deliveries.end(), log.begin(), log.end());
  }
}

/// One Monte Carlo run. Numerical failures are reported in the result.
inline RunResult run_tracking(const ScenarioConfig& c, std::uint32_t run, bool keep_estimates = false) {
  const TrackingConfig& t = c.tracking;
  const auto R = t.robots.size();
  RunResult out;
  out.run = run;
  auto rng = stream_rng(c.seed, run, 0);
  auto drop_rng = stream_rng(c.seed, run, 1);
  std::normal_distribution<double> nd;

  // Truth and the shared prior.
  std::map<std::string, VectorXd> truth, prior_mean;
  std::map<std::string, MatrixXd> prior_cov;
  for (std::uint32_t x = 1; x <= t.targets; ++x) {
    VectorXd s(4);
    s << t.truth_position_std * nd(rng), t.truth_velocity_std * nd(rng), t.truth_position_std * nd(rng),
        t.truth_velocity_std * nd(rng);
    const MatrixXd P = t.target_prior_variance * MatrixXd::Identity(4, 4);
    truth[target_name(x)] = s;
    prior_mean[target_name(x)] = s + gaussian_draw(rng, P);
    prior_cov[target_name(x)] = P;
  }
  for (std::uint32_t i = 1; i <= R; ++i) {
    const MatrixXd P = t.bias_prior_variance * MatrixXd::Identity(2, 2);
    truth[bias_name(i)] = gaussian_draw(rng, P);
    prior_mean[bias_name(i)] = VectorXd::Zero(2);
    prior_cov[bias_name(i)] = P;
  }

  std::vector<std::vector<StateSpec>> tasks;
  for (std::size_t i = 0; i < R; ++i) tasks.push_back(tracking_task(t, i));
  const Topology topo = make_topology(c.edges);
  std::vector<FusionAgent> agents = make_agents(tasks, topo, c.agent);
  for (std::size_t i = 0; i < R; ++i)
    for (const auto& s : tasks[i]) agents[i].add_prior(s.name, prior_mean.at(s.name), prior_cov.at(s.name));
  for (auto& a : agents) a.initialize_channels();

  CentralizedFilter central;
  for (std::uint32_t x = 1; x <= t.targets; ++x) central.add_state(target_name(x), prior_mean[target_name(x)], prior_cov[target_name(x)]);
  for (std::uint32_t i = 1; i <= R; ++i) central.add_state(bias_name(i), prior_mean[bias_name(i)], prior_cov[bias_name(i)], false);

  std::map<std::string, LinearDynamics> dyn;
  for (std::uint32_t x = 1; x <= t.targets; ++x) dyn[target_name(x)] = ncv_dynamics(t.dt, t.process_noise);

  MatrixXd h_rel(2, 6);
  h_rel << ncv_position_selector(), MatrixXd::Identity(2, 2);

  std::uint32_t k = 0;
  try {
    for (k = 1; k <= t.horizon; ++k) {
      std::vector<RobotStep> rec(R);
      for (std::uint32_t x = 1; x <= t.targets; ++x) truth[target_name(x)] = step_ncv(truth[target_name(x)], t.dt, t.process_noise, rng);

      for (std::size_t i = 0; i < R; ++i) {
        const auto res = agents[i].predict(dyn);
        rec[i].lambda = res.lambda;
        if (c.agent.conservative) {
          rec[i].psd_margin = res.psd_margin;
          out.min_psd_margin = std::min(out.min_psd_margin, res.psd_margin);
        }
      }
      central.predict(dyn);

      for (std::size_t i = 0; i < R; ++i) {
        const auto& robot = t.robots[i];
        const std::string s = bias_name(robot.id);
        for (auto x : robot.targets) {
          const std::string xn = target_name(x);
          const LinearMeasurement m{h_rel, robot.r_target, measure_relative(truth[xn], truth[s], robot.r_target, rng)};
          agents[i].measure({xn, s}, m);
          central.update({xn, s}, m);
        }
        const LinearMeasurement m{MatrixXd::Identity(2, 2), robot.r_landmark, measure_landmark(truth[s], robot.r_landmark, rng)};
        agents[i].measure({s}, m);
        central.update({s}, m);
      }

      exchange(agents, topo, c, drop_rng, rec, out);

      for (std::size_t i = 0; i < R; ++i) {
        std::vector<std::string> names;
        VectorXd x_true(static_cast<Eigen::Index>(task_dim(tasks[i])));
        Eigen::Index o = 0;
        std::vector<Eigen::Index> pos_idx;
        for (const auto& s : tasks[i]) {
          names.push_back(s.name);
          x_true.segment(o, s.dim) = truth.at(s.name);
          if (s.dynamic) pos_idx.insert(pos_idx.end(), {o, o + 2});
          o += s.dim;
        }
        const MomentGaussian est = agents[i].estimate();
        const auto [cm, cc] = central.marginal(names);
        const VectorXd e = est.mean - x_true, ec = cm - x_true;
        auto& r = rec[i];
        r.dim = static_cast<std::uint32_t>(x_true.size());
        r.nees = nees(e, est.covariance);
        r.min_eig = conservativeness(est.covariance, cc);
        r.pos_dim = static_cast<std::uint32_t>(pos_idx.size());
        for (auto p : pos_idx) {
          r.pos_sq_err += e(p) * e(p);
          r.pos_var += est.covariance(p, p);
          r.central_pos_sq_err += ec(p) * ec(p);
          r.central_pos_var += cc(p, p);
        }
        if (keep_estimates) {
          Eigen::Index off = 0;
          for (const auto& s : tasks[i]) {
            for (std::uint32_t d = 0; d < s.dim; ++d, ++off)
              out.estimates.push_back({run, k, static_cast<std::uint32_t>(i + 1), s.name, d, x_true(off), est.mean(off),
                                       est.covariance(off, off)});
          }
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
