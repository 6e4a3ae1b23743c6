#pragma once

// Scenario description, loaded from YAML. See configs/*.yaml for the
// commented schema.

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fgddf/agent.hpp"

namespace fgddf::scenarios {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrackingRobot {
  std::uint32_t id = 0;            // 1-based, as in the config file
  std::vector<std::uint32_t> targets;  // 1-based target ids
  MatrixXd r_target = MatrixXd::Identity(2, 2);
  MatrixXd r_landmark = MatrixXd::Identity(2, 2);
};

struct TrackingConfig {
  double dt = 0.1;
  std::uint32_t horizon = 500;
  double process_noise = 0.08;
  std::uint32_t targets = 6;
  /// Every robot estimates the full global state (communication baseline).
  bool homogeneous = false;
  std::vector<TrackingRobot> robots;
  double target_prior_variance = 10.0;
  double bias_prior_variance = 5.0;
  double truth_position_std = 10.0;
  double truth_velocity_std = 1.0;
};

struct CLConfig {
  std::uint32_t robots = 20;
  std::uint32_t group_size = 5;
  double dt = 0.5;
  std::uint32_t horizon = 200;
  double speed = 1.0;
  double wheelbase = 1.0;
  double steer_mean = 0.15;
  double steer_amplitude = 0.1;
  double steer_period = 40.0;  // seconds
  double loop_radius = 7.0;    // initial circle of each group
  double group_spacing = 30.0;
  double landmark_spacing = 8.0;
  std::uint32_t landmarks_min = 3;
  std::uint32_t landmarks_max = 4;
  double sigma_bearing_deg = 1.0;
  std::vector<double> sigma_range_choices{2.0, 4.0, 6.0};
  Eigen::Vector3d process_noise{0.01, 0.01, 1e-4};  // per-step variances
  Eigen::Vector3d prior_std{1.0, 1.0, 0.1};
  /// Explicit edges (1-based); empty means rings of group_size joined in a cycle.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
};

struct ScenarioConfig {
  std::string scenario = "tracking";  // tracking | cl
  std::uint64_t seed = 1;
  std::uint32_t runs = 1;
  std::uint32_t estimate_runs = 1;  // runs written to estimates.csv
  AgentOptions agent;
  std::uint32_t rounds_per_step = 1;
  double p_success = 1.0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // tracking, 1-based
  TrackingConfig tracking;
  CLConfig cl;
};

inline TrackingConfig default_tracking() {
  TrackingConfig t;
  auto diag = [](double a, double b) { return (MatrixXd(2, 2) << a, 0, 0, b).finished(); };
  t.robots = {{1, {1, 2, 3}, diag(1, 5), diag(1, 5)},
              {2, {2, 3}, diag(3, 3), diag(3, 3)},
              {3, {2, 3, 4, 5}, diag(4, 4), diag(4, 4)},
              {4, {4, 5, 6}, diag(5, 1), diag(5, 1)}};
  return t;
}

inline ScenarioConfig default_tracking_config() {
  ScenarioConfig c;
  c.scenario = "tracking";
  c.tracking = default_tracking();
  c.edges = {{1, 2}, {2, 3}, {3, 4}};
  return c;
}

inline ScenarioConfig default_cl_config() {
  ScenarioConfig c;
  c.scenario = "cl";
  c.agent.algo = FusionAlgo::CovarianceIntersection;
  return c;
}

namespace detail {

template <class T>
T get(const YAML::Node& n, const std::string& key, const T& fallback) {
  if (!n || !n[key]) return fallback;
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

inline MatrixXd matrix(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() == 0) throw ConfigError(what + " must be a non-empty list of rows");
  const auto rows = static_cast<Eigen::Index>(n.size());
  const auto cols = static_cast<Eigen::Index>(n[0].size());
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = n[static_cast<std::size_t>(r)];
    if (!row.IsSequence() || static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError(what + " rows differ in length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].as<double>();
  }
  return m;
}

inline std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list(const YAML::Node& n) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  if (!n) return out;
  if (!n.IsSequence()) throw ConfigError("edges must be a list of [a, b] pairs");
  for (const auto& e : n) {
    if (!e.IsSequence() || e.size() != 2) throw ConfigError("each edge must be a pair [a, b]");
    out.emplace_back(e[0].as<std::uint32_t>(), e[1].as<std::uint32_t>());
  }
  return out;
}

inline bool is_spd(const MatrixXd& m) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose())) return false;
  return Eigen::LLT<MatrixXd>(m).info() == Eigen::Success;
}

}  // namespace detail

inline FusionAlgo parse_algo(const std::string& s) {
  if (s == "hscf") return FusionAlgo::ChannelFilter;
  if (s == "hsci") return FusionAlgo::CovarianceIntersection;
  throw ConfigError("unknown fusion algorithm '" + s + "' (expected hscf or hsci)");
}

inline std::string algo_name(FusionAlgo a) { return a == FusionAlgo::ChannelFilter ? "hscf" : "hsci"; }

inline void validate(const ScenarioConfig& c) {
  if (c.scenario != "tracking" && c.scenario != "cl") throw ConfigError("scenario must be 'tracking' or 'cl'");
  if (c.runs == 0) throw ConfigError("runs must be positive");
  if (c.rounds_per_step == 0) throw ConfigError("rounds_per_step must be positive");
  if (!(c.p_success >= 0.0 && c.p_success <= 1.0)) throw ConfigError("p_success must lie in [0, 1]");
  if (c.scenario == "tracking") {
    const auto& t = c.tracking;
    if (!(t.dt > 0) || t.horizon == 0) throw ConfigError("tracking dt and horizon must be positive");
    if (!(t.process_noise > 0)) throw ConfigError("process_noise must be positive");
    if (t.robots.empty()) throw ConfigError("tracking scenario needs robots");
    for (std::size_t i = 0; i < t.robots.size(); ++i) {
      const auto& r = t.robots[i];
      if (r.id != i + 1) throw ConfigError("robot ids must be 1..N in order");
      for (auto tid : r.targets)
        if (tid == 0 || tid > t.targets) throw ConfigError("robot " + std::to_string(r.id) + " tracks unknown target " + std::to_string(tid));
      if (r.r_target.rows() != 2 || !detail::is_spd(r.r_target)) throw ConfigError("r_target must be a 2x2 SPD matrix");
      if (r.r_landmark.rows() != 2 || !detail::is_spd(r.r_landmark)) throw ConfigError("r_landmark must be a 2x2 SPD matrix");
    }
    for (auto [a, b] : c.edges)
      if (a == 0 || b == 0 || a > t.robots.size() || b > t.robots.size() || a == b)
        throw ConfigError("edge [" + std::to_string(a) + ", " + std::to_string(b) + "] references an unknown robot");
  } else {
    const auto& l = c.cl;
    if (l.robots < 2 || l.group_size == 0) throw ConfigError("cl needs at least two robots and a positive group size");
    if (!(l.dt > 0) || l.horizon == 0) throw ConfigError("cl dt and horizon must be positive");
    if (l.landmarks_min == 0 || l.landmarks_max < l.landmarks_min) throw ConfigError("bad landmark counts");
    if (l.sigma_range_choices.empty()) throw ConfigError("sigma_range_choices must not be empty");
    if ((l.process_noise.array() <= 0).any() || (l.prior_std.array() <= 0).any())
      throw ConfigError("process_noise and prior_std must be positive");
    if (!(std::abs(l.steer_mean) + std::abs(l.steer_amplitude) < 1.5)) throw ConfigError("steering must stay below pi/2");
    for (auto [a, b] : l.edges)
      if (a == 0 || b == 0 || a > l.robots || b > l.robots || a == b) throw ConfigError("cl edge references an unknown robot");
  }
}

inline ScenarioConfig parse_config(const YAML::Node& root) {
  if (!root.IsMap()) throw ConfigError("config root must be a mapping");
  const auto scenario = detail::get<std::string>(root, "scenario", "tracking");
  ScenarioConfig c = scenario == "cl" ? default_cl_config() : default_tracking_config();
  c.scenario = scenario;
  c.seed = detail::get<std::uint64_t>(root, "seed", c.seed);
  c.runs = detail::get<std::uint32_t>(root, "runs", c.runs);

  if (const auto f = root["fusion"]) {
    c.agent.algo = parse_algo(detail::get<std::string>(f, "algo", algo_name(c.agent.algo)));
    c.agent.conservative = detail::get<bool>(f, "conservative", c.agent.conservative);
    const auto cost = detail::get<std::string>(f, "omega_cost", "trace");
    if (cost != "trace" && cost != "logdet") throw ConfigError("omega_cost must be trace or logdet");
    c.agent.omega_cost = cost == "trace" ? OmegaCost::Trace : OmegaCost::LogDet;
    const auto upd = detail::get<std::string>(f, "channel_update", "send");
    if (upd != "send" && upd != "delivery") throw ConfigError("channel_update must be send or delivery");
    c.agent.channel_update = upd == "send" ? ChannelUpdate::OnSend : ChannelUpdate::OnDelivery;
    c.agent.channel_prior = detail::get<bool>(f, "channel_prior", c.agent.channel_prior);
    c.rounds_per_step = detail::get<std::uint32_t>(f, "rounds_per_step", c.rounds_per_step);
  }
  if (const auto n = root["network"]) {
    c.p_success = detail::get<double>(n, "p_success", c.p_success);
    if (n["edges"]) c.edges = detail::edge_list(n["edges"]);
  }
  if (const auto o = root["output"]) c.estimate_runs = detail::get<std::uint32_t>(o, "estimate_runs", c.estimate_runs);

  if (const auto t = root["tracking"]) {
    auto& tc = c.tracking;
    tc.dt = detail::get<double>(t, "dt", tc.dt);
    tc.horizon = detail::get<std::uint32_t>(t, "horizon", tc.horizon);
    tc.process_noise = detail::get<double>(t, "process_noise", tc.process_noise);
    tc.targets = detail::get<std::uint32_t>(t, "targets", tc.targets);
    tc.homogeneous = detail::get<bool>(t, "homogeneous", tc.homogeneous);
    if (const auto p = t["prior"]) {
      tc.target_prior_variance = detail::get<double>(p, "target_variance", tc.target_prior_variance);
      tc.bias_prior_variance = detail::get<double>(p, "bias_variance", tc.bias_prior_variance);
      tc.truth_position_std = detail::get<double>(p, "truth_position_std", tc.truth_position_std);
      tc.truth_velocity_std = detail::get<double>(p, "truth_velocity_std", tc.truth_velocity_std);
    }
    if (const auto rs = t["robots"]) {
      if (!rs.IsSequence()) throw ConfigError("tracking.robots must be a list");
      tc.robots.clear();
      for (const auto& r : rs) {
        TrackingRobot robot;
        robot.id = detail::get<std::uint32_t>(r, "id", 0);
        if (!r["targets"]) throw ConfigError("robot " + std::to_string(robot.id) + " has no targets");
        robot.targets = r["targets"].as<std::vector<std::uint32_t>>();
        if (!r["r_target"] || !r["r_landmark"]) throw ConfigError("robot " + std::to_string(robot.id) + " needs r_target and r_landmark");
        robot.r_target = detail::matrix(r["r_target"], "r_target");
        robot.r_landmark = detail::matrix(r["r_landmark"], "r_landmark");
        tc.robots.push_back(std::move(robot));
      }
    }
  }
  if (const auto l = root["cl"]) {
    auto& cc = c.cl;
    cc.robots = detail::get<std::uint32_t>(l, "robots", cc.robots);
    cc.group_size = detail::get<std::uint32_t>(l, "group_size", cc.group_size);
    cc.dt = detail::get<double>(l, "dt", cc.dt);
    cc.horizon = detail::get<std::uint32_t>(l, "horizon", cc.horizon);
    cc.speed = detail::get<double>(l, "speed", cc.speed);
    cc.wheelbase = detail::get<double>(l, "wheelbase", cc.wheelbase);
    cc.steer_mean = detail::get<double>(l, "steer_mean", cc.steer_mean);
    cc.steer_amplitude = detail::get<double>(l, "steer_amplitude", cc.steer_amplitude);
    cc.steer_period = detail::get<double>(l, "steer_period", cc.steer_period);
    cc.loop_radius = detail::get<double>(l, "loop_radius", cc.loop_radius);
    cc.group_spacing = detail::get<double>(l, "group_spacing", cc.group_spacing);
    cc.landmark_spacing = detail::get<double>(l, "landmark_spacing", cc.landmark_spacing);
    cc.landmarks_min = detail::get<std::uint32_t>(l, "landmarks_min", cc.landmarks_min);
    cc.landmarks_max = detail::get<std::uint32_t>(l, "landmarks_max", cc.landmarks_max);
    cc.sigma_bearing_deg = detail::get<double>(l, "sigma_bearing_deg", cc.sigma_bearing_deg);
    cc.sigma_range_choices = detail::get<std::vector<double>>(l, "sigma_range_choices", cc.sigma_range_choices);
    if (l["process_noise"]) {
      auto v = l["process_noise"].as<std::vector<double>>();
      if (v.size() != 3) throw ConfigError("cl.process_noise needs 3 variances");
      cc.process_noise = {v[0], v[1], v[2]};
    }
    if (l["prior_std"]) {
      auto v = l["prior_std"].as<std::vector<double>>();
      if (v.size() != 3) throw ConfigError("cl.prior_std needs 3 values");
      cc.prior_std = {v[0], v[1], v[2]};
    }
    if (l["edges"]) cc.edges = detail::edge_list(l["edges"]);
  }
  validate(c);
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  try {
    return parse_config(YAML::LoadFile(path.string()));
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace fgddf::scenarios
