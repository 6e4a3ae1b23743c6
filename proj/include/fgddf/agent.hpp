#pragma once

// One robot in the network: its task, local factor graph, per-neighbour
// channel-filter graphs, and the heterogeneous fusion rules (HS-CF / HS-CI).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgddf/conservative_filter.hpp"
#include "fgddf/filtering.hpp"
#include "fgddf/serialization.hpp"

namespace fgddf {

enum class FusionAlgo : std::uint8_t { ChannelFilter = 0, CovarianceIntersection = 1 };
enum class OmegaCost { Trace, LogDet };
/// When a sender records an HS-CF message in its channel graph.
enum class ChannelUpdate { OnSend, OnDelivery };

class FusionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StateSpec {
  std::string name;
  std::uint16_t dim = 1;
  bool dynamic = true;  // static states (biases, landmarks) live at timestep 0
};

struct FusionMessage {
  std::uint32_t sender = 0;
  std::uint32_t recipient = 0;
  std::uint32_t timestep = 0;
  FusionAlgo algo = FusionAlgo::ChannelFilter;
  std::vector<CanonicalFactor> factors;
};

inline std::vector<std::uint8_t> encode_message(const FusionMessage& m) {
  if (m.factors.size() > 0xFFFF) throw std::length_error("too many factors in one message");
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.put(m.sender);
  w.put(m.recipient);
  w.put(m.timestep);
  w.put(static_cast<std::uint8_t>(m.algo));
  w.put(static_cast<std::uint16_t>(m.factors.size()));
  for (const auto& f : m.factors) write_factor(w, f);
  return out;
}

inline FusionMessage decode_message(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  FusionMessage m;
  m.sender = r.get<std::uint32_t>();
  m.recipient = r.get<std::uint32_t>();
  m.timestep = r.get<std::uint32_t>();
  const auto algo = r.get<std::uint8_t>();
  if (algo > 1) throw DecodeError("unknown fusion algorithm tag");
  m.algo = static_cast<FusionAlgo>(algo);
  const auto count = r.get<std::uint16_t>();
  for (std::uint16_t i = 0; i < count; ++i) m.factors.push_back(read_factor(r));
  if (!r.done()) throw DecodeError("trailing bytes after message");
  return m;
}

/// Golden-section search tolerance on omega.
inline constexpr double kOmegaTolerance = 1e-6;

/// Minimizes a unimodal f on [lo, hi]; the end points are also compared.
template <class F>
double golden_section_minimize(F&& f, double lo, double hi, double tol) {
  const double a = lo, b = hi;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
  double g1 = f(x1), g2 = f(x2);
  while (hi - lo > tol) {
    if (g1 <= g2) {
      hi = x2;
      x2 = x1;
      g2 = g1;
      x1 = hi - invphi * (hi - lo);
      g1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      g1 = g2;
      x2 = lo + invphi * (hi - lo);
      g2 = f(x2);
    }
  }
  double best = 0.5 * (lo + hi), fbest = f(best);
  const double fa = f(a), fb = f(b);
  if (fa < fbest) best = a, fbest = fa;
  if (fb < fbest) best = b;
  return best;
}

/// Cost of the covariance (w L_local + (1 - w) L_remote)^-1.
inline double fused_cost(const MatrixXd& local, const MatrixXd& remote, double w, OmegaCost cost) {
  const MatrixXd l = w * local + (1.0 - w) * remote;
  Eigen::LLT<MatrixXd> llt(l);
  if (llt.info() != Eigen::Success) throw FusionError("fused information matrix is not positive definite");
  if (cost == OmegaCost::LogDet) return -2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return llt.solve(MatrixXd::Identity(l.rows(), l.cols())).trace();
}

/// Weight on the local density minimizing the fused covariance cost.
/// Returns 0.5 when the objective is flat.
inline double optimize_omega(const CanonicalDensity& local, const CanonicalDensity& remote,
                             OmegaCost cost = OmegaCost::Trace) {
  if (canonical(local.scope()) != canonical(remote.scope())) throw ScopeError("optimize_omega: scopes differ");
  const MatrixXd& a = local.lambda();
  const MatrixXd b = align_scope(remote.factor(), local.scope()).lambda();
  auto f = [&](double w) { return fused_cost(a, b, w, cost); };

  const double f0 = f(0.0), fh = f(0.5), f1 = f(1.0);
  const double scale = std::max({std::abs(f0), std::abs(fh), std::abs(f1), 1e-300});
  if (std::max({f0, fh, f1}) - std::min({f0, fh, f1}) <= 1e-12 * scale) return 0.5;

  return golden_section_minimize(f, 0.0, 1.0, kOmegaTolerance);
}

struct AgentOptions {
  FusionAlgo algo = FusionAlgo::ChannelFilter;
  bool conservative = true;
  OmegaCost omega_cost = OmegaCost::Trace;
  ChannelUpdate channel_update = ChannelUpdate::OnSend;
  /// Seed each channel graph with the common prior (all robots start from
  /// the same prior, so it is shared information). When false the channel
  /// graphs start empty.
  bool channel_prior = true;
};

class FusionAgent {
 public:
  FusionAgent(std::uint32_t id, std::vector<StateSpec> task, AgentOptions opt = {})
      : id_(id), task_(std::move(task)), opt_(opt) {
    for (std::size_t i = 0; i < task_.size(); ++i)
      for (std::size_t j = i + 1; j < task_.size(); ++j)
        if (task_[i].name == task_[j].name) throw ScopeError("duplicate state " + task_[i].name + " in task");
  }

  std::uint32_t id() const { return id_; }
  std::uint32_t timestep() const { return k_; }
  const std::vector<StateSpec>& task() const { return task_; }
  const AgentOptions& options() const { return opt_; }
  const FactorGraph& graph() const { return graph_; }
  FactorGraph& graph() { return graph_; }

  bool has_state(const std::string& name) const { return spec_of(name) != nullptr; }

  /// Current key of a task state.
  VariableKey key(const std::string& name) const {
    const StateSpec* s = spec_of(name);
    if (!s) throw ScopeError("state " + name + " is not in the task of agent " + std::to_string(id_));
    return {s->name, s->dynamic ? k_ : 0u, s->dim};
  }

  Scope keys(const std::vector<std::string>& names) const {
    Scope out;
    for (const auto& n : names) out.push_back(key(n));
    return out;
  }

  /// Task keys in task order.
  Scope task_keys() const {
    Scope out;
    for (const auto& s : task_) out.push_back(key(s.name));
    return out;
  }

  void add_prior(const std::string& name, const VectorXd& mean, const MatrixXd& cov) {
    const auto k = key(name);
    auto d = from_moments({{k}, mean, cov});
    graph_.add_factor(d.factor());
  }

  /// Declares neighbour `j`; the common set is the intersection of tasks.
  void add_neighbor(std::uint32_t j, const std::vector<StateSpec>& their_task) {
    std::vector<std::string> common;
    for (const auto& s : task_) {
      auto it = std::find_if(their_task.begin(), their_task.end(), [&](const StateSpec& t) { return t.name == s.name; });
      if (it == their_task.end()) continue;
      if (it->dim != s.dim || it->dynamic != s.dynamic) throw ScopeError("state " + s.name + " declared differently by neighbours");
      common.push_back(s.name);
    }
    common_[j] = std::move(common);
    channels_[j] = FactorGraph{};
  }

  std::vector<std::uint32_t> neighbors() const {
    std::vector<std::uint32_t> out;
    for (const auto& [j, c] : common_) out.push_back(j);
    return out;
  }

  const std::vector<std::string>& common_names(std::uint32_t j) const { return common_.at(j); }

  Scope common_keys(std::uint32_t j) const {
    auto it = common_.find(j);
    if (it == common_.end()) throw ScopeError("agent " + std::to_string(j) + " is not a neighbour of " + std::to_string(id_));
    return keys(it->second);
  }

  /// States not shared with any neighbour.
  std::vector<std::string> local_names() const {
    std::vector<std::string> out;
    for (const auto& s : task_) {
      bool shared = false;
      for (const auto& [j, c] : common_) shared = shared || std::find(c.begin(), c.end(), s.name) != c.end();
      if (!shared) out.push_back(s.name);
    }
    return out;
  }

  const FactorGraph& channel(std::uint32_t j) const { return channels_.at(j); }

  /// Seeds the channel graphs from the current local marginals; call once
  /// after the priors are in place.
  void initialize_channels() {
    for (auto& [j, cf] : channels_) {
      cf = FactorGraph{};
      if (!opt_.channel_prior || common_.at(j).empty()) continue;
      cf.add_factor(marginalize(graph_.joint_factor(), common_keys(j)));
    }
  }

  /// Prediction for every dynamic state followed by roll-up (conservative
  /// when enabled). Returns the deflation constant applied (1 without it).
  ConservativeFilterResult predict(const std::map<std::string, LinearDynamics>& dynamics) {
    Scope past;
    for (const auto& s : task_) {
      if (!s.dynamic) continue;
      auto it = dynamics.find(s.name);
      if (it == dynamics.end()) throw ScopeError("no dynamics given for state " + s.name);
      const auto cur = key(s.name);
      add_prediction(graph_, cur, it->second);
      past.push_back(cur);
    }

    ConservativeFilterResult res;
    if (opt_.conservative && !past.empty()) {
      ConservativeFilterSpec spec;
      spec.past = past;
      std::vector<std::string> local = local_names();
      for (const auto& n : local) {
        const auto* s = spec_of(n);
        if (s->dynamic) spec.local.push_back({n, k_, s->dim});
        spec.local.push_back({n, s->dynamic ? k_ + 1 : 0u, s->dim});
      }
      for (const auto& v : past)
        if (!scope_contains(spec.local, v)) spec.common_past.push_back(v);
      spec.pattern = pattern_at(k_ + 1);
      res = conservative_filter(graph_, spec);
    } else {
      graph_.eliminate_variables(past);
    }
    graph_.merge_duplicate_scopes();

    for (auto& [j, cf] : channels_) {
      Scope cpast;
      for (const auto& n : common_.at(j)) {
        const auto* s = spec_of(n);
        if (!s->dynamic) continue;
        VariableKey cur{n, k_, s->dim};
        if (!cf.has_variable(cur)) cf.add_variable(cur);
        add_prediction(cf, cur, dynamics.at(n));
        cpast.push_back(cur);
      }
      cf.eliminate_variables(cpast);
      cf.scale_factors(res.lambda);
      cf.merge_duplicate_scopes();
    }
    ++k_;
    last_lambda_ = res.lambda;
    return res;
  }

  FactorId measure(const std::vector<std::string>& names, const LinearMeasurement& m) {
    return add_measurement(graph_, keys(names), m);
  }

  /// Linearizes about the current estimate of the measured states.
  FactorId measure(const std::vector<std::string>& names, const NonlinearMeasurement& m) {
    const Scope vars = keys(names);
    const MomentGaussian est = estimate(vars);
    return add_linearized_measurement(graph_, vars, m, est.mean);
  }

  /// Joint estimate over `vars` (in that order) from the local graph.
  MomentGaussian estimate(const Scope& vars) const {
    const MomentGaussian all = to_moments(graph_.joint_density());
    return reorder(all, vars);
  }

  /// Joint estimate over the whole task in task order.
  MomentGaussian estimate() const { return estimate(task_keys()); }

  /// HS-CF: marginal over the common set minus the channel graph. HS-CI:
  /// the marginal itself.
  FusionMessage prepare_message(std::uint32_t j) {
    const Scope common = common_keys(j);
    FusionMessage msg{id_, j, k_, opt_.algo, {}};
    if (common.empty()) return msg;
    const CanonicalFactor marg = marginal_over(common);
    if (opt_.algo == FusionAlgo::CovarianceIntersection) {
      msg.factors.push_back(marg);
      return msg;
    }
    FactorGraph& cf = channels_.at(j);
    CanonicalFactor delta = cf.num_factors() ? factor_diff(marg, cf.joint_factor()) : marg;
    msg.factors.push_back(std::move(delta));
    if (opt_.channel_update == ChannelUpdate::OnSend) record_in_channel(j, msg);
    return msg;
  }

  /// Acknowledged mode: the sender records a delivered HS-CF message.
  void confirm_delivery(const FusionMessage& msg) {
    if (msg.algo == FusionAlgo::ChannelFilter && opt_.channel_update == ChannelUpdate::OnDelivery)
      record_in_channel(msg.recipient, msg);
  }

  /// Returns omega for HS-CI messages (nullopt for HS-CF). `own_marginal`
  /// overrides the local marginal used by HS-CI.
  std::optional<double> fuse_message(const FusionMessage& msg, const CanonicalFactor* own_marginal = nullptr) {
    if (msg.recipient != id_) throw FusionError("message addressed to another agent");
    if (msg.algo != opt_.algo) throw FusionError("message uses a different fusion rule");
    const Scope common = common_keys(msg.sender);
    for (const auto& f : msg.factors)
      for (const auto& k : f.scope())
        if (!scope_contains(common, k)) throw ScopeError("message variable " + to_string(k) + " is outside the common set");
    if (msg.factors.empty()) return std::nullopt;

    if (opt_.algo == FusionAlgo::ChannelFilter) {
      for (const auto& f : msg.factors) {
        graph_.add_factor(f);
        channels_.at(msg.sender).add_factor(f);
      }
      graph_.merge_duplicate_scopes();
      channels_.at(msg.sender).merge_duplicate_scopes();
      return std::nullopt;
    }

    const CanonicalFactor remote = factor_sum(msg.factors);
    const CanonicalFactor local = own_marginal ? *own_marginal : marginal_over(common);
    const CanonicalFactor remote_a = align_scope(remote, local.scope());
    double w;
    try {
      w = optimize_omega(CanonicalDensity(local), CanonicalDensity(remote_a), opt_.omega_cost);
    } catch (const DensityError& e) {
      throw FusionError(std::string("covariance intersection on a non-PD marginal: ") + e.what());
    }
    const CanonicalFactor delta = factor_diff(remote_a, local).scaled(1.0 - w);
    graph_.add_factor(delta);
    graph_.merge_duplicate_scopes();
    return w;
  }

  double last_lambda() const { return last_lambda_; }

  /// Marginal of the local graph over `vars` via variable elimination.
  CanonicalFactor marginal_over(const Scope& vars) const {
    FactorGraph g = graph_;
    Scope drop;
    for (const auto& v : g.variables())
      if (!scope_contains(vars, v)) drop.push_back(v);
    g.eliminate_variables(drop);
    return align_scope(g.joint_factor(), canonical(vars));
  }

  /// Sparsity pattern for the current variable keys at timestep `k`.
  SparsityPattern pattern_at(std::uint32_t k) const {
    auto at = [&](const std::string& n) {
      const auto* s = spec_of(n);
      return VariableKey{n, s->dynamic ? k : 0u, s->dim};
    };
    Scope local;
    for (const auto& n : local_names()) local.push_back(at(n));
    std::map<std::uint32_t, Scope> sets;
    for (const auto& [j, names] : common_) {
      Scope s;
      for (const auto& n : names) s.push_back(at(n));
      sets[j] = std::move(s);
    }
    return neighbour_sparsity_pattern(local, sets);
  }

 private:
  const StateSpec* spec_of(const std::string& name) const {
    for (const auto& s : task_)
      if (s.name == name) return &s;
    return nullptr;
  }

  void record_in_channel(std::uint32_t j, const FusionMessage& msg) {
    FactorGraph& cf = channels_.at(j);
    for (const auto& f : msg.factors) cf.add_factor(f);
    cf.merge_duplicate_scopes();
  }

  static MomentGaussian reorder(const MomentGaussian& m, const Scope& vars) {
    std::vector<Eigen::Index> idx;
    const auto off = block_offsets(m.scope);
    Scope out_scope;
    for (const auto& v : vars) {
      auto it = std::find(m.scope.begin(), m.scope.end(), v);
      if (it == m.scope.end()) throw ScopeError("no estimate for " + to_string(v));
      const auto i = static_cast<std::size_t>(it - m.scope.begin());
      for (std::size_t d = 0; d < it->dim; ++d) idx.push_back(static_cast<Eigen::Index>(off[i] + d));
      out_scope.push_back(*it);
    }
    return {out_scope, detail::select(m.mean, idx), detail::select(m.covariance, idx, idx)};
  }

  std::uint32_t id_;
  std::vector<StateSpec> task_;
  AgentOptions opt_;
  FactorGraph graph_;
  std::map<std::uint32_t, std::vector<std::string>> common_;
  std::map<std::uint32_t, FactorGraph> channels_;
  std::uint32_t k_ = 0;
  double last_lambda_ = 1.0;
};

}  // namespace fgddf
