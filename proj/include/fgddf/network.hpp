#pragma once

// Synchronous communication rounds over an undirected topology with
// independent Bernoulli message dropout.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "fgddf/agent.hpp"

namespace fgddf {

class Topology {
 public:
  Topology() = default;
  explicit Topology(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    for (auto [a, b] : edges) add_edge(a, b);
  }

  void add_edge(std::uint32_t a, std::uint32_t b) {
    if (a == b) throw std::invalid_argument("self-loop in topology");
    edges_.insert({std::min(a, b), std::max(a, b)});
  }

  /// Edges sorted with the smaller id first.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges() const { return {edges_.begin(), edges_.end()}; }

  std::vector<std::uint32_t> neighbors(std::uint32_t v) const {
    std::vector<std::uint32_t> out;
    for (auto [a, b] : edges_) {
      if (a == v) out.push_back(b);
      if (b == v) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::set<std::uint32_t> nodes() const {
    std::set<std::uint32_t> out;
    for (auto [a, b] : edges_) out.insert({a, b});
    return out;
  }

  /// True if the edges contain a cycle.
  bool cyclic() const {
    std::map<std::uint32_t, std::uint32_t> parent;
    std::function<std::uint32_t(std::uint32_t)> find = [&](std::uint32_t x) {
      auto it = parent.try_emplace(x, x).first;
      if (it->second == x) return x;
      return it->second = find(it->second);
    };
    for (auto [a, b] : edges_) {
      const auto ra = find(a), rb = find(b);
      if (ra == rb) return true;
      parent[ra] = rb;
    }
    return false;
  }

  /// True if all of `ids` are in one connected component.
  bool connected(const std::vector<std::uint32_t>& ids) const {
    if (ids.size() < 2) return true;
    std::set<std::uint32_t> seen{ids.front()};
    std::vector<std::uint32_t> stack{ids.front()};
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto w : neighbors(v))
        if (seen.insert(w).second) stack.push_back(w);
    }
    return std::all_of(ids.begin(), ids.end(), [&](std::uint32_t v) { return seen.count(v) != 0; });
  }

  /// Longest shortest path between any two nodes (per component).
  std::size_t diameter() const {
    std::size_t best = 0;
    for (auto s : nodes()) {
      std::map<std::uint32_t, std::size_t> dist{{s, 0}};
      std::vector<std::uint32_t> frontier{s};
      while (!frontier.empty()) {
        std::vector<std::uint32_t> next;
        for (auto v : frontier)
          for (auto w : neighbors(v))
            if (dist.try_emplace(w, dist[v] + 1).second) next.push_back(w);
        frontier = std::move(next);
      }
      for (const auto& [v, d] : dist) best = std::max(best, d);
    }
    return best;
  }

 private:
  std::set<std::pair<std::uint32_t, std::uint32_t>> edges_;
};

struct DropoutModel {
  double p_success = 1.0;
  std::uint64_t stream = 1;  // selects an RNG stream independent of the scenario noise
};

/// Bernoulli draw from raw 64-bit output, identical on every platform.
inline bool bernoulli(std::mt19937_64& rng, double p) {
  if (p >= 1.0) {
    rng();
    return true;
  }
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u < p;
}

struct DeliveryRecord {
  std::uint32_t timestep = 0;
  std::uint32_t sender = 0;
  std::uint32_t recipient = 0;
  bool delivered = false;
  std::size_t bytes = 0;
};

struct RoundObserver {
  /// Called for every HS-CI fusion with the chosen omega.
  std::function<void(const FusionMessage&, double)> on_omega;
};

/// One synchronous exchange: every directed message along every edge is
/// prepared from the pre-round state, dropped with probability 1 - p, and
/// the delivered ones are fused in sorted (recipient, sender) order.
/// `agents` is indexed by agent id.
inline std::vector<DeliveryRecord> run_round(std::vector<FusionAgent>& agents, const Topology& topo,
                                             const DropoutModel& dropout, std::mt19937_64& rng,
                                             const RoundObserver* observer = nullptr) {
  std::vector<DeliveryRecord> log;
  std::vector<FusionMessage> delivered;
  for (auto [a, b] : topo.edges()) {
    for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
      FusionAgent& sender = agents.at(from);
      FusionMessage msg = sender.prepare_message(to);
      DeliveryRecord rec{msg.timestep, from, to, bernoulli(rng, dropout.p_success), encode_message(msg).size()};
      log.push_back(rec);
      if (rec.delivered) {
        sender.confirm_delivery(msg);
        delivered.push_back(std::move(msg));
      }
    }
  }
  std::stable_sort(delivered.begin(), delivered.end(), [](const FusionMessage& x, const FusionMessage& y) {
    return std::pair{x.recipient, x.sender} < std::pair{y.recipient, y.sender};
  });
  for (const auto& msg : delivered) {
    auto w = agents.at(msg.recipient).fuse_message(msg);
    if (w && observer && observer->on_omega) observer->on_omega(msg, *w);
  }
  return log;
}

inline void write_delivery_header(std::ostream& os) { os << "timestep,sender,recipient,delivered,bytes\n"; }

inline void write_delivery_log(std::ostream& os, const std::vector<DeliveryRecord>& log) {
  for (const auto& r : log)
    os << r.timestep << ',' << r.sender << ',' << r.recipient << ',' << (r.delivered ? 1 : 0) << ',' << r.bytes << '\n';
}

}  // namespace fgddf
