#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lqm/fundamental_diagram.hpp"

namespace lqm {

using LinkId = std::int32_t;
using JunctionId = std::int32_t;
using CommodityId = std::int32_t;

enum class LinkKind { normal, origin, destination };

enum class FluxRuleKind {
  linear,
  fair_merge,
  priority_merge,
  fifo_diverge,
  evacuation_diverge,
  unified_fair_fifo,
};

struct FluxRule {
  FluxRuleKind kind = FluxRuleKind::linear;
  double priority = 0.5;  // alpha (priority merge) or beta (evacuation diverge)

  static FluxRule linear() { return {FluxRuleKind::linear, 0.5}; }
  static FluxRule fair_merge() { return {FluxRuleKind::fair_merge, 0.5}; }
  static FluxRule priority_merge(double alpha) {
    return {FluxRuleKind::priority_merge, alpha};
  }
  static FluxRule fifo_diverge() { return {FluxRuleKind::fifo_diverge, 0.5}; }
  static FluxRule evacuation_diverge(double beta) {
    return {FluxRuleKind::evacuation_diverge, beta};
  }
  static FluxRule unified() { return {FluxRuleKind::unified_fair_fifo, 0.5}; }
};

/// Periodic on/off gate. Green intervals are half-open [start,end) within
/// one cycle, in hours.
struct SignalProgram {
  double cycle = 0;
  std::vector<std::pair<double, double>> green;

  bool is_green(double t) const {
    double u = std::fmod(t, cycle);
    if (u < 0) u += cycle;
    // Round-off near the cycle boundary wraps to 0.
    if (u >= cycle) u = 0;
    for (const auto& [a, b] : green) {
      if (u >= a && u < b) return true;
    }
    return false;
  }

  double green_ratio() const {
    double g = 0;
    for (const auto& [a, b] : green) g += b - a;
    return g / cycle;
  }
};

struct LinkSpec {
  LinkId id = 0;
  LinkKind kind = LinkKind::normal;
  double length = 0;  // miles, normal links only
  std::shared_ptr<const FundamentalDiagram> fd;  // normal links only
};

struct JunctionSpec {
  JunctionId id = 0;
  std::vector<LinkId> upstream;
  std::vector<LinkId> downstream;
  FluxRule rule;
  std::optional<SignalProgram> signal;
};

struct CommoditySpec {
  CommodityId id = 0;
  std::vector<LinkId> path;
};

struct NetworkError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Network;
Network build_network(const std::vector<LinkSpec>& links,
                      const std::vector<JunctionSpec>& junctions,
                      const std::vector<CommoditySpec>& commodities);

/// Validated immutable topology. Dense indices follow declaration order and
/// are the tie-break ordering everywhere downstream.
class Network {
 public:
  struct Link {
    LinkId id;
    LinkKind kind;
    double length;
    std::shared_ptr<const FundamentalDiagram> fd;
    std::vector<int> commodities;  // dense commodity indices using this link
    int in_junction = -1;   // junction where this link is downstream
    int out_junction = -1;  // junction where this link is upstream
    int slot = -1;          // index among links of the same kind
  };

  struct Junction {
    JunctionId id;
    std::vector<int> upstream;    // dense link indices, declaration order
    std::vector<int> downstream;
    FluxRule rule;
    std::optional<SignalProgram> signal;
    // For each upstream position and each commodity slot of that link:
    // downstream position the commodity turns into (-1 if the commodity
    // terminates here, which validation rejects for non-destinations).
    std::vector<std::vector<int>> branch_of;
  };

  struct Commodity {
    CommodityId id;
    std::vector<int> path;  // dense link indices
  };

  int link_count() const { return static_cast<int>(links_.size()); }
  int junction_count() const { return static_cast<int>(junctions_.size()); }
  int commodity_count() const { return static_cast<int>(commodities_.size()); }
  int normal_count() const { return normal_; }
  int origin_count() const { return origins_; }
  int destination_count() const { return destinations_; }

  const Link& link(int idx) const { return links_.at(idx); }
  const Junction& junction(int idx) const { return junctions_.at(idx); }
  const Commodity& commodity(int idx) const { return commodities_.at(idx); }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Junction>& junctions() const { return junctions_; }
  const std::vector<Commodity>& commodities() const { return commodities_; }

  int link_index(LinkId id) const { return lookup(link_by_id_, id, "link"); }
  int junction_index(JunctionId id) const {
    return lookup(junction_by_id_, id, "junction");
  }
  int commodity_index(CommodityId id) const {
    return lookup(commodity_by_id_, id, "commodity");
  }

  /// Position of dense commodity index `c` within link's commodity list.
  int commodity_slot(int link_idx, int c) const {
    const auto& cs = links_[link_idx].commodities;
    auto it = std::find(cs.begin(), cs.end(), c);
    if (it == cs.end()) {
      throw NetworkError("commodity does not use link");
    }
    return static_cast<int>(it - cs.begin());
  }

 private:
  friend Network build_network(const std::vector<LinkSpec>&,
                               const std::vector<JunctionSpec>&,
                               const std::vector<CommoditySpec>&);

  template <typename IdT>
  static int lookup(const std::map<IdT, int>& m, IdT id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) {
      throw NetworkError(std::string("unknown ") + what + " id " +
                         std::to_string(id));
    }
    return it->second;
  }

  std::vector<Link> links_;
  std::vector<Junction> junctions_;
  std::vector<Commodity> commodities_;
  std::map<LinkId, int> link_by_id_;
  std::map<JunctionId, int> junction_by_id_;
  std::map<CommodityId, int> commodity_by_id_;
  int normal_ = 0, origins_ = 0, destinations_ = 0;
};

inline Network build_network(const std::vector<LinkSpec>& links,
                             const std::vector<JunctionSpec>& junctions,
                             const std::vector<CommoditySpec>& commodities) {
  Network net;

  for (const auto& ls : links) {
    if (net.link_by_id_.count(ls.id)) {
      throw NetworkError("duplicate link id " + std::to_string(ls.id));
    }
    Network::Link l;
    l.id = ls.id;
    l.kind = ls.kind;
    l.length = ls.length;
    l.fd = ls.fd;
    if (ls.kind == LinkKind::normal) {
      if (!(ls.length > 0)) {
        throw NetworkError("normal link " + std::to_string(ls.id) +
                           " must have length > 0");
      }
      if (!ls.fd) {
        throw NetworkError("normal link " + std::to_string(ls.id) +
                           " must have a fundamental diagram");
      }
      l.slot = net.normal_++;
    } else {
      if (ls.length != 0 || ls.fd) {
        throw NetworkError("dummy link " + std::to_string(ls.id) +
                           " must not carry length or fd");
      }
      l.slot = ls.kind == LinkKind::origin ? net.origins_++
                                           : net.destinations_++;
    }
    net.link_by_id_[ls.id] = static_cast<int>(net.links_.size());
    net.links_.push_back(std::move(l));
  }

  for (const auto& js : junctions) {
    if (net.junction_by_id_.count(js.id)) {
      throw NetworkError("duplicate junction id " + std::to_string(js.id));
    }
    Network::Junction j;
    j.id = js.id;
    j.rule = js.rule;
    j.signal = js.signal;
    for (LinkId id : js.upstream) j.upstream.push_back(net.link_index(id));
    for (LinkId id : js.downstream) j.downstream.push_back(net.link_index(id));
    if (j.upstream.empty() || j.downstream.empty()) {
      throw NetworkError("junction " + std::to_string(js.id) +
                         " needs upstream and downstream links");
    }

    const std::size_t m = j.upstream.size(), n = j.downstream.size();
    const auto arity_err = [&](const char* want) {
      throw NetworkError("junction " + std::to_string(js.id) + ": rule needs " +
                         want + " topology");
    };
    switch (js.rule.kind) {
      case FluxRuleKind::linear:
        if (m != 1 || n != 1) arity_err("1x1");
        break;
      case FluxRuleKind::fair_merge:
        if (m != 2 || n != 1) arity_err("2x1");
        break;
      case FluxRuleKind::priority_merge:
        if (m != 2 || n != 1) arity_err("2x1");
        if (!(js.rule.priority > 0 && js.rule.priority < 1)) {
          throw NetworkError("merge priority must be in (0,1)");
        }
        break;
      case FluxRuleKind::fifo_diverge:
        if (m != 1 || n != 2) arity_err("1x2");
        break;
      case FluxRuleKind::evacuation_diverge:
        if (m != 1 || n != 2) arity_err("1x2");
        if (!(js.rule.priority > 0 && js.rule.priority < 1)) {
          throw NetworkError("evacuation priority must be in (0,1)");
        }
        break;
      case FluxRuleKind::unified_fair_fifo:
        break;
    }

    // Upstream and downstream sets are disjoint, with one exception: a 1x1
    // junction may close a single link onto itself (ring road).
    const bool ring = m == 1 && n == 1 && j.upstream[0] == j.downstream[0];
    if (!ring) {
      std::set<int> up(j.upstream.begin(), j.upstream.end());
      for (int b : j.downstream) {
        if (up.count(b)) {
          throw NetworkError("junction " + std::to_string(js.id) +
                             ": upstream/downstream sets not disjoint");
        }
      }
    }
    if (std::set<int>(j.upstream.begin(), j.upstream.end()).size() != m ||
        std::set<int>(j.downstream.begin(), j.downstream.end()).size() != n) {
      throw NetworkError("junction " + std::to_string(js.id) +
                         ": repeated link within a side");
    }
    if (js.signal) {
      const auto& sig = *js.signal;
      if (!(sig.cycle > 0)) throw NetworkError("signal cycle must be > 0");
      double prev_end = 0;
      for (std::size_t i = 0; i < sig.green.size(); ++i) {
        const auto& [a, b] = sig.green[i];
        if (!(a < b) || a < 0 || b > sig.cycle || (i > 0 && a < prev_end)) {
          throw NetworkError("signal green intervals must be disjoint and "
                             "inside [0, cycle)");
        }
        prev_end = b;
      }
    }

    const int jidx = static_cast<int>(net.junctions_.size());
    for (int a : j.upstream) {
      if (net.links_[a].out_junction >= 0) {
        throw NetworkError("link " + std::to_string(net.links_[a].id) +
                           " is upstream of two junctions");
      }
      if (net.links_[a].kind == LinkKind::destination) {
        throw NetworkError("destination link cannot feed a junction");
      }
      net.links_[a].out_junction = jidx;
    }
    for (int b : j.downstream) {
      if (net.links_[b].in_junction >= 0) {
        throw NetworkError("link " + std::to_string(net.links_[b].id) +
                           " is downstream of two junctions");
      }
      if (net.links_[b].kind == LinkKind::origin) {
        throw NetworkError("origin link cannot be fed by a junction");
      }
      net.links_[b].in_junction = jidx;
    }
    net.junction_by_id_[js.id] = jidx;
    net.junctions_.push_back(std::move(j));
  }

  for (const auto& l : net.links_) {
    if (l.kind == LinkKind::normal &&
        (l.in_junction < 0 || l.out_junction < 0)) {
      throw NetworkError("normal link " + std::to_string(l.id) +
                         " must be attached to junctions on both ends");
    }
    if (l.kind == LinkKind::origin && l.out_junction < 0) {
      throw NetworkError("origin link " + std::to_string(l.id) +
                         " feeds no junction");
    }
    if (l.kind == LinkKind::destination && l.in_junction < 0) {
      throw NetworkError("destination link " + std::to_string(l.id) +
                         " is fed by no junction");
    }
  }

  for (const auto& cs : commodities) {
    if (net.commodity_by_id_.count(cs.id)) {
      throw NetworkError("duplicate commodity id " + std::to_string(cs.id));
    }
    Network::Commodity c;
    c.id = cs.id;
    for (LinkId id : cs.path) c.path.push_back(net.link_index(id));
    if (c.path.size() < 2 ||
        net.links_[c.path.front()].kind != LinkKind::origin ||
        net.links_[c.path.back()].kind != LinkKind::destination) {
      throw NetworkError("commodity " + std::to_string(cs.id) +
                         " path must run origin -> ... -> destination");
    }
    for (std::size_t i = 0; i + 1 < c.path.size(); ++i) {
      const int a = c.path[i], b = c.path[i + 1];
      const int j = net.links_[a].out_junction;
      if (j < 0 || net.links_[b].in_junction != j) {
        throw NetworkError("commodity " + std::to_string(cs.id) +
                           " path is not junction-connected at link " +
                           std::to_string(net.links_[a].id));
      }
    }
    const int cidx = static_cast<int>(net.commodities_.size());
    for (int a : c.path) net.links_[a].commodities.push_back(cidx);
    net.commodity_by_id_[cs.id] = cidx;
    net.commodities_.push_back(std::move(c));
  }

  // Per-junction commodity routing table.
  for (auto& j : net.junctions_) {
    j.branch_of.resize(j.upstream.size());
    for (std::size_t ui = 0; ui < j.upstream.size(); ++ui) {
      const auto& l = net.links_[j.upstream[ui]];
      j.branch_of[ui].assign(l.commodities.size(), -1);
      for (std::size_t wi = 0; wi < l.commodities.size(); ++wi) {
        const auto& path = net.commodities_[l.commodities[wi]].path;
        auto it = std::find(path.begin(), path.end(), j.upstream[ui]);
        if (it != path.end() && it + 1 != path.end()) {
          const int next = *(it + 1);
          auto bt = std::find(j.downstream.begin(), j.downstream.end(), next);
          if (bt != j.downstream.end()) {
            j.branch_of[ui][wi] = static_cast<int>(bt - j.downstream.begin());
          }
        }
        if (j.branch_of[ui][wi] < 0) {
          throw NetworkError("commodity routing unresolved at junction " +
                             std::to_string(j.id));
        }
      }
    }
  }

  return net;
}

}  // namespace lqm
