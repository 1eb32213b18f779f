#pragma once

#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqm/network.hpp"

namespace lqm {

/// Piecewise description of a boundary-condition time function. A fixed named
/// set: constant, the half-sine loading pattern 0.5*c0*(sin(4 pi t / period)+1),
/// and a left-constant piecewise table.
struct TimeProfile {
  enum class Kind { constant, half_sine, piecewise };
  Kind kind = Kind::constant;
  double value = 0;                                // constant
  double c0 = 0, period = 1;                       // half_sine
  std::vector<std::pair<double, double>> table;    // piecewise: (t, value)

  static TimeProfile constant(double v) {
    TimeProfile p;
    p.kind = Kind::constant;
    p.value = v;
    return p;
  }
  static TimeProfile half_sine(double c0, double period) {
    TimeProfile p;
    p.kind = Kind::half_sine;
    p.c0 = c0;
    p.period = period;
    return p;
  }
  static TimeProfile piecewise(std::vector<std::pair<double, double>> t) {
    TimeProfile p;
    p.kind = Kind::piecewise;
    p.table = std::move(t);
    return p;
  }

  double eval(double t) const {
    switch (kind) {
      case Kind::constant:
        return value;
      case Kind::half_sine:
        return 0.5 * c0 * (std::sin(4 * std::numbers::pi * t / period) + 1);
      case Kind::piecewise: {
        double v = 0;
        for (const auto& [ts, vs] : table) {
          if (t >= ts) v = vs;
          else break;
        }
        return v;
      }
    }
    return 0;
  }
};

/// Boundary conditions for one origin. Either a point queue fed by arrivals,
/// or a queueless origin whose demand is given directly.
struct OriginBc {
  bool queued = false;
  TimeProfile arrivals;  // arrival rate f_o(t), queued origins
  TimeProfile demand;    // direct demand d_o(t), queueless origins
  // Commodity split per commodity slot of the origin link; must sum to 1.
  std::vector<TimeProfile> splits;
};

struct BoundaryConditions {
  std::vector<OriginBc> origins;      // per origin slot
  std::vector<TimeProfile> supplies;  // per destination slot, default unbounded

  static BoundaryConditions make_default(const Network& net) {
    BoundaryConditions bc;
    bc.origins.resize(net.origin_count());
    bc.supplies.assign(net.destination_count(),
                       TimeProfile::constant(unbounded));
    return bc;
  }
};

/// Densities on normal links and queue lengths at origins, with the
/// per-commodity breakdown aligned with each link's commodity list.
struct NetworkState {
  std::vector<double> k;                  // per normal slot, vehicles/mile
  std::vector<std::vector<double>> k_w;   // per normal slot, per commodity slot
  std::vector<double> queue;              // per origin slot, vehicles
  std::vector<std::vector<double>> queue_w;
};

inline NetworkState make_empty_state(const Network& net) {
  NetworkState s;
  s.k.assign(net.normal_count(), 0.0);
  s.k_w.resize(net.normal_count());
  s.queue.assign(net.origin_count(), 0.0);
  s.queue_w.resize(net.origin_count());
  for (const auto& l : net.links()) {
    if (l.kind == LinkKind::normal) {
      s.k_w[l.slot].assign(l.commodities.size(), 0.0);
    } else if (l.kind == LinkKind::origin) {
      s.queue_w[l.slot].assign(l.commodities.size(), 0.0);
    }
  }
  return s;
}

struct StateViolation {
  LinkId link;
  std::string message;
};

/// Invariant check; violations are returned as data, an empty list means ok.
inline std::vector<StateViolation> validate_state(const Network& net,
                                                  const NetworkState& s) {
  std::vector<StateViolation> out;
  const auto report = [&](LinkId id, std::string msg) {
    out.push_back({id, std::move(msg)});
  };
  if (static_cast<int>(s.k.size()) != net.normal_count() ||
      static_cast<int>(s.queue.size()) != net.origin_count()) {
    throw std::invalid_argument("validate_state: dimension mismatch");
  }
  for (const auto& l : net.links()) {
    if (l.kind == LinkKind::normal) {
      const double k = s.k[l.slot];
      const double kj = l.fd->jam_density();
      if (k < 0) report(l.id, "density negative");
      if (k > kj) report(l.id, "density above jam density");
      double sum = 0;
      for (double kw : s.k_w[l.slot]) {
        if (kw < 0) report(l.id, "commodity density negative");
        sum += kw;
      }
      if (!l.commodities.empty() &&
          std::abs(sum - k) > 1e-9 * std::max(1.0, std::abs(k))) {
        report(l.id, "commodity densities do not sum to link density");
      }
    } else if (l.kind == LinkKind::origin) {
      const double q = s.queue[l.slot];
      if (q < 0) report(l.id, "origin queue negative");
      double sum = 0;
      for (double qw : s.queue_w[l.slot]) {
        if (qw < 0) report(l.id, "commodity queue negative");
        sum += qw;
      }
      if (!l.commodities.empty() &&
          std::abs(sum - q) > 1e-9 * std::max(1.0, std::abs(q))) {
        report(l.id, "commodity queues do not sum to origin queue");
      }
    }
  }
  return out;
}

}  // namespace lqm
