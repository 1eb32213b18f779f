#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqm/junction_flux.hpp"
#include "lqm/network.hpp"
#include "lqm/state.hpp"

namespace lqm {

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Demands, capacities, supplies, and commodity shares at one junction, as
/// seen by an engine at the current step. Capacities of dummy upstream links
/// may be NaN; the resolver substitutes a downstream-facing value.
struct JunctionEnds {
  std::vector<double> d;
  std::vector<double> C;
  std::vector<double> s;
  // Per upstream position: commodity proportions aligned with that link's
  // commodity slots (already normalized; empty when untracked).
  std::vector<std::vector<double>> xi_w;
};

struct ResolvedJunction {
  std::vector<double> g, f;
  std::vector<std::vector<double>> g_w;  // per upstream pos, upstream slots
  std::vector<std::vector<double>> f_w;  // per downstream pos, downstream slots
  double theta = std::numeric_limits<double>::quiet_NaN();
};

/// Commodity proportions of an upstream link at a junction. With zero density
/// the convention is a uniform split over the branches its commodities use,
/// shared equally within each branch.
inline std::vector<double> commodity_shares(const Network::Junction& j, int ui,
                                            const std::vector<double>& masses) {
  const std::size_t nw = masses.size();
  std::vector<double> shares(nw, 0.0);
  double total = 0;
  for (double m : masses) total += m;
  if (total > 0) {
    for (std::size_t wi = 0; wi < nw; ++wi) shares[wi] = masses[wi] / total;
    return shares;
  }
  if (nw == 0) return shares;
  std::vector<int> per_branch(j.downstream.size(), 0);
  std::vector<bool> used(j.downstream.size(), false);
  for (std::size_t wi = 0; wi < nw; ++wi) {
    per_branch[j.branch_of[ui][wi]]++;
    used[j.branch_of[ui][wi]] = true;
  }
  const int branches = static_cast<int>(std::count(used.begin(), used.end(), true));
  for (std::size_t wi = 0; wi < nw; ++wi) {
    shares[wi] = 1.0 / (branches * per_branch[j.branch_of[ui][wi]]);
  }
  return shares;
}

/// Turning proportions xi_{a->b} of upstream position ui from its commodity
/// shares.
inline std::vector<double> turning_proportions(const Network::Junction& j,
                                               int ui,
                                               const std::vector<double>& shares) {
  std::vector<double> turn(j.downstream.size(), 0.0);
  if (shares.empty()) {
    if (j.downstream.size() != 1) {
      throw SimulationError("untracked link feeding a multi-branch junction");
    }
    turn[0] = 1.0;
    return turn;
  }
  for (std::size_t wi = 0; wi < shares.size(); ++wi) {
    turn[j.branch_of[ui][wi]] += shares[wi];
  }
  return turn;
}

namespace detail {

inline double effective_capacity(const Network& net, const Network::Junction& j,
                                 double d, double C,
                                 const std::vector<double>& turn) {
  if (!std::isnan(C)) return C;
  // Dummy upstream link: downstream-facing capacity.
  double cap = unbounded;
  for (std::size_t bi = 0; bi < j.downstream.size(); ++bi) {
    if (turn[bi] <= 0) continue;
    const auto& l = net.link(j.downstream[bi]);
    if (l.kind == LinkKind::normal) cap = std::min(cap, l.fd->capacity());
  }
  if (is_unbounded(cap)) cap = std::max(d, 1.0);
  return cap;
}

inline void scatter_commodities(const Network& net, const Network::Junction& j,
                                ResolvedJunction& r) {
  // f_{b,w} = g_{a,w} routed along each commodity's branch.
  r.f_w.resize(j.downstream.size());
  for (std::size_t bi = 0; bi < j.downstream.size(); ++bi) {
    r.f_w[bi].assign(net.link(j.downstream[bi]).commodities.size(), 0.0);
  }
  for (std::size_t ui = 0; ui < j.upstream.size(); ++ui) {
    const auto& up = net.link(j.upstream[ui]);
    for (std::size_t wi = 0; wi < r.g_w[ui].size(); ++wi) {
      const int bi = j.branch_of[ui][wi];
      const int slot = net.commodity_slot(j.downstream[bi], up.commodities[wi]);
      r.f_w[bi][slot] += r.g_w[ui][wi];
    }
  }
}

}  // namespace detail

/// Maps upstream demands and downstream supplies to junction fluxes by the
/// junction's rule, then applies signal gating.
inline ResolvedJunction resolve_junction(const Network& net, int jidx,
                                         const JunctionEnds& e, double t) {
  const auto& j = net.junction(jidx);
  const std::size_t m = j.upstream.size(), n = j.downstream.size();
  ResolvedJunction r;
  r.g.assign(m, 0.0);
  r.f.assign(n, 0.0);
  r.g_w.resize(m);
  for (std::size_t ui = 0; ui < m; ++ui) {
    r.g_w[ui].assign(e.xi_w[ui].size(), 0.0);
  }

  const auto split_out = [&](std::size_t ui) {
    for (std::size_t wi = 0; wi < e.xi_w[ui].size(); ++wi) {
      r.g_w[ui][wi] = r.g[ui] * e.xi_w[ui][wi];
    }
  };

  switch (j.rule.kind) {
    case FluxRuleKind::linear: {
      const auto q = linear_flux(e.d[0], e.s[0]);
      r.g[0] = q.g1;
      r.f[0] = q.f2;
      split_out(0);
      break;
    }
    case FluxRuleKind::fair_merge:
    case FluxRuleKind::priority_merge: {
      double alpha = j.rule.priority;
      if (j.rule.kind == FluxRuleKind::fair_merge) {
        const auto t0 = turning_proportions(j, 0, e.xi_w[0]);
        const auto t1 = turning_proportions(j, 1, e.xi_w[1]);
        const double c0 = detail::effective_capacity(net, j, e.d[0], e.C[0], t0);
        const double c1 = detail::effective_capacity(net, j, e.d[1], e.C[1], t1);
        alpha = c0 / (c0 + c1);
      }
      const auto q = priority_merge_flux(e.d[0], e.d[1], alpha, e.s[0]);
      r.g[0] = q.g1;
      r.g[1] = q.g2;
      r.f[0] = q.f3;
      split_out(0);
      split_out(1);
      break;
    }
    case FluxRuleKind::fifo_diverge: {
      const auto turn = turning_proportions(j, 0, e.xi_w[0]);
      const auto q = fifo_diverge_flux(e.d[0], turn[0], turn[1], e.s[0], e.s[1]);
      r.g[0] = q.g0;
      r.f[0] = q.f1;
      r.f[1] = q.f2;
      split_out(0);
      break;
    }
    case FluxRuleKind::evacuation_diverge: {
      if (!e.xi_w[0].empty()) {
        throw SimulationError(
            "evacuation diverge is incompatible with routed commodities");
      }
      const auto q = evacuation_diverge_flux(e.d[0], e.s[0], e.s[1],
                                             j.rule.priority);
      r.g[0] = q.g0;
      r.f[0] = q.f1;
      r.f[1] = q.f2;
      break;
    }
    case FluxRuleKind::unified_fair_fifo: {
      JunctionInput in;
      in.demand = e.d;
      in.supply = e.s;
      in.turn.resize(m);
      in.commodity_share = e.xi_w;
      in.capacity.resize(m);
      for (std::size_t ui = 0; ui < m; ++ui) {
        in.turn[ui] = turning_proportions(j, ui, e.xi_w[ui]);
        in.capacity[ui] =
            detail::effective_capacity(net, j, e.d[ui], e.C[ui], in.turn[ui]);
      }
      const auto sol = unified_junction_flux(in);
      r.g = sol.out_flux;
      r.f = sol.in_flux;
      r.g_w = sol.out_commodity;
      r.theta = sol.theta;
      break;
    }
  }

  detail::scatter_commodities(net, j, r);

  if (j.signal && !j.signal->is_green(t)) {
    for (auto& v : r.g) v = 0;
    for (auto& v : r.f) v = 0;
    for (auto& vw : r.g_w) std::fill(vw.begin(), vw.end(), 0.0);
    for (auto& vw : r.f_w) std::fill(vw.begin(), vw.end(), 0.0);
  }
  return r;
}

// --- link queue engine ------------------------------------------------------

struct CflViolation {
  LinkId link = -1;
  double bound = 0;
};

/// ok iff dt <= min over normal links of L/V (equality admitted).
inline std::optional<CflViolation> check_cfl(const Network& net, double dt) {
  CflViolation worst;
  worst.bound = unbounded;
  for (const auto& l : net.links()) {
    if (l.kind != LinkKind::normal) continue;
    const double bound = l.length / l.fd->free_flow_speed();
    if (bound < worst.bound) {
      worst.bound = bound;
      worst.link = l.id;
    }
  }
  if (worst.link >= 0 && dt > worst.bound * (1 + 1e-12)) return worst;
  return std::nullopt;
}

struct SimConfig {
  double dt = 0;
  double horizon = 0;
  int record_every = 1;
  bool allow_cfl_violation = false;
};

/// Per-step boundary fluxes, per dense link index. For a queueless origin the
/// recorded in-flux equals its out-flux; a destination's out-flux equals its
/// in-flux (no queue there).
struct StepFluxes {
  std::vector<ResolvedJunction> junctions;
  std::vector<double> f, g;                  // per dense link index
  std::vector<std::vector<double>> f_w, g_w; // per dense link, commodity slots
};

inline StepFluxes compute_junction_fluxes(const Network& net,
                                          const NetworkState& state,
                                          const BoundaryConditions& bc,
                                          double t, double dt) {
  StepFluxes out;
  out.junctions.resize(net.junction_count());
  out.f.assign(net.link_count(), 0.0);
  out.g.assign(net.link_count(), 0.0);
  out.f_w.resize(net.link_count());
  out.g_w.resize(net.link_count());
  for (int li = 0; li < net.link_count(); ++li) {
    out.f_w[li].assign(net.link(li).commodities.size(), 0.0);
    out.g_w[li].assign(net.link(li).commodities.size(), 0.0);
  }

  for (int ji = 0; ji < net.junction_count(); ++ji) {
    const auto& j = net.junction(ji);
    JunctionEnds e;
    for (std::size_t ui = 0; ui < j.upstream.size(); ++ui) {
      const auto& l = net.link(j.upstream[ui]);
      if (l.kind == LinkKind::normal) {
        e.d.push_back(l.fd->demand(state.k[l.slot]));
        e.C.push_back(l.fd->capacity());
        e.xi_w.push_back(commodity_shares(j, static_cast<int>(ui),
                                          state.k_w[l.slot]));
      } else {
        const auto& ob = bc.origins.at(l.slot);
        double d;
        std::vector<double> masses;
        if (ob.queued) {
          const double arr = ob.arrivals.eval(t);
          d = origin_demand_discrete(state.queue[l.slot], arr, dt);
          // Per-commodity availability this step is q_w/dt + arrivals_w;
          // splitting by queue mass alone can overdraw a commodity whose
          // queue share is below its arrival share.
          masses.assign(l.commodities.size(), 0.0);
          for (std::size_t wi = 0; wi < l.commodities.size(); ++wi) {
            masses[wi] = state.queue_w[l.slot][wi] / dt +
                         arr * ob.splits.at(wi).eval(t);
          }
        } else {
          d = ob.demand.eval(t);
        }
        double mass_total = 0;
        for (double v : masses) mass_total += v;
        if (mass_total <= 0 && !l.commodities.empty()) {
          // Queue empty (or queueless): composition from the bc splits.
          masses.assign(l.commodities.size(), 0.0);
          for (std::size_t wi = 0; wi < l.commodities.size(); ++wi) {
            masses[wi] = ob.splits.at(wi).eval(t);
          }
        }
        e.d.push_back(d);
        e.C.push_back(std::numeric_limits<double>::quiet_NaN());
        e.xi_w.push_back(commodity_shares(j, static_cast<int>(ui), masses));
      }
    }
    for (int b : j.downstream) {
      const auto& l = net.link(b);
      if (l.kind == LinkKind::normal) {
        e.s.push_back(l.fd->supply(state.k[l.slot]));
      } else {
        e.s.push_back(bc.supplies.at(l.slot).eval(t));
      }
    }

    auto r = resolve_junction(net, ji, e, t);
    for (std::size_t ui = 0; ui < j.upstream.size(); ++ui) {
      out.g[j.upstream[ui]] = r.g[ui];
      out.g_w[j.upstream[ui]] = r.g_w[ui];
    }
    for (std::size_t bi = 0; bi < j.downstream.size(); ++bi) {
      out.f[j.downstream[bi]] = r.f[bi];
      out.f_w[j.downstream[bi]] = r.f_w[bi];
    }
    out.junctions[ji] = std::move(r);
  }

  for (int li = 0; li < net.link_count(); ++li) {
    const auto& l = net.link(li);
    if (l.kind == LinkKind::origin) {
      const auto& ob = bc.origins.at(l.slot);
      if (ob.queued) {
        const double arr = ob.arrivals.eval(t);
        out.f[li] = arr;
        for (std::size_t wi = 0; wi < l.commodities.size(); ++wi) {
          out.f_w[li][wi] = arr * ob.splits.at(wi).eval(t);
        }
      } else {
        out.f[li] = out.g[li];
        out.f_w[li] = out.g_w[li];
      }
    } else if (l.kind == LinkKind::destination) {
      out.g[li] = out.f[li];
      out.g_w[li] = out.f_w[li];
    }
  }
  return out;
}

inline NetworkState step(const Network& net, const NetworkState& state,
                         const BoundaryConditions& bc, double t, double dt,
                         StepFluxes* fluxes_out = nullptr) {
  StepFluxes fx = compute_junction_fluxes(net, state, bc, t, dt);
  NetworkState next = state;

  const auto clamp_or_throw = [&](double v, double lo, double hi, double tol,
                                  const Network::Link& l) {
    if (v < lo - tol || v > hi + tol) {
      throw SimulationError("integration blow-up on link " +
                            std::to_string(l.id) + " at t=" +
                            std::to_string(t) + " (value " +
                            std::to_string(v) + ")");
    }
    return std::clamp(v, lo, hi);
  };

  for (int li = 0; li < net.link_count(); ++li) {
    const auto& l = net.link(li);
    if (l.kind == LinkKind::normal) {
      const double kj = l.fd->jam_density();
      const double tol = 1e-9 * kj;
      const double r = dt / l.length;
      next.k[l.slot] = clamp_or_throw(
          state.k[l.slot] + r * (fx.f[li] - fx.g[li]), 0.0, kj, tol, l);
      for (std::size_t wi = 0; wi < l.commodities.size(); ++wi) {
        next.k_w[l.slot][wi] =
            clamp_or_throw(state.k_w[l.slot][wi] +
                               r * (fx.f_w[li][wi] - fx.g_w[li][wi]),
                           0.0, kj, tol, l);
      }
      // Keep the aggregate exactly equal to the sum of the commodity parts;
      // integrating both independently lets roundoff drift them apart over
      // many steps.
      if (!l.commodities.empty()) {
        double sum = 0;
        for (double kw : next.k_w[l.slot]) sum += kw;
        next.k[l.slot] = std::min(sum, kj);
      }
    } else if (l.kind == LinkKind::origin) {
      const auto& ob = bc.origins.at(l.slot);
      if (!ob.queued) continue;
      const double arr = ob.arrivals.eval(t);
      next.queue[l.slot] = std::max(
          0.0, state.queue[l.slot] + dt * (arr - fx.g[li]));
      for (std::size_t wi = 0; wi < l.commodities.size(); ++wi) {
        const double arr_w = arr * ob.splits.at(wi).eval(t);
        next.queue_w[l.slot][wi] = std::max(
            0.0, state.queue_w[l.slot][wi] + dt * (arr_w - fx.g_w[li][wi]));
      }
      if (!l.commodities.empty()) {
        double sum = 0;
        for (double qw : next.queue_w[l.slot]) sum += qw;
        next.queue[l.slot] = sum;
      }
    }
  }

  if (fluxes_out) *fluxes_out = std::move(fx);
  return next;
}

struct TrajectorySample {
  double t = 0;
  NetworkState state;
  std::vector<double> f, g;                   // per dense link index
  std::vector<std::vector<double>> f_w, g_w;  // per dense link index
  std::vector<double> theta;                  // per junction index
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
};

namespace detail {

inline TrajectorySample make_sample(const Network& net, double t,
                                    const NetworkState& s,
                                    const StepFluxes& fx) {
  TrajectorySample sm;
  sm.t = t;
  sm.state = s;
  sm.f = fx.f;
  sm.g = fx.g;
  sm.f_w = fx.f_w;
  sm.g_w = fx.g_w;
  for (const auto& rj : fx.junctions) sm.theta.push_back(rj.theta);
  return sm;
}

}  // namespace detail

/// Explicit Euler integration over [0, horizon], recording every
/// record_every-th step plus the final state.
inline Trajectory simulate(const Network& net, const NetworkState& ic,
                           const BoundaryConditions& bc,
                           const SimConfig& cfg) {
  if (!(cfg.dt > 0) || cfg.horizon < cfg.dt || cfg.record_every < 1) {
    throw std::invalid_argument("simulate: bad config");
  }
  if (!cfg.allow_cfl_violation) {
    if (auto v = check_cfl(net, cfg.dt)) {
      throw SimulationError("CFL violated: dt must be <= " +
                            std::to_string(v->bound) + " (link " +
                            std::to_string(v->link) + ")");
    }
  }
  if (!validate_state(net, ic).empty()) {
    throw std::invalid_argument("simulate: invalid initial state");
  }

  const long steps = std::lround(cfg.horizon / cfg.dt);
  Trajectory traj;
  NetworkState state = ic;
  for (long i = 0; i < steps; ++i) {
    const double t = i * cfg.dt;
    StepFluxes fx;
    NetworkState next = step(net, state, bc, t, cfg.dt, &fx);
    if (i % cfg.record_every == 0) {
      traj.samples.push_back(detail::make_sample(net, t, state, fx));
    }
    state = std::move(next);
  }
  const double t_end = steps * cfg.dt;
  const StepFluxes fx = compute_junction_fluxes(net, state, bc, t_end, cfg.dt);
  traj.samples.push_back(detail::make_sample(net, t_end, state, fx));
  return traj;
}

/// Vehicles currently stored on normal links and origin queues.
inline double total_vehicles(const Network& net, const NetworkState& s) {
  double total = 0;
  for (const auto& l : net.links()) {
    if (l.kind == LinkKind::normal) total += s.k[l.slot] * l.length;
    if (l.kind == LinkKind::origin) total += s.queue[l.slot];
  }
  return total;
}

}  // namespace lqm
