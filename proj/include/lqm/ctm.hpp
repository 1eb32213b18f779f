#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lqm/simulation.hpp"

namespace lqm {

struct CtmConfig {
  double dx = 0;  // target cell size, miles
  double dt = 0;
  double horizon = 0;
  int record_every = 1;
  bool allow_cfl_violation = false;
};

/// Cell-resolved state of the commodity-based CTM. Cell counts are rounded to
/// the nearest integer >= 1 and the actual cell length is L/N, so link
/// lengths stay exact.
struct CtmState {
  std::vector<std::vector<double>> rho;                 // [normal slot][cell]
  std::vector<std::vector<std::vector<double>>> rho_w;  // [slot][cell][wslot]
  std::vector<double> cell_len;                         // [normal slot]
  std::vector<double> queue;                            // per origin slot
  std::vector<std::vector<double>> queue_w;
};

inline CtmState make_ctm_state(const Network& net, const NetworkState& init,
                               double dx) {
  if (!(dx > 0)) throw std::invalid_argument("cell size must be positive");
  CtmState s;
  s.rho.resize(net.normal_count());
  s.rho_w.resize(net.normal_count());
  s.cell_len.resize(net.normal_count());
  s.queue = init.queue;
  s.queue_w = init.queue_w;
  for (const auto& l : net.links()) {
    if (l.kind != LinkKind::normal) continue;
    const int n = std::max(1, static_cast<int>(std::lround(l.length / dx)));
    s.cell_len[l.slot] = l.length / n;
    s.rho[l.slot].assign(n, init.k[l.slot]);
    s.rho_w[l.slot].assign(
        n, std::vector<double>(init.k_w[l.slot].begin(),
                               init.k_w[l.slot].end()));
  }
  return s;
}

inline std::optional<CflViolation> check_ctm_cfl(const Network& net,
                                                 const CtmState& s, double dt) {
  CflViolation worst;
  worst.bound = unbounded;
  for (const auto& l : net.links()) {
    if (l.kind != LinkKind::normal) continue;
    const double bound = s.cell_len[l.slot] / l.fd->free_flow_speed();
    if (bound < worst.bound) {
      worst.bound = bound;
      worst.link = l.id;
    }
  }
  if (worst.link >= 0 && dt > worst.bound * (1 + 1e-12)) return worst;
  return std::nullopt;
}

/// One Godunov step: interior interfaces take min{demand(up), supply(down)},
/// junction interfaces use the shared junction resolver with boundary-cell
/// demands and supplies.
inline CtmState ctm_step(const Network& net, const CtmState& state,
                         const BoundaryConditions& bc, double t, double dt,
                         StepFluxes* fluxes_out = nullptr) {
  StepFluxes fx;
  fx.junctions.resize(net.junction_count());
  fx.f.assign(net.link_count(), 0.0);
  fx.g.assign(net.link_count(), 0.0);
  fx.f_w.resize(net.link_count());
  fx.g_w.resize(net.link_count());
  for (int li = 0; li < net.link_count(); ++li) {
    fx.f_w[li].assign(net.link(li).commodities.size(), 0.0);
    fx.g_w[li].assign(net.link(li).commodities.size(), 0.0);
  }

  for (int ji = 0; ji < net.junction_count(); ++ji) {
    const auto& j = net.junction(ji);
    JunctionEnds e;
    for (std::size_t ui = 0; ui < j.upstream.size(); ++ui) {
      const auto& l = net.link(j.upstream[ui]);
      if (l.kind == LinkKind::normal) {
        e.d.push_back(l.fd->demand(state.rho[l.slot].back()));
        e.C.push_back(l.fd->capacity());
        e.xi_w.push_back(commodity_shares(j, static_cast<int>(ui),
                                          state.rho_w[l.slot].back()));
      } else {
        const auto& ob = bc.origins.at(l.slot);
        double d;
        std::vector<double> masses;
        if (ob.queued) {
          const double arr = ob.arrivals.eval(t);
          d = origin_demand_discrete(state.queue[l.slot], arr, dt);
          // Same convention as the link-queue step: per-commodity
          // availability is q_w/dt + arrivals_w.
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
        e.s.push_back(l.fd->supply(state.rho[l.slot].front()));
      } else {
        e.s.push_back(bc.supplies.at(l.slot).eval(t));
      }
    }

    auto r = resolve_junction(net, ji, e, t);
    for (std::size_t ui = 0; ui < j.upstream.size(); ++ui) {
      fx.g[j.upstream[ui]] = r.g[ui];
      fx.g_w[j.upstream[ui]] = r.g_w[ui];
    }
    for (std::size_t bi = 0; bi < j.downstream.size(); ++bi) {
      fx.f[j.downstream[bi]] = r.f[bi];
      fx.f_w[j.downstream[bi]] = r.f_w[bi];
    }
    fx.junctions[ji] = std::move(r);
  }

  CtmState next = state;
  for (int li = 0; li < net.link_count(); ++li) {
    const auto& l = net.link(li);
    if (l.kind != LinkKind::normal) continue;
    const auto& rho = state.rho[l.slot];
    const auto& rho_w = state.rho_w[l.slot];
    const int n = static_cast<int>(rho.size());
    const int nw = static_cast<int>(l.commodities.size());

    // Interface fluxes: q[0] = link in-flux, q[n] = link out-flux.
    std::vector<double> q(n + 1, 0.0);
    std::vector<std::vector<double>> q_w(n + 1, std::vector<double>(nw, 0.0));
    q[0] = fx.f[li];
    q_w[0] = fx.f_w[li];
    q[n] = fx.g[li];
    q_w[n] = fx.g_w[li];
    for (int i = 1; i < n; ++i) {
      q[i] = std::min(l.fd->demand(rho[i - 1]), l.fd->supply(rho[i]));
      double mass = 0;
      for (double v : rho_w[i - 1]) mass += v;
      if (mass > 0) {
        for (int wi = 0; wi < nw; ++wi) {
          q_w[i][wi] = q[i] * rho_w[i - 1][wi] / mass;
        }
      }
    }

    const double r = dt / state.cell_len[l.slot];
    const double kj = l.fd->jam_density();
    const double tol = 1e-9 * kj;
    for (int i = 0; i < n; ++i) {
      double v = rho[i] + r * (q[i] - q[i + 1]);
      if (v < -tol || v > kj + tol) {
        throw SimulationError("CTM blow-up on link " + std::to_string(l.id) +
                              " cell " + std::to_string(i) + " at t=" +
                              std::to_string(t));
      }
      next.rho[l.slot][i] = std::clamp(v, 0.0, kj);
      for (int wi = 0; wi < nw; ++wi) {
        double vw = rho_w[i][wi] + r * (q_w[i][wi] - q_w[i + 1][wi]);
        next.rho_w[l.slot][i][wi] = std::clamp(vw, 0.0, kj);
      }
      // Same aggregation convention as the link-queue step: the cell density
      // is the sum of its commodity parts, so roundoff cannot drift them
      // apart.
      if (nw > 0) {
        double sum = 0;
        for (double vw : next.rho_w[l.slot][i]) sum += vw;
        next.rho[l.slot][i] = std::min(sum, kj);
      }
    }
  }

  for (int li = 0; li < net.link_count(); ++li) {
    const auto& l = net.link(li);
    if (l.kind != LinkKind::origin) continue;
    const auto& ob = bc.origins.at(l.slot);
    if (!ob.queued) {
      fx.f[li] = fx.g[li];
      fx.f_w[li] = fx.g_w[li];
      continue;
    }
    const double arr = ob.arrivals.eval(t);
    fx.f[li] = arr;
    next.queue[l.slot] = std::max(0.0, state.queue[l.slot] +
                                            dt * (arr - fx.g[li]));
    for (std::size_t wi = 0; wi < l.commodities.size(); ++wi) {
      const double arr_w = arr * ob.splits.at(wi).eval(t);
      fx.f_w[li][wi] = arr_w;
      next.queue_w[l.slot][wi] = std::max(
          0.0, state.queue_w[l.slot][wi] + dt * (arr_w - fx.g_w[li][wi]));
    }
    if (!l.commodities.empty()) {
      double sum = 0;
      for (double qw : next.queue_w[l.slot]) sum += qw;
      next.queue[l.slot] = sum;
    }
  }
  for (int li = 0; li < net.link_count(); ++li) {
    if (net.link(li).kind == LinkKind::destination) {
      fx.g[li] = fx.f[li];
      fx.g_w[li] = fx.f_w[li];
    }
  }

  if (fluxes_out) *fluxes_out = std::move(fx);
  return next;
}

/// Link-aggregated view: link density is the average of cell densities.
inline NetworkState aggregate(const Network& net, const CtmState& s) {
  NetworkState out = make_empty_state(net);
  out.queue = s.queue;
  out.queue_w = s.queue_w;
  for (const auto& l : net.links()) {
    if (l.kind != LinkKind::normal) continue;
    const auto& rho = s.rho[l.slot];
    const int n = static_cast<int>(rho.size());
    double sum = 0;
    for (double v : rho) sum += v;
    out.k[l.slot] = sum / n;
    for (std::size_t wi = 0; wi < l.commodities.size(); ++wi) {
      double sw = 0;
      for (const auto& cell : s.rho_w[l.slot]) sw += cell[wi];
      out.k_w[l.slot][wi] = sw / n;
    }
  }
  return out;
}

struct CellTrajectory {
  std::vector<double> times;
  // [normal slot][sample][cell]
  std::vector<std::vector<std::vector<double>>> rho;
};

inline double ctm_total_vehicles(const Network& net, const CtmState& s) {
  double total = 0;
  for (const auto& l : net.links()) {
    if (l.kind == LinkKind::normal) {
      for (double v : s.rho[l.slot]) total += v * s.cell_len[l.slot];
    } else if (l.kind == LinkKind::origin) {
      total += s.queue[l.slot];
    }
  }
  return total;
}

inline Trajectory ctm_simulate(const Network& net, const NetworkState& ic,
                               const BoundaryConditions& bc,
                               const CtmConfig& cfg,
                               CellTrajectory* cells_out = nullptr) {
  if (!(cfg.dt > 0) || cfg.horizon < cfg.dt || cfg.record_every < 1) {
    throw std::invalid_argument("ctm_simulate: bad config");
  }
  CtmState state = make_ctm_state(net, ic, cfg.dx);
  if (!cfg.allow_cfl_violation) {
    if (auto v = check_ctm_cfl(net, state, cfg.dt)) {
      throw SimulationError("CTM CFL violated: dt must be <= " +
                            std::to_string(v->bound) + " (link " +
                            std::to_string(v->link) + ")");
    }
  }

  const auto record_cells = [&](double t) {
    if (!cells_out) return;
    cells_out->times.push_back(t);
    if (cells_out->rho.empty()) cells_out->rho.resize(net.normal_count());
    for (int slot = 0; slot < net.normal_count(); ++slot) {
      cells_out->rho[slot].push_back(state.rho[slot]);
    }
  };

  const long steps = std::lround(cfg.horizon / cfg.dt);
  Trajectory traj;
  for (long i = 0; i < steps; ++i) {
    const double t = i * cfg.dt;
    StepFluxes fx;
    CtmState next = ctm_step(net, state, bc, t, cfg.dt, &fx);
    if (i % cfg.record_every == 0) {
      traj.samples.push_back(
          detail::make_sample(net, t, aggregate(net, state), fx));
      record_cells(t);
    }
    state = std::move(next);
  }
  const double t_end = steps * cfg.dt;
  StepFluxes fx;
  ctm_step(net, state, bc, t_end, cfg.dt, &fx);
  traj.samples.push_back(
      detail::make_sample(net, t_end, aggregate(net, state), fx));
  record_cells(t_end);
  return traj;
}

}  // namespace lqm
