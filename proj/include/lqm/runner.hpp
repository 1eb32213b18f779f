#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lqm/analysis.hpp"
#include "lqm/ctm.hpp"
#include "lqm/scenario.hpp"
#include "lqm/simulation.hpp"

namespace lqm {

/// Output float precision in significant digits; overridable via
/// LQM_FLOAT_PRECISION.
inline int csv_precision() {
  if (const char* env = std::getenv("LQM_FLOAT_PRECISION")) {
    const int p = std::atoi(env);
    if (p >= 1 && p <= 17) return p;
  }
  return 12;
}

inline std::string csv_num(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

// --- conservation -----------------------------------------------------------

/// Relative conservation defect over a trajectory recorded at every step:
/// |change in stored vehicles - integrated (inflow - outflow)| over total
/// inflow (or 1 vehicle, whichever is larger).
inline double conservation_error(const Network& net, const Trajectory& traj,
                                 double dt) {
  if (traj.samples.size() < 2) return 0;
  double inflow = 0, outflow = 0;
  for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i) {
    const auto& s = traj.samples[i];
    for (const auto& l : net.links()) {
      const int li = static_cast<int>(&l - net.links().data());
      if (l.kind == LinkKind::origin) inflow += dt * s.f[li];
      if (l.kind == LinkKind::destination) outflow += dt * s.g[li];
    }
  }
  const double stored0 = total_vehicles(net, traj.samples.front().state);
  const double stored1 = total_vehicles(net, traj.samples.back().state);
  const double defect = std::abs((stored1 - stored0) - (inflow - outflow));
  return defect / std::max(1.0, inflow);
}

// --- CSV export -------------------------------------------------------------

/// Long format: one row per (t, link) or per (t, link, commodity) when the
/// network routes commodities. For origin links the k column reports the
/// queue length in vehicles; destination links report 0.
inline void write_trajectory_csv(const Network& net, const Trajectory& traj,
                                 int every, const std::filesystem::path& path) {
  const int prec = csv_precision();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  const bool commodities = net.commodity_count() > 0;
  out << "t,link,k,f,g";
  if (commodities) out << ",commodity,k_w,f_w,g_w";
  out << "\n";

  const auto emit = [&](const TrajectorySample& s) {
    for (int li = 0; li < net.link_count(); ++li) {
      const auto& l = net.link(li);
      double k = 0;
      if (l.kind == LinkKind::normal) k = s.state.k[l.slot];
      if (l.kind == LinkKind::origin) k = s.state.queue[l.slot];
      const std::string base = csv_num(s.t, prec) + "," + std::to_string(l.id) +
                               "," + csv_num(k, prec) + "," +
                               csv_num(s.f[li], prec) + "," +
                               csv_num(s.g[li], prec);
      if (!commodities) {
        out << base << "\n";
      } else if (l.commodities.empty()) {
        out << base << ",,,,\n";
      } else {
        for (std::size_t wi = 0; wi < l.commodities.size(); ++wi) {
          double kw = 0;
          if (l.kind == LinkKind::normal) kw = s.state.k_w[l.slot][wi];
          if (l.kind == LinkKind::origin) kw = s.state.queue_w[l.slot][wi];
          out << base << "," << net.commodity(l.commodities[wi]).id << ","
              << csv_num(kw, prec) << "," << csv_num(s.f_w[li][wi], prec)
              << "," << csv_num(s.g_w[li][wi], prec) << "\n";
        }
      }
    }
  };

  const std::size_t n = traj.samples.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i % every == 0 || i + 1 == n) emit(traj.samples[i]);
  }
}

/// Wide format for space-time diagrams: t, then one density column per cell
/// of each normal link (named <link>_<cell>).
inline void write_cells_csv(const Network& net, const CellTrajectory& cells,
                            int every, const std::filesystem::path& path) {
  const int prec = csv_precision();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "t";
  for (const auto& l : net.links()) {
    if (l.kind != LinkKind::normal) continue;
    const std::size_t n = cells.rho[l.slot].empty()
                              ? 0
                              : cells.rho[l.slot].front().size();
    for (std::size_t c = 0; c < n; ++c) {
      out << "," << l.id << "_" << c;
    }
  }
  out << "\n";
  const std::size_t n = cells.times.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i % every != 0 && i + 1 != n) continue;
    out << csv_num(cells.times[i], prec);
    for (const auto& l : net.links()) {
      if (l.kind != LinkKind::normal) continue;
      for (double v : cells.rho[l.slot][i]) out << "," << csv_num(v, prec);
    }
    out << "\n";
  }
}

// --- engine runs ------------------------------------------------------------

struct EngineRun {
  Engine engine = Engine::lq;
  Trajectory traj;       // recorded at every step
  CellTrajectory cells;  // ctm only
  double conservation = 0;
};

inline EngineRun run_engine(const Network& net, const NetworkState& ic,
                            const BoundaryConditions& bc,
                            const ScnSimulation& sim, Engine engine) {
  EngineRun run;
  run.engine = engine;
  if (engine == Engine::lq) {
    if (!sim.allow_cfl_violation) {
      if (auto v = check_cfl(net, sim.dt)) {
        throw std::invalid_argument(
            "dt violates the CFL condition: need dt <= " +
            std::to_string(v->bound) + " (link " + std::to_string(v->link) +
            ")");
      }
    }
    run.traj = simulate(net, ic, bc,
                        {sim.dt, sim.horizon, 1, sim.allow_cfl_violation});
  } else {
    if (!(sim.dx > 0)) {
      throw std::invalid_argument("ctm engine needs dx > 0");
    }
    if (!sim.allow_cfl_violation) {
      const CtmState probe = make_ctm_state(net, ic, sim.dx);
      if (auto v = check_ctm_cfl(net, probe, sim.dt)) {
        throw std::invalid_argument(
            "dt violates the CTM CFL condition: need dt <= " +
            std::to_string(v->bound) + " (link " + std::to_string(v->link) +
            ")");
      }
    }
    run.traj = ctm_simulate(
        net, ic, bc, {sim.dx, sim.dt, sim.horizon, 1, sim.allow_cfl_violation},
        &run.cells);
  }
  run.conservation = conservation_error(net, run.traj, sim.dt);
  return run;
}

inline const char* engine_name(Engine e) {
  return e == Engine::lq ? "lq" : "ctm";
}

/// Density time series of one link (by id) from a per-step trajectory.
inline std::vector<double> density_series(const Network& net,
                                          const Trajectory& traj, LinkId id) {
  const auto& l = net.link(net.link_index(id));
  if (l.kind != LinkKind::normal) {
    throw std::invalid_argument("density series requires a normal link");
  }
  std::vector<double> s;
  s.reserve(traj.samples.size());
  for (const auto& sm : traj.samples) s.push_back(sm.state.k[l.slot]);
  return s;
}

inline nlohmann::json oscillation_json(const Network& net, const Trajectory& t,
                                       double dt,
                                       const std::vector<LinkId>& watch) {
  nlohmann::json arr = nlohmann::json::array();
  for (LinkId id : watch) {
    const auto rep = detect_oscillation(density_series(net, t, id), dt);
    nlohmann::json o{{"link", id},
                     {"class", to_string(rep.cls)},
                     {"terminal_mean", rep.terminal_mean},
                     {"terminal_amplitude", rep.terminal_amplitude}};
    if (rep.period) o["period"] = *rep.period;
    arr.push_back(std::move(o));
  }
  return arr;
}

// --- scenario-level operations ----------------------------------------------

struct RunReport {
  std::vector<std::string> jsonl;  // one JSON object per line
};

inline void write_report(const RunReport& rep,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (const auto& line : rep.jsonl) out << line << "\n";
}

inline RunReport run_scenario(const ScenarioFile& scn,
                              const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  const Network net = scn.build();
  const BoundaryConditions bc = scn.boundary(net);
  const NetworkState ic = make_empty_state(net);

  RunReport rep;
  for (Engine e : scn.sim.engines) {
    EngineRun run = run_engine(net, ic, bc, scn.sim, e);
    const std::string name = engine_name(e);
    write_trajectory_csv(net, run.traj, scn.sim.record_every,
                         outdir / (name + "_trajectory.csv"));
    if (e == Engine::ctm) {
      write_cells_csv(net, run.cells, scn.sim.record_every,
                      outdir / "ctm_cells.csv");
    }
    nlohmann::json j{
        {"engine", name},
        {"samples", run.traj.samples.size()},
        {"conservation_rel", run.conservation},
        {"total_vehicles",
         total_vehicles(net, run.traj.samples.back().state)}};
    nlohmann::json terminal = nlohmann::json::array();
    for (const auto& l : net.links()) {
      if (l.kind != LinkKind::normal) continue;
      terminal.push_back({{"link", l.id},
                          {"k", run.traj.samples.back().state.k[l.slot]}});
    }
    j["terminal"] = std::move(terminal);
    if (!scn.experiment.watch.empty()) {
      j["oscillation"] =
          oscillation_json(net, run.traj, scn.sim.dt, scn.experiment.watch);
    }
    rep.jsonl.push_back(j.dump());
  }
  return rep;
}

inline RunReport compare_engines(const ScenarioFile& scn,
                                 const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  const Network net = scn.build();
  const BoundaryConditions bc = scn.boundary(net);
  const NetworkState ic = make_empty_state(net);

  const EngineRun lq = run_engine(net, ic, bc, scn.sim, Engine::lq);
  const EngineRun ctm = run_engine(net, ic, bc, scn.sim, Engine::ctm);
  write_trajectory_csv(net, lq.traj, scn.sim.record_every,
                       outdir / "lq_trajectory.csv");
  write_trajectory_csv(net, ctm.traj, scn.sim.record_every,
                       outdir / "ctm_trajectory.csv");

  RunReport rep;
  nlohmann::json links = nlohmann::json::array();
  const std::size_t n = lq.traj.samples.size();
  for (const auto& l : net.links()) {
    if (l.kind != LinkKind::normal) continue;
    const double kl = lq.traj.samples.back().state.k[l.slot];
    const double kc = ctm.traj.samples.back().state.k[l.slot];
    double avg_l = 0, avg_c = 0;
    for (const auto& s : lq.traj.samples) avg_l += s.state.k[l.slot];
    for (const auto& s : ctm.traj.samples) avg_c += s.state.k[l.slot];
    avg_l /= n;
    avg_c /= n;
    const double scale = std::max({std::abs(kl), std::abs(kc), 1e-9});
    const double avg_scale = std::max({std::abs(avg_l), std::abs(avg_c), 1e-9});
    links.push_back({{"link", l.id},
                     {"terminal_lq", kl},
                     {"terminal_ctm", kc},
                     {"terminal_rel_diff", std::abs(kl - kc) / scale},
                     {"time_avg_lq", avg_l},
                     {"time_avg_ctm", avg_c},
                     {"time_avg_rel_diff", std::abs(avg_l - avg_c) / avg_scale}});
  }
  nlohmann::json j{{"comparison", std::move(links)}};
  if (!scn.experiment.watch.empty()) {
    j["oscillation_lq"] =
        oscillation_json(net, lq.traj, scn.sim.dt, scn.experiment.watch);
    j["oscillation_ctm"] =
        oscillation_json(net, ctm.traj, scn.sim.dt, scn.experiment.watch);
  }
  rep.jsonl.push_back(j.dump());
  write_report(rep, outdir / "compare.jsonl");
  return rep;
}

/// Ring MFD sweep: the scenario provides the ring link (length + fd); the
/// experiment section provides densities, cycles, and the green ratio.
inline RunReport run_mfd(const ScenarioFile& scn,
                         const std::filesystem::path& outdir) {
  if (scn.experiment.kind != ExperimentKind::ring_mfd) {
    throw std::invalid_argument("scenario has no ring-mfd experiment");
  }
  std::filesystem::create_directories(outdir);
  const ScnLink* ring = nullptr;
  for (const auto& l : scn.links) {
    if (l.kind == LinkKind::normal) {
      if (ring) throw std::invalid_argument("ring-mfd needs exactly one link");
      ring = &l;
    }
  }
  if (!ring) throw std::invalid_argument("ring-mfd needs one normal link");
  auto fd = make_triangular_fd(ring->fd.vfree, ring->fd.wback, ring->fd.kjam,
                               ring->fd.lanes);

  const int prec = csv_precision();
  std::ofstream csv(outdir / "mfd.csv");
  if (!csv) throw std::runtime_error("cannot open mfd.csv");
  csv << "k,cycle,lq_flux,ctm_flux,theory\n";

  RunReport rep;
  for (double cycle : scn.experiment.cycles) {
    for (double k : scn.experiment.densities) {
      const double theory =
          mfd_link_queue(*fd, scn.experiment.green_ratio, k);
      const auto lq = mfd_lq_point(ring->length, fd, k, cycle,
                                   scn.experiment.green_ratio,
                                   {scn.sim.dt, scn.sim.horizon, 1, false});
      const auto ctm = mfd_ctm_point(
          ring->length, fd, k, cycle, scn.experiment.green_ratio,
          {scn.sim.dx, scn.sim.dt, scn.sim.horizon, 1, false});
      csv << csv_num(k, prec) << "," << csv_num(cycle, prec) << ","
          << csv_num(lq.mean_flux, prec) << "," << csv_num(ctm.mean_flux, prec)
          << "," << csv_num(theory, prec) << "\n";
      rep.jsonl.push_back(nlohmann::json{{"k", k},
                                         {"cycle", cycle},
                                         {"lq_flux", lq.mean_flux},
                                         {"ctm_flux", ctm.mean_flux},
                                         {"theory", theory}}
                              .dump());
    }
  }
  write_report(rep, outdir / "mfd.jsonl");
  return rep;
}

/// Closed-form single-link oracle tables (density and kinematic-wave fluxes).
inline void write_single_link_oracle(const std::filesystem::path& outdir,
                                     double horizon = 0.12,
                                     double step = 1e-4) {
  std::filesystem::create_directories(outdir);
  const int prec = csv_precision();
  std::ofstream out(outdir / "single_link_oracle.csv");
  if (!out) throw std::runtime_error("cannot open single_link_oracle.csv");
  out << "t,k,f_kw,g_kw\n";
  const long steps = std::lround(horizon / step);
  for (long i = 0; i <= steps; ++i) {
    const double t = i * step;
    const auto [f, g] = single_link::kw_fluxes(t);
    out << csv_num(t, prec) << ","
        << csv_num(single_link::closed_form_density(t), prec) << ","
        << csv_num(f, prec) << "," << csv_num(g, prec) << "\n";
  }
}

// --- benchmark --------------------------------------------------------------

struct BenchReport {
  struct EngineStats {
    std::string engine;
    long states = 0;  // density states tracked
    double seconds_per_sim_hour = 0;
  };
  std::vector<EngineStats> engines;
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : engines) {
      arr.push_back({{"engine", e.engine},
                     {"states", e.states},
                     {"seconds_per_sim_hour", e.seconds_per_sim_hour}});
    }
    return {{"bench", arr}};
  }
};

inline BenchReport bench(const ScenarioFile& scn, int repetitions) {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  const Network net = scn.build();
  const BoundaryConditions bc = scn.boundary(net);
  const NetworkState ic = make_empty_state(net);

  BenchReport rep;
  for (Engine e : scn.sim.engines) {
    BenchReport::EngineStats st;
    st.engine = engine_name(e);
    if (e == Engine::lq) {
      st.states = net.normal_count();
    } else {
      const CtmState probe = make_ctm_state(net, ic, scn.sim.dx);
      for (const auto& cells : probe.rho) {
        st.states += static_cast<long>(cells.size());
      }
    }
    ScnSimulation sim = scn.sim;
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < repetitions; ++r) run_engine(net, ic, bc, sim, e);
    const auto stop = std::chrono::steady_clock::now();
    const double secs =
        std::chrono::duration<double>(stop - start).count() / repetitions;
    st.seconds_per_sim_hour = secs / scn.sim.horizon;
    rep.engines.push_back(std::move(st));
  }
  return rep;
}

}  // namespace lqm
