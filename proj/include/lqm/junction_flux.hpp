#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lqm/fundamental_diagram.hpp"

namespace lqm {

/// Demands, capacities, supplies, and proportions feeding one junction.
/// turn[a][b] are the turning proportions (rows sum to 1); commodity_share[a]
/// are the commodity proportions of upstream link a (sum to 1, may be empty
/// when commodities are not tracked).
struct JunctionInput {
  std::vector<double> demand;
  std::vector<double> capacity;
  std::vector<double> supply;
  std::vector<std::vector<double>> turn;
  std::vector<std::vector<double>> commodity_share;
};

struct FluxSolution {
  std::vector<double> out_flux;  // g_a per upstream link
  std::vector<double> in_flux;   // f_b per downstream link
  // g_{a,w}: per upstream link, aligned with commodity_share.
  std::vector<std::vector<double>> out_commodity;
  double theta = std::numeric_limits<double>::quiet_NaN();
};

// --- elementary junction flux functions -------------------------------------

struct LinearFlux {
  double g1, f2;
};

inline LinearFlux linear_flux(double d1, double s2) {
  const double q = std::min(d1, s2);
  return {q, q};
}

struct MergeFlux {
  double g1, g2, f3;
};

inline MergeFlux priority_merge_flux(double d1, double d2, double alpha,
                                     double s3) {
  if (!(alpha > 0 && alpha < 1)) {
    throw std::invalid_argument("merge priority must be in (0,1)");
  }
  const double f3 = std::min(d1 + d2, s3);
  const double g1 = std::min(d1, std::max(s3 - d2, alpha * s3));
  return {g1, f3 - g1, f3};
}

inline MergeFlux fair_merge_flux(double d1, double d2, double c1, double c2,
                                 double s3) {
  return priority_merge_flux(d1, d2, c1 / (c1 + c2), s3);
}

struct DivergeFlux {
  double g0, f1, f2;
};

/// FIFO diverge: a blocked branch throttles the whole out-flux. A branch with
/// zero turning proportion imposes no constraint.
inline DivergeFlux fifo_diverge_flux(double d0, double xi1, double xi2,
                                     double s1, double s2) {
  double g0 = d0;
  if (xi1 > 0) g0 = std::min(g0, s1 / xi1);
  if (xi2 > 0) g0 = std::min(g0, s2 / xi2);
  return {g0, xi1 * g0, xi2 * g0};
}

inline DivergeFlux evacuation_diverge_flux(double d0, double s1, double s2,
                                           double beta) {
  if (!(beta > 0 && beta < 1)) {
    throw std::invalid_argument("evacuation priority must be in (0,1)");
  }
  const double g0 = std::min(d0, s1 + s2);
  const double f1 = std::min(s1, std::max(d0 - s2, beta * d0));
  return {g0, f1, g0 - f1};
}

// --- unified fair-FIFO rule -------------------------------------------------

inline constexpr int kMaxUpstreamForTheta = 12;

/// Critical demand level of the unified rule:
///   theta = min{ max_a d_a/C_a,
///                min_b max_{A1} (s_b - sum_{a not in A1} d_a xi_ab)
///                              / (sum_{a in A1} C_a xi_ab) }
/// with A1 ranging over non-empty upstream subsets. Subsets whose denominator
/// vanishes impose no constraint and are skipped; a branch where every subset
/// vanishes (no upstream link routes to it) is unconstrained.
inline double solve_critical_demand_level(const JunctionInput& in) {
  const int m = static_cast<int>(in.demand.size());
  const int n = static_cast<int>(in.supply.size());
  if (m < 1 || n < 1) {
    throw std::invalid_argument("junction needs upstream and downstream links");
  }
  if (m > kMaxUpstreamForTheta) {
    throw std::invalid_argument("theta solver supports at most " +
                                std::to_string(kMaxUpstreamForTheta) +
                                " upstream links");
  }

  double demand_term = 0;
  for (int a = 0; a < m; ++a) {
    demand_term = std::max(demand_term, in.demand[a] / in.capacity[a]);
  }

  double supply_term = unbounded;
  for (int b = 0; b < n; ++b) {
    double best = -unbounded;
    for (unsigned subset = 1; subset < (1u << m); ++subset) {
      double den = 0, excluded = 0;
      for (int a = 0; a < m; ++a) {
        if (subset & (1u << a)) {
          den += in.capacity[a] * in.turn[a][b];
        } else if (in.turn[a][b] > 0) {  // avoid inf * 0
          excluded += in.demand[a] * in.turn[a][b];
        }
      }
      if (den <= 0) continue;
      best = std::max(best, (in.supply[b] - excluded) / den);
    }
    if (best > -unbounded) supply_term = std::min(supply_term, best);
  }

  return std::min(demand_term, supply_term);
}

/// Out-fluxes g_a = min{d_a, theta C_a}, in-fluxes by turning proportions,
/// commodity fluxes proportional to commodity shares.
inline FluxSolution unified_junction_flux(const JunctionInput& in) {
  const int m = static_cast<int>(in.demand.size());
  const int n = static_cast<int>(in.supply.size());
  FluxSolution sol;
  sol.theta = solve_critical_demand_level(in);
  sol.out_flux.resize(m);
  sol.in_flux.assign(n, 0.0);
  sol.out_commodity.resize(m);
  for (int a = 0; a < m; ++a) {
    sol.out_flux[a] = std::min(in.demand[a], sol.theta * in.capacity[a]);
    for (int b = 0; b < n; ++b) {
      sol.in_flux[b] += sol.out_flux[a] * in.turn[a][b];
    }
    if (a < static_cast<int>(in.commodity_share.size())) {
      for (double share : in.commodity_share[a]) {
        sol.out_commodity[a].push_back(sol.out_flux[a] * share);
      }
    }
  }
  return sol;
}

}  // namespace lqm
