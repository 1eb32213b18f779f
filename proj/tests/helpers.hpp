#pragma once

// Networks shared across the test suites.

#include "lqm/network.hpp"
#include "lqm/state.hpp"

namespace lqm::testing {

inline std::shared_ptr<const FundamentalDiagram> fd(int lanes = 1) {
  return make_triangular_fd(65, 16.25, 180, lanes);
}

/// origin 10 -> link 0 (1 mile, 1 lane) -> destination 11.
inline Network single_link_net() {
  return build_network(
      {{10, LinkKind::origin, 0, nullptr},
       {0, LinkKind::normal, 1.0, fd()},
       {11, LinkKind::destination, 0, nullptr}},
      {{0, {10}, {0}, FluxRule::linear(), {}},
       {1, {0}, {11}, FluxRule::linear(), {}}},
      {});
}

inline BoundaryConditions single_link_bc(const Network& net,
                                         double demand = 2340,
                                         double supply = 1170) {
  BoundaryConditions bc = BoundaryConditions::make_default(net);
  bc.origins[0].queued = false;
  bc.origins[0].demand = TimeProfile::constant(demand);
  bc.supplies[0] = TimeProfile::constant(supply);
  return bc;
}

/// Diverge-merge network: origin 4 -> link 0 (3 lanes) -> {link 1 (1 lane,
/// 1 mi), link 2 (2 lanes, 2 mi)} -> link 3 (2 lanes) -> destination 5.
inline Network dm2_net() {
  return build_network(
      {{4, LinkKind::origin, 0, nullptr},
       {0, LinkKind::normal, 1.0, fd(3)},
       {1, LinkKind::normal, 1.0, fd(1)},
       {2, LinkKind::normal, 2.0, fd(2)},
       {3, LinkKind::normal, 1.0, fd(2)},
       {5, LinkKind::destination, 0, nullptr}},
      {{0, {4}, {0}, FluxRule::linear(), {}},
       {1, {0}, {1, 2}, FluxRule::fifo_diverge(), {}},
       {2, {1, 2}, {3}, FluxRule::fair_merge(), {}},
       {3, {3}, {5}, FluxRule::linear(), {}}},
      {{0, {4, 0, 1, 3, 5}}, {1, {4, 0, 2, 3, 5}}});
}

inline BoundaryConditions dm2_bc(const Network& net, double xi,
                                 double arrivals = 7020, double supply = 4680) {
  BoundaryConditions bc = BoundaryConditions::make_default(net);
  bc.origins[0].queued = true;
  bc.origins[0].arrivals = TimeProfile::constant(arrivals);
  bc.origins[0].splits = {TimeProfile::constant(xi),
                          TimeProfile::constant(1 - xi)};
  bc.supplies[0] = TimeProfile::constant(supply);
  return bc;
}

}  // namespace lqm::testing
