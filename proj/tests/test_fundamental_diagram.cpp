#include <gtest/gtest.h>

#include <random>

#include "lqm/fundamental_diagram.hpp"

using namespace lqm;

namespace {

std::shared_ptr<const FundamentalDiagram> fd1() {
  return make_triangular_fd(65, 16.25, 180, 1);
}

TEST(TriangularFd, DerivedConstants) {
  const auto fd = fd1();
  EXPECT_DOUBLE_EQ(fd->critical_density(), 36.0);
  EXPECT_DOUBLE_EQ(fd->capacity(), 2340.0);
  EXPECT_DOUBLE_EQ(fd->jam_density(), 180.0);

  const auto fd3 = make_triangular_fd(65, 16.25, 180, 3);
  EXPECT_DOUBLE_EQ(fd3->critical_density(), 108.0);
  EXPECT_DOUBLE_EQ(fd3->capacity(), 7020.0);
}

TEST(TriangularFd, FlowValues) {
  const auto fd = fd1();
  EXPECT_DOUBLE_EQ(fd->flow(18), 1170.0);
  EXPECT_DOUBLE_EQ(fd->flow(0), 0.0);
  EXPECT_DOUBLE_EQ(fd->flow(180), 0.0);
  EXPECT_DOUBLE_EQ(fd->flow(36), 2340.0);
}

TEST(TriangularFd, DemandValues) {
  const auto fd = fd1();
  EXPECT_DOUBLE_EQ(fd->demand(18), 1170.0);
  EXPECT_DOUBLE_EQ(fd->demand(108), 2340.0);
  EXPECT_DOUBLE_EQ(fd->demand(0), 0.0);
}

TEST(TriangularFd, SupplyValues) {
  const auto fd = fd1();
  EXPECT_DOUBLE_EQ(fd->supply(108), 1170.0);
  EXPECT_DOUBLE_EQ(fd->supply(18), 2340.0);
  EXPECT_DOUBLE_EQ(fd->supply(180), 0.0);
}

TEST(TriangularFd, InverseSupply) {
  const auto fd = fd1();
  EXPECT_DOUBLE_EQ(fd->inverse_supply(fd->capacity()), 36.0);
  EXPECT_DOUBLE_EQ(fd->inverse_supply(0), 180.0);
  const auto fd2 = make_triangular_fd(65, 16.25, 180, 2);
  EXPECT_NEAR(fd2->inverse_supply(2574), 201.6, 1e-12);
}

TEST(TriangularFd, OutOfRangeDensityThrows) {
  const auto fd = fd1();
  EXPECT_THROW(fd->flow(-1), std::out_of_range);
  EXPECT_THROW(fd->flow(181), std::out_of_range);
  EXPECT_THROW(fd->inverse_supply(-1), std::out_of_range);
  EXPECT_THROW(fd->inverse_supply(3000), std::out_of_range);
  // Round-off within 1e-9*k_jam is clamped, not an error.
  EXPECT_DOUBLE_EQ(fd->flow(-1e-8), 0.0);
  EXPECT_DOUBLE_EQ(fd->flow(180 + 1e-8), 0.0);
}

TEST(TriangularFd, DemandSupplyProperties) {
  const auto fd = make_triangular_fd(65, 16.25, 180, 2);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0, fd->jam_density());
  double prev_k = 0;
  for (int i = 0; i < 1000; ++i) {
    const double k = u(rng);
    EXPECT_NEAR(std::min(fd->demand(k), fd->supply(k)), fd->flow(k), 1e-9);
    EXPECT_NEAR(std::max(fd->demand(k), fd->supply(k)), fd->capacity(), 1e-9);
    // Lipschitz with constant max(V, W).
    const double L = std::max(fd->free_flow_speed(), fd->backward_wave_speed());
    EXPECT_LE(std::abs(fd->demand(k) - fd->demand(prev_k)),
              L * std::abs(k - prev_k) + 1e-9);
    EXPECT_LE(std::abs(fd->supply(k) - fd->supply(prev_k)),
              L * std::abs(k - prev_k) + 1e-9);
    prev_k = k;
  }
  for (double k = fd->critical_density(); k <= fd->jam_density(); k += 1.7) {
    EXPECT_NEAR(fd->inverse_supply(fd->supply(k)), k, 1e-9);
  }
}

TEST(TriangularFd, ZeroEndpoints) {
  const auto fd = fd1();
  EXPECT_EQ(fd->demand(0), 0.0);
  EXPECT_GT(fd->demand(1e-6), 0.0);
  EXPECT_EQ(fd->supply(fd->jam_density()), 0.0);
  EXPECT_GT(fd->supply(fd->jam_density() - 1e-6), 0.0);
}

TEST(OriginDemand, Continuous) {
  EXPECT_DOUBLE_EQ(origin_demand_continuous(0, 500), 500.0);
  EXPECT_TRUE(is_unbounded(origin_demand_continuous(10, 500)));
  EXPECT_DOUBLE_EQ(origin_demand_continuous(0, 0), 0.0);
  EXPECT_THROW(origin_demand_continuous(-1, 0), std::invalid_argument);
}

TEST(OriginDemand, Discrete) {
  EXPECT_DOUBLE_EQ(origin_demand_discrete(0, 500, 1e-3), 500.0);
  EXPECT_DOUBLE_EQ(origin_demand_discrete(10, 500, 1e-3), 10500.0);
  EXPECT_DOUBLE_EQ(origin_demand_discrete(1, 0, 0.5), 2.0);
  EXPECT_THROW(origin_demand_discrete(1, 0, 0), std::invalid_argument);
}

TEST(Unbounded, AbsorbsMin) {
  EXPECT_DOUBLE_EQ(std::min(unbounded, 800.0), 800.0);
  EXPECT_TRUE(is_unbounded(std::min(unbounded, unbounded)));
  EXPECT_FALSE(is_unbounded(-unbounded));
}

TEST(TriangularFd, RejectsBadParameters) {
  EXPECT_THROW(TriangularFd(0, 16.25, 180, 1), std::invalid_argument);
  EXPECT_THROW(TriangularFd(65, -1, 180, 1), std::invalid_argument);
  EXPECT_THROW(TriangularFd(65, 16.25, 180, 0), std::invalid_argument);
}

}  // namespace
