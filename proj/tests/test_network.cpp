#include <gtest/gtest.h>

#include "lqm/network.hpp"
#include "lqm/state.hpp"

using namespace lqm;

namespace {

std::shared_ptr<const FundamentalDiagram> fd(int lanes = 1) {
  return make_triangular_fd(65, 16.25, 180, lanes);
}

Network chain3() {
  return build_network(
      {{10, LinkKind::origin, 0, nullptr},
       {0, LinkKind::normal, 1.0, fd()},
       {11, LinkKind::destination, 0, nullptr}},
      {{0, {10}, {0}, FluxRule::linear(), {}},
       {1, {0}, {11}, FluxRule::linear(), {}}},
      {{0, {10, 0, 11}}});
}

Network dm2() {
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

TEST(BuildNetwork, MinimalChain) {
  const Network net = chain3();
  EXPECT_EQ(net.link_count(), 3);
  EXPECT_EQ(net.normal_count(), 1);
  EXPECT_EQ(net.origin_count(), 1);
  EXPECT_EQ(net.destination_count(), 1);
  const auto& l = net.link(net.link_index(0));
  EXPECT_EQ(l.in_junction, 0);
  EXPECT_EQ(l.out_junction, 1);
}

TEST(BuildNetwork, Dm2Topology) {
  const Network net = dm2();
  EXPECT_EQ(net.junction_count(), 4);
  EXPECT_EQ(net.commodity_count(), 2);
  // Commodity 0 turns into downstream position 0 (link 1) at the diverge.
  const auto& div = net.junction(net.junction_index(1));
  EXPECT_EQ(div.branch_of[0][0], 0);
  EXPECT_EQ(div.branch_of[0][1], 1);
  // Link 0 carries both commodities, link 1 only the first.
  EXPECT_EQ(net.link(net.link_index(0)).commodities.size(), 2u);
  EXPECT_EQ(net.link(net.link_index(1)).commodities.size(), 1u);
}

TEST(BuildNetwork, Deterministic) {
  const Network a = dm2(), b = dm2();
  for (int j = 0; j < a.junction_count(); ++j) {
    EXPECT_EQ(a.junction(j).upstream, b.junction(j).upstream);
    EXPECT_EQ(a.junction(j).downstream, b.junction(j).downstream);
    EXPECT_EQ(a.junction(j).branch_of, b.junction(j).branch_of);
  }
}

TEST(BuildNetwork, MergeArityError) {
  EXPECT_THROW(build_network({{0, LinkKind::normal, 1, fd()},
                              {1, LinkKind::normal, 1, fd()},
                              {2, LinkKind::normal, 1, fd()},
                              {3, LinkKind::normal, 1, fd()}},
                             {{0, {0, 1, 2}, {3}, FluxRule::fair_merge(), {}}},
                             {}),
               NetworkError);
}

TEST(BuildNetwork, DanglingIdError) {
  EXPECT_THROW(build_network({{0, LinkKind::normal, 1, fd()}},
                             {{0, {0}, {99}, FluxRule::linear(), {}}}, {}),
               NetworkError);
}

TEST(BuildNetwork, DuplicateIdError) {
  EXPECT_THROW(build_network({{0, LinkKind::normal, 1, fd()},
                              {0, LinkKind::normal, 1, fd()}},
                             {}, {}),
               NetworkError);
}

TEST(BuildNetwork, LinkInTwoUpstreamSetsError) {
  EXPECT_THROW(
      build_network({{0, LinkKind::normal, 1, fd()},
                     {1, LinkKind::normal, 1, fd()},
                     {2, LinkKind::normal, 1, fd()}},
                    {{0, {0}, {1}, FluxRule::linear(), {}},
                     {1, {0}, {2}, FluxRule::linear(), {}}},
                    {}),
      NetworkError);
}

TEST(BuildNetwork, PathNotConnectedError) {
  EXPECT_THROW(build_network(
                   {{4, LinkKind::origin, 0, nullptr},
                    {0, LinkKind::normal, 1.0, fd()},
                    {1, LinkKind::normal, 1.0, fd()},
                    {5, LinkKind::destination, 0, nullptr}},
                   {{0, {4}, {0}, FluxRule::linear(), {}},
                    {1, {0}, {1}, FluxRule::linear(), {}},
                    {2, {1}, {5}, FluxRule::linear(), {}}},
                   {{0, {4, 1, 5}}}),  // skips link 0
               NetworkError);
}

TEST(BuildNetwork, DummyLinkWithLengthError) {
  EXPECT_THROW(build_network({{4, LinkKind::origin, 1.0, nullptr}}, {}, {}),
               NetworkError);
}

TEST(BuildNetwork, RingSelfLoopAllowed) {
  const Network net = build_network(
      {{0, LinkKind::normal, 1.0, fd()}},
      {{0, {0}, {0}, FluxRule::linear(), {}}}, {});
  EXPECT_EQ(net.link(0).in_junction, 0);
  EXPECT_EQ(net.link(0).out_junction, 0);
}

TEST(BuildNetwork, NonRingOverlapRejected) {
  EXPECT_THROW(build_network({{0, LinkKind::normal, 1, fd()},
                              {1, LinkKind::normal, 1, fd()}},
                             {{0, {0, 1}, {0}, FluxRule::fair_merge(), {}}},
                             {}),
               NetworkError);
}

TEST(BuildNetwork, SignalValidation) {
  SignalProgram ok{0.0333, {{0.0, 0.0166}}};
  JunctionSpec j{0, {0}, {0}, FluxRule::linear(), ok};
  EXPECT_NO_THROW(build_network({{0, LinkKind::normal, 1, fd()}}, {j}, {}));

  SignalProgram bad{0.0333, {{0.0, 0.05}}};  // interval past the cycle
  j.signal = bad;
  EXPECT_THROW(build_network({{0, LinkKind::normal, 1, fd()}}, {j}, {}),
               NetworkError);
}

TEST(Signal, GreenEvaluation) {
  SignalProgram sig{1.0 / 30, {{0.0, 1.0 / 60}}};  // 2-min cycle, half green
  EXPECT_TRUE(sig.is_green(0));
  EXPECT_TRUE(sig.is_green(1.0 / 61));
  EXPECT_FALSE(sig.is_green(1.0 / 59));
  EXPECT_TRUE(sig.is_green(1.0 / 30));  // periodic
  EXPECT_DOUBLE_EQ(sig.green_ratio(), 0.5);
}

TEST(ValidateState, AcceptsBoundaries) {
  const Network net = chain3();
  NetworkState s = make_empty_state(net);
  EXPECT_TRUE(validate_state(net, s).empty());
  s.k[0] = 180.0;  // jam density exactly
  s.k_w[0][0] = 180.0;
  EXPECT_TRUE(validate_state(net, s).empty());
}

TEST(ValidateState, ReportsCommodityMismatch) {
  const Network net = chain3();
  NetworkState s = make_empty_state(net);
  s.k[0] = 9.0;
  s.k_w[0][0] = 10.0;
  const auto v = validate_state(net, s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].link, 0);
}

TEST(ValidateState, ReportsNegativeDensityAndQueue) {
  const Network net = chain3();
  NetworkState s = make_empty_state(net);
  s.k[0] = -1.0;
  s.k_w[0][0] = -1.0;
  s.queue[0] = -2.0;
  s.queue_w[0][0] = -2.0;
  EXPECT_GE(validate_state(net, s).size(), 3u);
}

}  // namespace
