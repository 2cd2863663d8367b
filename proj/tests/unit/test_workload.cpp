#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "rrfp/workload.hpp"

namespace rrfp {
namespace {

using testing::uniform_workload;

bool has_edge(const std::vector<DependencyEdge>& edges, TaskId from, TaskId to, EdgeKind kind) {
  return std::find(edges.begin(), edges.end(), DependencyEdge{from, to, kind}) != edges.end();
}

TEST(TaskGraph, TwoStageSingleMicrobatch) {
  const auto w = uniform_workload(2, 1, 1, 1);
  const auto edges = build_task_graph(w);
  const TaskId f0{0, 0, 0, Direction::Forward}, f1{1, 0, 0, Direction::Forward};
  const TaskId b0{0, 0, 0, Direction::Backward}, b1{1, 0, 0, Direction::Backward};
  ASSERT_EQ(edges.size(), 4u);
  EXPECT_TRUE(has_edge(edges, f0, f1, EdgeKind::InterStageForward));
  EXPECT_TRUE(has_edge(edges, f1, b1, EdgeKind::LocalForwardToBackward));
  EXPECT_TRUE(has_edge(edges, b1, b0, EdgeKind::InterStageBackward));
  EXPECT_TRUE(has_edge(edges, f0, b0, EdgeKind::LocalForwardToBackward));
}

TEST(TaskGraph, SingleStageInterleavedWraps) {
  const auto w = uniform_workload(1, 1, 1, 1, 2);
  const auto edges = build_task_graph(w);
  const DependencyEdge wrap{{0, 0, 0, Direction::Forward}, {0, 0, 1, Direction::Forward}, EdgeKind::ChunkWrap};
  ASSERT_TRUE(has_edge(edges, wrap.from, wrap.to, wrap.kind));
  EXPECT_TRUE(wrap.is_local());
}

TEST(TaskGraph, EdgeCountMatchesOracle) {
  EXPECT_EQ(static_cast<int>(build_task_graph(uniform_workload(4, 2, 1, 1)).size()), oracle::kEdgesN4M2);
}

TEST(TaskGraph, AcyclicAcrossShapes) {
  for (int n : {1, 2, 3, 5})
    for (int m : {1, 2, 4})
      for (int c : {1, 2, 3})
        for (bool dec : {false, true}) {
          auto w = uniform_workload(n, m, 10, 20, c);
          w.set_decompose_backward(dec);
          TaskGraph g(w);
          EXPECT_EQ(static_cast<int>(g.topological_order().size()), w.num_tasks())
              << "N=" << n << " M=" << m << " C=" << c;
        }
}

TEST(TaskGraph, DecompositionAddsWeightEdges) {
  auto w = uniform_workload(2, 2, 10, 20);
  w.set_decompose_backward(true, {1, 4});
  const auto edges = build_task_graph(w);
  EXPECT_EQ(std::count_if(edges.begin(), edges.end(),
                          [](const DependencyEdge& e) { return e.kind == EdgeKind::BackwardToWeight; }),
            4);
  EXPECT_EQ(w.latency({0, 0, 0, Direction::Backward}), 5);
  EXPECT_EQ(w.latency({0, 0, 0, Direction::WeightUpdate}), 15);
}

TEST(TaskGraph, LocalEdgesCarryNoDelay) {
  auto w = uniform_workload(3, 3, 10, 20, 2);
  w.set_comm_delay({Distribution::uniform(5, 50), 9});
  TaskGraph g(w);
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    if (g.edges()[e].is_local()) {
      EXPECT_EQ(g.edge_delay(static_cast<int>(e)), 0);
    } else {
      EXPECT_GE(g.edge_delay(static_cast<int>(e)), 5);
      EXPECT_LE(g.edge_delay(static_cast<int>(e)), 50);
    }
  }
}

TEST(Workload, IndexRoundTrip) {
  auto w = uniform_workload(3, 4, 1, 1, 2);
  w.set_decompose_backward(true);
  std::set<int> seen;
  for (const auto& t : w.tasks()) {
    const int i = w.index(t);
    EXPECT_EQ(w.task_at(i), t);
    seen.insert(i);
  }
  EXPECT_EQ(static_cast<int>(seen.size()), w.num_tasks());
  EXPECT_THROW(w.index({3, 0, 0, Direction::Forward}), InvalidArgument);
}

TEST(Workload, RejectsBadShapes) {
  EXPECT_THROW(Workload(0, 1), InvalidArgument);
  EXPECT_THROW(Workload(1, 0), InvalidArgument);
  Workload w(2, 2);
  EXPECT_THROW(w.set_forward_time(0, 0, 0, -1), InvalidArgument);
  EXPECT_THROW(w.set_decompose_backward(true, {1, 1}), InvalidArgument);
}

TEST(Generator, ConstantFillsEveryEntry) {
  GeneratorSpec g;
  g.num_stages = 4;
  g.num_microbatches = 4;
  g.forward = g.backward = Distribution::constant(100);
  const auto w = generate_workload(g, 3);
  for (const auto& t : w.tasks()) EXPECT_EQ(w.latency(t), 100);
}

TEST(Generator, DeterministicPerSeed) {
  GeneratorSpec g;
  g.num_stages = 4;
  g.num_microbatches = 8;
  g.forward = Distribution::uniform(80, 120);
  g.backward = Distribution::lognormal(5.0, 0.4, 1, 1000);
  g.comm_delay = Distribution::uniform(0, 20);
  EXPECT_EQ(generate_workload(g, 7), generate_workload(g, 7));
  EXPECT_NE(generate_workload(g, 7), generate_workload(g, 8));
}

TEST(Generator, ClampsToRange) {
  GeneratorSpec g;
  g.num_stages = 3;
  g.num_microbatches = 16;
  g.forward = Distribution::lognormal(5.0, 2.0);
  g.backward = Distribution::lognormal(5.0, 2.0);
  g.m_l = 50;
  g.m_h = 300;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = generate_workload(g, seed);
    for (const auto& t : w.tasks()) {
      EXPECT_GE(w.latency(t), 50);
      EXPECT_LE(w.latency(t), 300);
    }
  }
}

TEST(Generator, HeavyLastDoublesLastStage) {
  GeneratorSpec g;
  g.num_stages = 3;
  g.num_microbatches = 4;
  g.forward = Distribution::constant(100);
  g.backward = Distribution::constant(200);
  g.skew = GeneratorSpec::Skew::HeavyLast;
  g.skew_factor = {2, 1};
  const auto w = generate_workload(g, 0);
  EXPECT_EQ(w.forward_time(2, 0, 0), 200);
  EXPECT_EQ(w.backward_time(2, 0, 0), 400);
  EXPECT_EQ(w.forward_time(1, 0, 0), 100);
}

TEST(Workload, JsonRoundTrip) {
  GeneratorSpec g;
  g.num_stages = 3;
  g.num_microbatches = 5;
  g.num_chunks = 2;
  g.forward = Distribution::uniform(1, 9);
  g.comm_delay = Distribution::constant(4);
  g.decompose_backward = true;
  g.backward_split_fraction = {1, 3};
  const auto w = generate_workload(g, 11);
  const nlohmann::json j = w;
  EXPECT_EQ(j.get<Workload>(), w);
  const nlohmann::json s = g;
  EXPECT_EQ(s.get<GeneratorSpec>(), g);
}

TEST(Rational, ParsesExactly) {
  EXPECT_EQ(Rational::parse("3/2"), (Rational{3, 2}));
  EXPECT_EQ(Rational::parse("1.5"), (Rational{3, 2}));
  EXPECT_EQ(Rational::parse("0.25"), (Rational{1, 4}));
  EXPECT_EQ(Rational::parse("2"), (Rational{2, 1}));
  EXPECT_THROW(Rational::parse("x"), InvalidArgument);
  EXPECT_EQ((Rational{1, 2}).scale_round(5), 3);
  EXPECT_EQ((Rational{1, 2}).scale_floor(5), 2);
}

TEST(TaskId, Formatting) {
  EXPECT_EQ(to_string(TaskId{2, 3, 1, Direction::Forward}), "F(mb3,c1)@s2");
  EXPECT_TRUE(canonical_less({0, 5, 0, Direction::Forward}, {0, 0, 0, Direction::Backward}));
}

}  // namespace
}  // namespace rrfp
