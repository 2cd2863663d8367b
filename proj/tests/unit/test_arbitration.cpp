#include <gtest/gtest.h>

#include "helpers.hpp"
#include "rrfp/arbitration.hpp"
#include "rrfp/engine.hpp"

namespace rrfp {
namespace {

using testing::uniform_workload;

TaskId F(int s, int mb, int c = 0) { return {s, mb, c, Direction::Forward}; }
TaskId B(int s, int mb, int c = 0) { return {s, mb, c, Direction::Backward}; }

// Satisfies every predecessor edge of `t`.
void feed(StageBuffers& buf, const TaskGraph& g, const Workload& w, const TaskId& t) {
  for (const auto& link : g.predecessors(w.index(t))) buf.on_input(g.edges()[static_cast<std::size_t>(link.edge)], link.edge, 0);
}

TEST(ReadySet, ForwardPrefersLowerChunk) {
  ReadySet r(0, Direction::Forward);
  r.insert(F(0, 0, 1), 0);
  r.insert(F(0, 1, 0), 0);
  EXPECT_EQ(next_by_priority(r, Direction::Forward), F(0, 1, 0));
}

TEST(ReadySet, BackwardPrefersHigherChunk) {
  ReadySet r(0, Direction::Backward);
  r.insert(B(0, 3, 0), 0);
  r.insert(B(0, 1, 2), 0);
  EXPECT_EQ(next_by_priority(r, Direction::Backward), B(0, 1, 2));
}

TEST(ReadySet, TiesGoToSmallerMicrobatch) {
  ReadySet r(0, Direction::Forward);
  r.insert(F(0, 5), 0);
  r.insert(F(0, 2), 0);
  EXPECT_EQ(next_by_priority(r, Direction::Forward), F(0, 2));
  EXPECT_FALSE(next_by_priority(ReadySet(0, Direction::Forward), Direction::Forward).has_value());
}

class LastStage : public ::testing::Test {
 protected:
  Workload w = uniform_workload(2, 6, 10, 10);
  TaskGraph g{w};
  StageBuffers buf{w, g, 1};
  ArbitrationState st{BackpressureState(32, 1, 6), std::nullopt};
};

TEST_F(LastStage, BfRunsBackwardFirst) {
  feed(buf, g, w, F(1, 5));
  feed(buf, g, w, B(1, 2));
  EXPECT_EQ(arbitrate(buf, HintOrder::parse("bf"), st), Decision::execute(B(1, 2)));
  st.last_dispatched = Direction::Backward;
  EXPECT_EQ(arbitrate(buf, HintOrder::parse("bf"), st), Decision::execute(F(1, 5)));
}

TEST_F(LastStage, BfSkipsEmptyBackward) {
  feed(buf, g, w, F(1, 5));
  EXPECT_EQ(arbitrate(buf, HintOrder::parse("bf"), st), Decision::execute(F(1, 5)));
  EXPECT_EQ(arbitrate(buf, HintOrder::parse("bprio"), st), Decision::execute(F(1, 5)));
}

TEST_F(LastStage, PriorityVariants) {
  feed(buf, g, w, F(1, 5));
  feed(buf, g, w, B(1, 2));
  st.last_dispatched = Direction::Backward;
  EXPECT_EQ(arbitrate(buf, HintOrder::parse("bprio"), st), Decision::execute(B(1, 2)));
  st.last_dispatched = Direction::Forward;
  EXPECT_EQ(arbitrate(buf, HintOrder::parse("fprio"), st), Decision::execute(F(1, 5)));
  EXPECT_EQ(arbitrate(buf, HintOrder::parse("fb"), st), Decision::execute(B(1, 2)));
  st.last_dispatched.reset();
  EXPECT_EQ(arbitrate(buf, HintOrder::parse("fb"), st), Decision::execute(F(1, 5)));
}

TEST_F(LastStage, DrainWaitsInsteadOfForward) {
  feed(buf, g, w, F(1, 5));
  st.bp.mode = BackpressureMode::DrainBackward;
  EXPECT_TRUE(arbitrate(buf, HintOrder{}, st).is_wait());
}

TEST(Arbitrate, BfwFallsBackToWeight) {
  auto w = uniform_workload(1, 1, 10, 10);
  w.set_decompose_backward(true);
  TaskGraph g(w);
  StageBuffers buf(w, g, 0);
  const TaskId wt{0, 0, 0, Direction::WeightUpdate};
  feed(buf, g, w, wt);
  buf.on_dispatch(F(0, 0));  // F is ready at time 0; take it out of the way
  ArbitrationState st{BackpressureState(32, 1, 1), std::nullopt};
  EXPECT_EQ(arbitrate(buf, HintOrder::parse("bfw"), st), Decision::execute(wt));
}

TEST(Arbitrate, NeverWaitsWithReadyWorkInNormalMode) {
  const auto w = uniform_workload(1, 3, 10, 10);
  TaskGraph g(w);
  StageBuffers buf(w, g, 0);
  for (const char* h : {"bf", "fb", "bprio", "fprio", "bfw", "W:high"}) {
    ArbitrationState st{BackpressureState(32, 1, 3), std::nullopt};
    EXPECT_FALSE(arbitrate(buf, HintOrder::parse(h), st).is_wait()) << h;
  }
}

TEST(Hint, ParseAndName) {
  EXPECT_EQ(HintOrder::parse("B-Priority").kind, HintKind::BPriority);
  const auto h = HintOrder::parse("B:high, F:low");
  EXPECT_EQ(h.kind, HintKind::External);
  EXPECT_EQ(h.name(), "B:high,F:low");
  EXPECT_EQ(HintOrder::parse(h.name()), h);
  EXPECT_THROW(HintOrder::parse("zz"), InvalidArgument);
  EXPECT_THROW(HintOrder::parse("F:mid"), InvalidArgument);
}

TEST(Backpressure, LimitOneDrainsAfterOneForward) {
  BackpressureState bp(1, 1, 4);
  bp.n_f = 1;
  EXPECT_EQ(update_backpressure(bp).mode, BackpressureMode::DrainBackward);
  bp.n_b = 1;
  EXPECT_EQ(update_backpressure(bp).mode, BackpressureMode::Normal);
}

TEST(Backpressure, BelowLimitIsNormal) {
  BackpressureState bp(4, 1, 8);
  bp.n_f = 3;
  EXPECT_EQ(update_backpressure(bp).mode, BackpressureMode::Normal);
}

TEST(Backpressure, InterleavedFocusesLowestUnfinished) {
  BackpressureState bp(2, 3, 4);
  bp.n_f = 2;
  bp.progress = {6, 2, 0, 0};
  const auto next = update_backpressure(bp);
  EXPECT_EQ(next.mode, BackpressureMode::FocusMicrobatch);
  EXPECT_EQ(next.focus_microbatch, 1);
  EXPECT_EQ(next.focus_position, 2);
  EXPECT_EQ(next.local_order_task(0, 1, 2), F(0, 1, 2));
  EXPECT_EQ(next.local_order_task(0, 1, 3), B(0, 1, 2));
  EXPECT_EQ(next.local_order_task(0, 1, 5), B(0, 1, 0));
}

TEST(Backpressure, InterleavedPeakStaysWithinLimitPlusChunks) {
  GeneratorSpec gs;
  gs.num_stages = 2;
  gs.num_microbatches = 8;
  gs.num_chunks = 3;
  gs.forward = Distribution::uniform(5, 40);
  gs.backward = Distribution::uniform(5, 80);
  int peak = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto run = run_rrfp(generate_workload(gs, seed), HintOrder{}, 2, seed);
    for (const auto& s : run.metrics.stages) peak = std::max(peak, s.max_outstanding);
  }
  EXPECT_GE(peak, 2);
  EXPECT_LE(peak, 5);
}

TEST(TpCoordinate, Examples) {
  const std::vector<std::optional<TaskId>> same(4, F(0, 7));
  const auto a = tp_coordinate(same);
  EXPECT_TRUE(a.agreed);
  EXPECT_EQ(a.task, F(0, 7));
  const std::vector<std::optional<TaskId>> mixed{F(0, 7), F(0, 7), F(0, 8), F(0, 7)};
  EXPECT_FALSE(tp_coordinate(mixed).agreed);
  const std::vector<std::optional<TaskId>> missing{F(0, 7), std::nullopt, F(0, 7)};
  EXPECT_FALSE(tp_coordinate(missing).agreed);
}

TEST(StageBuffers, OccupancyReleasedOnBackward) {
  const auto w = uniform_workload(3, 2, 10, 10);
  TaskGraph g(w);
  StageBuffers buf(w, g, 1);
  feed(buf, g, w, F(1, 0));
  EXPECT_EQ(buf.occupancy().forward_ready, 1);
  buf.on_dispatch(F(1, 0));
  buf.on_complete(F(1, 0));
  EXPECT_EQ(buf.occupancy().forward_ready, 1);
  feed(buf, g, w, B(1, 0));
  EXPECT_EQ(buf.occupancy().backward_ready, 1);
  buf.on_dispatch(B(1, 0));
  buf.on_complete(B(1, 0));
  EXPECT_EQ(buf.occupancy().forward_ready, 0);
  EXPECT_EQ(buf.occupancy().backward_ready, 0);
  EXPECT_EQ(buf.max_occupancy().forward_ready, 1);
}

TEST(StageController, DeferralResetsPhase) {
  const auto w = uniform_workload(1, 2, 10, 10);
  StageController c(w, 0, HintOrder{}, 4);
  c.commit(F(0, 0));
  EXPECT_EQ(c.state().last_dispatched, Direction::Forward);
  c.on_deferred();
  EXPECT_FALSE(c.state().last_dispatched.has_value());
  c.commit(F(0, 1));
  EXPECT_EQ(c.max_outstanding(), 2);
}

}  // namespace
}  // namespace rrfp
