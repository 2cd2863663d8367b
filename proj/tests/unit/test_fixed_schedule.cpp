#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "rrfp/fixed_schedule.hpp"

namespace rrfp {
namespace {

using testing::uniform_workload;

std::string letters(const std::vector<TaskId>& order) {
  std::string s;
  for (const auto& t : order) s += direction_letter(t.direction) + std::to_string(t.microbatch) + " ";
  return s;
}

TEST(OneFOneB, TwoStagesTwoMicrobatches) {
  const auto s = build_1f1b_schedule(uniform_workload(2, 2, 1, 1));
  EXPECT_EQ(letters(s.per_stage_order[0]), "F0 F1 B0 B1 ");
  EXPECT_EQ(letters(s.per_stage_order[1]), "F0 B0 F1 B1 ");
}

TEST(OneFOneB, SingleStageAlternates) {
  const auto s = build_1f1b_schedule(uniform_workload(1, 3, 1, 1));
  EXPECT_EQ(letters(s.per_stage_order[0]), "F0 B0 F1 B1 F2 B2 ");
}

TEST(OneFOneB, LastStageOutstandingStaysBinary) {
  const auto s = build_1f1b_schedule(uniform_workload(4, 8, 1, 1));
  int d = 0;
  for (const auto& t : s.per_stage_order[3]) {
    d += t.direction == Direction::Forward ? 1 : -1;
    EXPECT_TRUE(d == 0 || d == 1);
  }
}

TEST(OneFOneB, MakespanMatchesOracle) {
  const auto w = uniform_workload(2, 2, 100, 100);
  const auto trace = run_fixed(build_1f1b_schedule(w), w);
  EXPECT_EQ(trace.makespan(), oracle::kOneFOneBN2M2At100);
  EXPECT_TRUE(validate_trace(trace, w).ok());
}

TEST(OneFOneB, ValidAcrossShapes) {
  for (int n : {1, 2, 4, 6})
    for (int m : {1, 3, 8}) {
      auto w = uniform_workload(n, m, 7, 13, 1, n % 2 + 1);
      w.set_comm_delay({Distribution::uniform(0, 9), 4});
      FixedRunOptions o;
      o.jitter = jitter_preset("J2");
      const auto trace = run_fixed(build_1f1b_schedule(w), w, o);
      const auto r = validate_trace(trace, w);
      EXPECT_TRUE(r.ok()) << "N=" << n << " M=" << m << "\n" << r.summary();
    }
}

TEST(FixedSchedule, DeadlockNamesStageZero) {
  const auto w = uniform_workload(2, 1, 10, 10);
  FixedSchedule s;
  s.per_stage_order = {{{0, 0, 0, Direction::Backward}, {0, 0, 0, Direction::Forward}},
                       {{1, 0, 0, Direction::Forward}, {1, 0, 0, Direction::Backward}}};
  try {
    run_fixed(s, w);
    FAIL() << "expected a deadlock";
  } catch (const ScheduleDeadlock& e) {
    EXPECT_NE(std::find(e.cycle().begin(), e.cycle().end(), 0), e.cycle().end());
  }
}

TEST(FixedSchedule, ValidateRejectsForeignTasks) {
  const auto w = uniform_workload(2, 1, 10, 10);
  FixedSchedule s = build_1f1b_schedule(w);
  s.per_stage_order[0].push_back({1, 0, 0, Direction::Forward});
  EXPECT_THROW(s.validate(w), InvalidArgument);
}

TEST(ReferencePipelines, ForwardOnlyOracles) {
  Workload w(2, 2);
  w.fill(0, 0);
  w.set_forward_time(0, 0, 0, 3);
  w.set_forward_time(0, 0, 1, 1);
  w.set_forward_time(1, 0, 0, 2);
  w.set_forward_time(1, 0, 1, 5);
  EXPECT_EQ(forward_only_makespan(w), oracle::kForwardOnly_3_1_2_5);
  EXPECT_EQ(forward_only_makespan(uniform_workload(4, 3, 1, 1)), oracle::kForwardOnlyN4M3Ones);
  EXPECT_EQ(backward_only_makespan(uniform_workload(4, 3, 1, 1)), 6);
}

}  // namespace
}  // namespace rrfp
