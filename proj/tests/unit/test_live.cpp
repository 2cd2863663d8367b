#include <gtest/gtest.h>

#include <algorithm>

#include "helpers.hpp"
#include "rrfp/live.hpp"

namespace rrfp {
namespace {

using testing::uniform_workload;

// Wall-clock traces: allow scheduling slack on a loaded machine.
constexpr Micros kLiveDurationTolerance = 20000;

std::vector<std::pair<int, TaskId>> projection(const Trace& t) {
  std::vector<std::pair<int, TaskId>> out;
  for (const auto& e : t.exec_events())
    if (e.rank == 0) out.emplace_back(e.stage, e.task());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return canonical_less(a.second, b.second); });
  return out;
}

TEST(Live, CompletesWithEveryTask) {
  const auto w = uniform_workload(4, 8, 1000, 1000);
  const auto run = run_live(w, HintOrder{}, 2, {1, 1});
  int rank0 = 0;
  for (const auto& e : run.trace.exec_events()) rank0 += e.rank == 0;
  EXPECT_EQ(rank0, 2 * 4 * 8);
  ValidationOptions vo;
  vo.duration_tolerance = kLiveDurationTolerance;
  EXPECT_TRUE(validate_trace(run.trace, w, vo).ok());
  EXPECT_TRUE(run.trace.header.wall_clock);
}

TEST(Live, SameExecutionsAsVirtualEngine) {
  const auto w = uniform_workload(3, 4, 200, 300);
  const auto live = run_live(w, HintOrder{}, 2, {1, 1});
  const auto virt = run_rrfp(w, HintOrder{}, 2, 0);
  EXPECT_EQ(projection(live.trace), projection(virt.trace));
}

TEST(Live, StressAtTightLimits) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    GeneratorSpec g;
    g.num_stages = 3;
    g.num_microbatches = 4;
    g.num_chunks = 1 + static_cast<int>(seed % 2);
    g.tp_group_size = 1 + static_cast<int>((seed / 2) % 2);
    g.forward = Distribution::uniform(20, 200);
    g.backward = Distribution::uniform(20, 300);
    g.comm_delay = Distribution::uniform(0, 30);
    const auto w = generate_workload(g, seed);
    LiveOptions o;
    o.seed = seed;
    o.tp.skew = Distribution::uniform(0, 30);
    o.tp.coord_cost = 5;
    o.jitter = jitter_preset("J1");
    const int limit = 1 + static_cast<int>(seed % 3 == 0);
    const auto run = run_live(w, HintOrder{}, limit, {1, 1}, o);
    ValidationOptions vo;
    vo.duration_tolerance = kLiveDurationTolerance;
    const auto report = validate_trace(run.trace, w, vo);
    EXPECT_TRUE(report.ok()) << "seed " << seed << "\n" << report.summary();
  }
}

TEST(Live, ScaledTimeStretchesMakespan) {
  const auto w = uniform_workload(2, 2, 1000, 1000);
  const auto fast = run_live(w, HintOrder{}, 4, {1, 2});
  EXPECT_GE(fast.trace.makespan(), 3000);
  EXPECT_EQ(fast.trace.header.time_scale, (Rational{1, 2}));
}

}  // namespace
}  // namespace rrfp
