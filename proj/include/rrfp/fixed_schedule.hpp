#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrfp/jitter.hpp"
#include "rrfp/trace.hpp"
#include "rrfp/workload.hpp"

namespace rrfp {

/// A pre-committed execution order: one task list per stage.
struct FixedSchedule {
  std::vector<std::vector<TaskId>> per_stage_order;

  /// Each stage lists exactly the tasks it owns, each once.
  void validate(const Workload& workload) const;

  friend bool operator==(const FixedSchedule&, const FixedSchedule&) = default;
};

/// Non-interleaved 1F1B: stage i runs min(M, N-1-i) warmup forwards, then
/// alternates one forward and one backward, then drains the remaining backwards.
FixedSchedule build_1f1b_schedule(const Workload& workload);

/// Thrown by run_fixed when the stage heads wait on each other in a cycle.
class ScheduleDeadlock : public std::runtime_error {
 public:
  ScheduleDeadlock(std::vector<int> cycle, const std::string& detail);
  /// Stages forming the waiting cycle, in wait-for order.
  const std::vector<int>& cycle() const { return cycle_; }

 private:
  std::vector<int> cycle_;
};

struct FixedRunOptions {
  JitterConfig jitter;  // defaults to J0
  std::uint64_t seed = 0;
  std::string scheduler_name = "fixed";
  bool record_messages = true;
};

/// Executes each stage's list strictly in order; a stage blocks whenever its
/// head task's inputs have not arrived. All TP ranks run in lockstep.
Trace run_fixed(const FixedSchedule& schedule, const Workload& workload, const FixedRunOptions& options = {});

/// Forward-only reference makespan: all forwards available at stage 0,
/// inter-stage dependencies only. Requires C = 1 and zero communication delay.
Micros forward_only_makespan(const Workload& workload);
/// Backward-only counterpart: all backwards available at the last stage.
Micros backward_only_makespan(const Workload& workload);

void to_json(nlohmann::json& j, const FixedSchedule& s);
void from_json(const nlohmann::json& j, FixedSchedule& s);

}  // namespace rrfp
