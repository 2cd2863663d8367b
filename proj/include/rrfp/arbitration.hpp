#pragma once

// Ready-set arbitration shared verbatim by the virtual-clock engine and the
// live runtime: per-stage buffers, hint orders, backpressure and the TP
// agreement rule.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrfp/workload.hpp"

namespace rrfp {

enum class ChunkRule { LowFirst, HighFirst };

/// Ready entries of one direction at one stage, keyed by (chunk, microbatch).
class ReadySet {
 public:
  ReadySet(int stage, Direction direction) : stage_(stage), direction_(direction) {}

  void insert(const TaskId& t, Micros ready_time);
  bool erase(const TaskId& t);
  bool contains(const TaskId& t) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  Direction direction() const { return direction_; }

  /// Highest-priority entry under `rule`, ties to the smaller microbatch.
  std::optional<TaskId> best(ChunkRule rule) const;
  std::vector<TaskId> items() const;

 private:
  int stage_;
  Direction direction_;
  std::map<std::pair<int, int>, Micros> entries_;  // (chunk, mb) -> ready time
};

/// Default within-direction rule: forward prefers the lower chunk, backward
/// (and weight update) the higher chunk; ties go to the smaller microbatch.
ChunkRule default_chunk_rule(Direction d);

std::optional<TaskId> next_by_priority(const ReadySet& buffer, Direction direction);

struct BufferOccupancy {
  int forward_ready = 0;
  int forward_finished = 0;
  int backward_ready = 0;
  int backward_finished = 0;

  int max_component() const;
  void raise_to(const BufferOccupancy& o);
  friend bool operator==(const BufferOccupancy&, const BufferOccupancy&) = default;
};

/// One rank's view of a stage: dependency counters, the ready candidates
/// and the four message buffers' occupancy.
///
/// Forward-ready entries are retained until the matching backward completes.
/// Stage-0 chunk-0 inputs come from the data loader and are not buffered.
class StageBuffers {
 public:
  StageBuffers(const Workload& workload, const TaskGraph& graph, int stage);

  int stage() const { return stage_; }

  /// A predecessor edge into one of this stage's tasks has been satisfied.
  /// Returns true if the target became ready.
  bool on_input(const DependencyEdge& edge, int edge_index, Micros now);
  void on_dispatch(const TaskId& t);
  void on_complete(const TaskId& t);
  void on_send_start(Direction d);
  void on_send_complete(Direction d);

  const ReadySet& forward_ready() const { return forward_; }
  const ReadySet& backward_ready() const { return backward_; }
  const ReadySet& weight_ready() const { return weight_; }
  const ReadySet& ready(Direction d) const;
  bool is_ready(const TaskId& t) const { return ready(t.direction).contains(t); }
  bool any_ready() const { return !forward_.empty() || !backward_.empty() || !weight_.empty(); }

  const BufferOccupancy& occupancy() const { return occ_; }
  const BufferOccupancy& max_occupancy() const { return max_occ_; }

  std::string describe() const;

 private:
  int local(const TaskId& t) const;
  void bump();

  const Workload* workload_;
  int stage_;
  std::vector<int> remaining_;         // unsatisfied predecessors per local task
  std::vector<bool> retained_input_;   // forward-ready slot held per (chunk, mb)
  std::vector<bool> gradient_held_;    // backward-ready slot held per (chunk, mb)
  ReadySet forward_, backward_, weight_;
  BufferOccupancy occ_, max_occ_;
};

enum class HintKind { BF, FB, BPriority, FPriority, BFW, External };

struct HintRule {
  Direction direction;
  ChunkRule chunk_rule;
  friend bool operator==(const HintRule&, const HintRule&) = default;
};

/// Non-binding preference over ready work. External hints scan their rules
/// strictly in order; directions they omit are appended with default rules,
/// so every hint is total.
struct HintOrder {
  HintKind kind = HintKind::BF;
  std::vector<HintRule> rules;  // External only

  /// "bf", "fb", "bprio", "fprio", "bfw", or an explicit list such as
  /// "B:high,F:low,W:high".
  static HintOrder parse(const std::string& text);
  std::string name() const;

  friend bool operator==(const HintOrder&, const HintOrder&) = default;
};

enum class BackpressureMode { Normal, DrainBackward, FocusMicrobatch };

std::string_view to_string(BackpressureMode m);

struct BackpressureState {
  int limit = 32;
  int num_chunks = 1;
  int n_f = 0;  // forwards executed this iteration at this stage
  int n_b = 0;  // backwards (B-input) executed
  BackpressureMode mode = BackpressureMode::Normal;
  int focus_microbatch = -1;
  int focus_position = 0;
  /// Local completion progress per microbatch along F_0..F_{C-1},B_{C-1}..B_0.
  std::vector<int> progress;

  BackpressureState() = default;
  BackpressureState(int limit, int num_chunks, int num_microbatches);

  int outstanding() const { return n_f - n_b; }  // 𝒟_i
  /// Task at `position` in the fixed local completion order of `mb`.
  TaskId local_order_task(int stage, int mb, int position) const;
};

/// Enters DrainBackward (C = 1) or FocusMicrobatch on the lowest unfinished
/// microbatch (C > 1) when n_f - n_b >= limit; returns to Normal below it.
BackpressureState update_backpressure(const BackpressureState& bp);

struct ArbitrationState {
  BackpressureState bp;
  /// Direction of the last F/B dispatch in the current round; cleared at round start.
  std::optional<Direction> last_dispatched;
};

struct Decision {
  enum class Kind { Execute, Wait };
  Kind kind = Kind::Wait;
  TaskId task;

  static Decision wait() { return {}; }
  static Decision execute(const TaskId& t) { return {Kind::Execute, t}; }
  bool is_wait() const { return kind == Kind::Wait; }
  friend bool operator==(const Decision&, const Decision&) = default;
};

/// Picks the next task for one stage (or waits). Never waits while ready
/// work exists in Normal mode.
Decision arbitrate(const StageBuffers& buffers, const HintOrder& hint, const ArbitrationState& state);

struct CoordOutcome {
  bool agreed = false;
  TaskId task;
};

/// Agreement iff every rank proposed the same task.
CoordOutcome tp_coordinate(std::span<const std::optional<TaskId>> proposals);

/// Collective-relevant tasks (F and B) are coordinated when R > 1.
inline bool is_collective_relevant(const TaskId& t) { return t.direction != Direction::WeightUpdate; }

/// Per-stage arbitration state machine driven by both executors.
class StageController {
 public:
  StageController(const Workload& workload, int stage, HintOrder hint, int buffer_limit);

  void refresh_backpressure() { state_.bp = update_backpressure(state_.bp); }
  Decision decide(const StageBuffers& view) const { return arbitrate(view, hint_, state_); }

  /// Records a dispatch: counters, local progress and the round phase.
  void commit(const TaskId& t);
  /// A failed TP round restarts from the beginning of the hint order.
  void on_deferred() { state_.last_dispatched.reset(); }

  const ArbitrationState& state() const { return state_; }
  int max_outstanding() const { return max_outstanding_; }
  int stage() const { return stage_; }

 private:
  int stage_;
  HintOrder hint_;
  ArbitrationState state_;
  int max_outstanding_ = 0;
};

}  // namespace rrfp
