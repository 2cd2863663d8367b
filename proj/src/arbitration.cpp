#include "rrfp/arbitration.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace rrfp {

// ---------------------------------------------------------------------------
// ReadySet

void ReadySet::insert(const TaskId& t, Micros ready_time) {
  entries_.emplace(std::pair(t.chunk, t.microbatch), ready_time);
}

bool ReadySet::erase(const TaskId& t) { return entries_.erase({t.chunk, t.microbatch}) > 0; }

bool ReadySet::contains(const TaskId& t) const {
  return t.stage == stage_ && t.direction == direction_ && entries_.count({t.chunk, t.microbatch}) > 0;
}

std::optional<TaskId> ReadySet::best(ChunkRule rule) const {
  if (entries_.empty()) return std::nullopt;
  auto it = entries_.begin();
  if (rule == ChunkRule::HighFirst) {
    const int top_chunk = entries_.rbegin()->first.first;
    it = entries_.lower_bound({top_chunk, -1});
  }
  return TaskId{stage_, it->first.second, it->first.first, direction_};
}

std::vector<TaskId> ReadySet::items() const {
  std::vector<TaskId> out;
  out.reserve(entries_.size());
  for (const auto& [key, _] : entries_) out.push_back({stage_, key.second, key.first, direction_});
  return out;
}

ChunkRule default_chunk_rule(Direction d) {
  return d == Direction::Forward ? ChunkRule::LowFirst : ChunkRule::HighFirst;
}

std::optional<TaskId> next_by_priority(const ReadySet& buffer, Direction direction) {
  if (buffer.direction() != direction) throw InvalidArgument("ready set direction mismatch");
  return buffer.best(default_chunk_rule(direction));
}

// ---------------------------------------------------------------------------
// Buffers

int BufferOccupancy::max_component() const {
  return std::max({forward_ready, forward_finished, backward_ready, backward_finished});
}

void BufferOccupancy::raise_to(const BufferOccupancy& o) {
  forward_ready = std::max(forward_ready, o.forward_ready);
  forward_finished = std::max(forward_finished, o.forward_finished);
  backward_ready = std::max(backward_ready, o.backward_ready);
  backward_finished = std::max(backward_finished, o.backward_finished);
}

StageBuffers::StageBuffers(const Workload& workload, const TaskGraph& graph, int stage)
    : workload_(&workload),
      stage_(stage),
      remaining_(static_cast<std::size_t>(workload.tasks_per_stage()), 0),
      retained_input_(static_cast<std::size_t>(workload.num_chunks() * workload.num_microbatches()), false),
      gradient_held_(retained_input_.size(), false),
      forward_(stage, Direction::Forward),
      backward_(stage, Direction::Backward),
      weight_(stage, Direction::WeightUpdate) {
  for (const auto& t : workload.stage_tasks(stage)) {
    const int n = static_cast<int>(graph.predecessors(workload.index(t)).size());
    remaining_[static_cast<std::size_t>(local(t))] = n;
    if (n == 0) forward_.insert(t, 0);
  }
}

int StageBuffers::local(const TaskId& t) const {
  return workload_->index(t) - workload_->index(TaskId{stage_, 0, 0, t.direction}) +
         static_cast<int>(t.direction) * workload_->num_chunks() * workload_->num_microbatches();
}

void StageBuffers::bump() { max_occ_.raise_to(occ_); }

const ReadySet& StageBuffers::ready(Direction d) const {
  switch (d) {
    case Direction::Forward:
      return forward_;
    case Direction::Backward:
      return backward_;
    case Direction::WeightUpdate:
      return weight_;
  }
  return forward_;
}

bool StageBuffers::on_input(const DependencyEdge& edge, int /*edge_index*/, Micros now) {
  const TaskId& t = edge.to;
  if (t.stage != stage_) throw InvalidArgument("input routed to the wrong stage: " + to_string(t));
  const auto slot = static_cast<std::size_t>(t.chunk * workload_->num_microbatches() + t.microbatch);
  const bool forward_input =
      t.direction == Direction::Forward &&
      (edge.kind == EdgeKind::InterStageForward || edge.kind == EdgeKind::ChunkWrap);
  const bool gradient_input =
      t.direction == Direction::Backward &&
      (edge.kind == EdgeKind::InterStageBackward || edge.kind == EdgeKind::ChunkWrap ||
       (edge.kind == EdgeKind::LocalForwardToBackward && stage_ == workload_->num_stages() - 1 &&
        t.chunk == workload_->num_chunks() - 1));
  if (forward_input) {
    retained_input_[slot] = true;
    ++occ_.forward_ready;
  }
  if (gradient_input) {
    gradient_held_[slot] = true;
    ++occ_.backward_ready;
  }
  bump();
  int& rem = remaining_[static_cast<std::size_t>(local(t))];
  if (rem <= 0) throw InvalidArgument("duplicate input for " + to_string(t));
  if (--rem > 0) return false;
  switch (t.direction) {
    case Direction::Forward:
      forward_.insert(t, now);
      break;
    case Direction::Backward:
      backward_.insert(t, now);
      break;
    case Direction::WeightUpdate:
      weight_.insert(t, now);
      break;
  }
  return true;
}

void StageBuffers::on_dispatch(const TaskId& t) {
  bool removed = false;
  switch (t.direction) {
    case Direction::Forward:
      removed = forward_.erase(t);
      break;
    case Direction::Backward:
      removed = backward_.erase(t);
      break;
    case Direction::WeightUpdate:
      removed = weight_.erase(t);
      break;
  }
  if (!removed) throw InvalidArgument("dispatching " + to_string(t) + " which is not ready");
}

void StageBuffers::on_complete(const TaskId& t) {
  if (t.direction != Direction::Backward) return;
  const auto slot = static_cast<std::size_t>(t.chunk * workload_->num_microbatches() + t.microbatch);
  if (retained_input_[slot]) {
    retained_input_[slot] = false;
    --occ_.forward_ready;
  }
  if (gradient_held_[slot]) {
    gradient_held_[slot] = false;
    --occ_.backward_ready;
  }
}

void StageBuffers::on_send_start(Direction d) {
  if (d == Direction::Forward) {
    ++occ_.forward_finished;
  } else {
    ++occ_.backward_finished;
  }
  bump();
}

void StageBuffers::on_send_complete(Direction d) {
  if (d == Direction::Forward) {
    --occ_.forward_finished;
  } else {
    --occ_.backward_finished;
  }
}

std::string StageBuffers::describe() const {
  std::ostringstream os;
  auto list = [&](const char* name, const ReadySet& set) {
    os << name << "={";
    bool first = true;
    for (const auto& t : set.items()) {
      os << (first ? "" : " ") << "mb" << t.microbatch << "c" << t.chunk;
      first = false;
    }
    os << "} ";
  };
  list("F", forward_);
  list("B", backward_);
  list("W", weight_);
  os << "occ[fr=" << occ_.forward_ready << " ff=" << occ_.forward_finished << " br=" << occ_.backward_ready
     << " bf=" << occ_.backward_finished << "]";
  return os.str();
}

// ---------------------------------------------------------------------------
// Hints

HintOrder HintOrder::parse(const std::string& raw) {
  std::string text;
  for (char c : raw) text += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (text == "bf") return {HintKind::BF, {}};
  if (text == "fb") return {HintKind::FB, {}};
  if (text == "bprio" || text == "b-priority" || text == "bpriority") return {HintKind::BPriority, {}};
  if (text == "fprio" || text == "f-priority" || text == "fpriority") return {HintKind::FPriority, {}};
  if (text == "bfw") return {HintKind::BFW, {}};
  HintOrder h{HintKind::External, {}};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
               item.end());
    if (item.empty()) continue;
    const auto colon = item.find(':');
    const Direction d = direction_from_string(item.substr(0, colon));
    ChunkRule rule = default_chunk_rule(d);
    if (colon != std::string::npos) {
      const auto r = item.substr(colon + 1);
      if (r == "low") {
        rule = ChunkRule::LowFirst;
      } else if (r == "high") {
        rule = ChunkRule::HighFirst;
      } else {
        throw InvalidArgument("unknown chunk rule '" + r + "' in hint '" + raw + "'");
      }
    }
    h.rules.push_back({d, rule});
  }
  if (h.rules.empty()) throw InvalidArgument("unknown hint order '" + raw + "'");
  return h;
}

std::string HintOrder::name() const {
  switch (kind) {
    case HintKind::BF:
      return "bf";
    case HintKind::FB:
      return "fb";
    case HintKind::BPriority:
      return "bprio";
    case HintKind::FPriority:
      return "fprio";
    case HintKind::BFW:
      return "bfw";
    case HintKind::External: {
      std::string s;
      for (const auto& r : rules) {
        if (!s.empty()) s += ",";
        s += direction_letter(r.direction);
        s += r.chunk_rule == ChunkRule::LowFirst ? ":low" : ":high";
      }
      return s;
    }
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Backpressure

std::string_view to_string(BackpressureMode m) {
  switch (m) {
    case BackpressureMode::Normal:
      return "normal";
    case BackpressureMode::DrainBackward:
      return "drain-backward";
    case BackpressureMode::FocusMicrobatch:
      return "focus-microbatch";
  }
  return "?";
}

BackpressureState::BackpressureState(int limit_, int num_chunks_, int num_microbatches)
    : limit(limit_), num_chunks(num_chunks_), progress(static_cast<std::size_t>(num_microbatches), 0) {
  if (limit < 1) throw InvalidArgument("buffer limit must be at least 1");
}

TaskId BackpressureState::local_order_task(int stage, int mb, int position) const {
  if (position < num_chunks) return {stage, mb, position, Direction::Forward};
  return {stage, mb, 2 * num_chunks - 1 - position, Direction::Backward};
}

BackpressureState update_backpressure(const BackpressureState& bp) {
  BackpressureState next = bp;
  if (bp.outstanding() < bp.limit) {
    next.mode = BackpressureMode::Normal;
    next.focus_microbatch = -1;
    next.focus_position = 0;
    return next;
  }
  if (bp.num_chunks == 1) {
    next.mode = BackpressureMode::DrainBackward;
    return next;
  }
  next.mode = BackpressureMode::FocusMicrobatch;
  const int done = 2 * bp.num_chunks;
  for (std::size_t mb = 0; mb < bp.progress.size(); ++mb) {
    if (bp.progress[mb] < done) {
      next.focus_microbatch = static_cast<int>(mb);
      next.focus_position = bp.progress[mb];
      return next;
    }
  }
  // Unreachable while n_f > n_b: some microbatch is still open.
  next.mode = BackpressureMode::Normal;
  next.focus_microbatch = -1;
  return next;
}

// ---------------------------------------------------------------------------
// Arbitration

namespace {

struct ScanOrder {
  std::array<HintRule, 3> rules{};
  std::size_t size = 0;

  void add(Direction d, ChunkRule r) {
    for (std::size_t i = 0; i < size; ++i)
      if (rules[i].direction == d) return;
    rules[size++] = {d, r};
  }
  void add(Direction d) { add(d, default_chunk_rule(d)); }
};

ScanOrder scan_order(const HintOrder& hint, const std::optional<Direction>& last) {
  ScanOrder order;
  const bool after_b = last == Direction::Backward;
  const bool after_f = last == Direction::Forward;
  switch (hint.kind) {
    case HintKind::BF:
    case HintKind::BFW:
      if (after_b) {
        order.add(Direction::Forward);
        order.add(Direction::Backward);
      } else {
        order.add(Direction::Backward);
        order.add(Direction::Forward);
      }
      break;
    case HintKind::FB:
      if (after_f) {
        order.add(Direction::Backward);
        order.add(Direction::Forward);
      } else {
        order.add(Direction::Forward);
        order.add(Direction::Backward);
      }
      break;
    case HintKind::BPriority:
      order.add(Direction::Backward);
      order.add(Direction::Forward);
      break;
    case HintKind::FPriority:
      order.add(Direction::Forward);
      order.add(Direction::Backward);
      break;
    case HintKind::External:
      for (const auto& r : hint.rules) order.add(r.direction, r.chunk_rule);
      order.add(Direction::Backward);
      order.add(Direction::Forward);
      break;
  }
  order.add(Direction::WeightUpdate);
  return order;
}

}  // namespace

Decision arbitrate(const StageBuffers& buffers, const HintOrder& hint, const ArbitrationState& state) {
  const auto& bp = state.bp;
  switch (bp.mode) {
    case BackpressureMode::DrainBackward: {
      if (auto t = buffers.backward_ready().best(ChunkRule::HighFirst)) return Decision::execute(*t);
      return Decision::wait();
    }
    case BackpressureMode::FocusMicrobatch: {
      const TaskId t = bp.local_order_task(buffers.stage(), bp.focus_microbatch, bp.focus_position);
      return buffers.is_ready(t) ? Decision::execute(t) : Decision::wait();
    }
    case BackpressureMode::Normal:
      break;
  }
  const ScanOrder order = scan_order(hint, state.last_dispatched);
  for (std::size_t i = 0; i < order.size; ++i) {
    const auto& rule = order.rules[i];
    if (auto t = buffers.ready(rule.direction).best(rule.chunk_rule)) return Decision::execute(*t);
  }
  return Decision::wait();
}

CoordOutcome tp_coordinate(std::span<const std::optional<TaskId>> proposals) {
  if (proposals.empty() || !proposals.front()) return {};
  const TaskId& first = *proposals.front();
  for (const auto& p : proposals)
    if (!p || !(*p == first)) return {};
  return {true, first};
}

// ---------------------------------------------------------------------------
// StageController

StageController::StageController(const Workload& workload, int stage, HintOrder hint, int buffer_limit)
    : stage_(stage), hint_(std::move(hint)) {
  state_.bp = BackpressureState(buffer_limit, workload.num_chunks(), workload.num_microbatches());
}

void StageController::commit(const TaskId& t) {
  auto& bp = state_.bp;
  switch (t.direction) {
    case Direction::Forward:
      ++bp.n_f;
      ++bp.progress[static_cast<std::size_t>(t.microbatch)];
      state_.last_dispatched = Direction::Forward;
      break;
    case Direction::Backward:
      ++bp.n_b;
      ++bp.progress[static_cast<std::size_t>(t.microbatch)];
      state_.last_dispatched = Direction::Backward;
      break;
    case Direction::WeightUpdate:
      state_.last_dispatched.reset();
      break;
  }
  max_outstanding_ = std::max(max_outstanding_, bp.outstanding());
}

}  // namespace rrfp
