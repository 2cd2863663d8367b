#pragma once

// Trace assembly shared by the single-threaded executors. Tracks the end of
// the last activity on every (stage, rank) lane so that idle gaps become
// block events and compute + block + coord tiles each lane exactly.

#include <vector>

#include "rrfp/trace.hpp"

namespace rrfp::detail {

class TraceRecorder {
 public:
  TraceRecorder(TraceHeader header, int num_stages, int ranks, bool record_messages)
      : ranks_(ranks),
        record_messages_(record_messages),
        idle_since_(static_cast<std::size_t>(num_stages) * static_cast<std::size_t>(ranks), 0) {
    trace_.header = std::move(header);
  }

  void exec(int rank, const TaskId& t, Micros start, Micros end, Micros injected) {
    close_gap(t.stage, rank, start);
    TraceEvent e{start, end, t.stage, rank, t.microbatch, t.chunk, t.direction, EventKind::Exec};
    e.injected = injected;
    trace_.events.push_back(e);
    lane(t.stage, rank) = end;
  }

  void coord(int stage, int rank, const TaskId* proposal, bool agreed, Micros start, Micros end) {
    close_gap(stage, rank, start);
    TraceEvent e{start, end, stage, rank};
    e.kind = EventKind::Coord;
    e.agreed = agreed;
    if (proposal != nullptr) {
      e.microbatch = proposal->microbatch;
      e.chunk = proposal->chunk;
      e.direction = proposal->direction;
    }
    trace_.events.push_back(e);
    lane(stage, rank) = end;
  }

  void send(int rank, const TaskId& from, int to_stage, Micros start, Micros end) {
    if (!record_messages_) return;
    TraceEvent e{start, end, from.stage, rank, from.microbatch, from.chunk, from.direction, EventKind::Send};
    e.peer = to_stage;
    trace_.events.push_back(e);
  }

  void recv(int rank, const TaskId& to, int from_stage, Micros at) {
    if (!record_messages_) return;
    TraceEvent e{at, at, to.stage, rank, to.microbatch, to.chunk, to.direction, EventKind::Recv};
    e.peer = from_stage;
    trace_.events.push_back(e);
  }

  /// Closes every lane with a trailing block up to `makespan` and returns the trace.
  Trace finish(Micros makespan) {
    const int stages = static_cast<int>(idle_since_.size()) / ranks_;
    for (int s = 0; s < stages; ++s)
      for (int r = 0; r < ranks_; ++r) close_gap(s, r, makespan);
    return std::move(trace_);
  }

 private:
  Micros& lane(int stage, int rank) {
    return idle_since_[static_cast<std::size_t>(stage) * static_cast<std::size_t>(ranks_) +
                       static_cast<std::size_t>(rank)];
  }

  void close_gap(int stage, int rank, Micros now) {
    Micros& since = lane(stage, rank);
    if (now > since) {
      TraceEvent e{since, now, stage, rank};
      e.kind = EventKind::Block;
      trace_.events.push_back(e);
      since = now;
    }
  }

  int ranks_;
  bool record_messages_;
  std::vector<Micros> idle_since_;
  Trace trace_;
};

}  // namespace rrfp::detail
