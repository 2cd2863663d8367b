#include "rrfp/engine.hpp"

#include <algorithm>
#include <queue>
#include <sstream>
#include <tuple>

#include "recorder.hpp"

namespace rrfp {

void TpGroup::validate() const {
  skew.validate("tp.skew");
  if (coord_cost < 0) throw InvalidArgument("tp.coord_cost must be non-negative");
}

void to_json(nlohmann::json& j, const TpGroup& g) { j = {{"skew", g.skew}, {"coord_cost", g.coord_cost}}; }

void from_json(const nlohmann::json& j, TpGroup& g) {
  g = TpGroup{};
  if (j.contains("skew")) g.skew = j.at("skew").get<Distribution>();
  if (j.contains("coord_cost")) g.coord_cost = j.at("coord_cost").get<Micros>();
}

namespace {

enum class EventClass : int { Completion = 0, SendComplete = 1, Arrival = 2, CoordEnd = 3 };

struct Event {
  Micros time;
  EventClass cls;
  int stage;
  int dir;
  int mb;
  int chunk;
  int rank;
  std::uint64_t seq;
  int payload;  // task index, edge index, or unused

  auto key() const { return std::tie(time, cls, stage, dir, mb, chunk, rank, seq); }
  bool operator>(const Event& o) const { return key() > o.key(); }
};

int dir_rank(Direction d) {
  // B < F < W at equal timestamps.
  switch (d) {
    case Direction::Backward:
      return 0;
    case Direction::Forward:
      return 1;
    case Direction::WeightUpdate:
      return 2;
  }
  return 3;
}

struct StageRuntime {
  bool busy = false;         // executing a task
  bool coordinating = false;
  bool parked = false;       // last round deferred; waiting for an arrival
  bool dirty = false;        // an arrival landed since the stage parked
  bool arrival_in_round = false;
  std::vector<std::optional<TaskId>> proposals;
};

class Engine {
 public:
  Engine(const Workload& w, const EngineOptions& o)
      : w_(w),
        opt_(o),
        graph_(w),
        N_(w.num_stages()),
        R_(w.tp_group_size()),
        rec_(make_header(), w.num_stages(), w.tp_group_size(), o.record_messages),
        jitter_(o.jitter, o.seed, w.num_stages()),
        skew_(StreamFactory(o.seed).key("tp-skew", {})) {
    buffers_.resize(static_cast<std::size_t>(N_));
    for (int s = 0; s < N_; ++s) {
      for (int r = 0; r < R_; ++r) buffers_[static_cast<std::size_t>(s)].emplace_back(w, graph_, s);
      ctl_.emplace_back(w, s, o.hint, o.buffer_limit);
    }
    stages_.resize(static_cast<std::size_t>(N_));
    max_events_ = o.max_events > 0 ? o.max_events
                                   : std::int64_t{64} * (w.num_tasks() + 1) * (R_ + 1) * (R_ + 1) + 1024;
  }

  RunResult run() {
    arbitration_pass();
    while (!queue_.empty()) {
      const Micros now = queue_.top().time;
      current_ = now;
      while (!queue_.empty() && queue_.top().time == now) {
        const Event e = queue_.top();
        queue_.pop();
        if (++processed_ > max_events_) throw WatchdogError("event limit exceeded", dump(now));
        handle(e);
      }
      arbitration_pass();
    }
    if (done_ != w_.num_tasks())
      throw WatchdogError("no pending events with " + std::to_string(w_.num_tasks() - done_) + " tasks unfinished",
                          dump(current_));

    Trace trace = rec_.finish(makespan_);
    Metrics m = metrics_from_trace(trace);
    for (int s = 0; s < N_; ++s) {
      auto& sm = m.stages[static_cast<std::size_t>(s)];
      for (const auto& b : buffers_[static_cast<std::size_t>(s)]) sm.max_occupancy.raise_to(b.max_occupancy());
      sm.max_outstanding = ctl_[static_cast<std::size_t>(s)].max_outstanding();
    }
    return {std::move(trace), std::move(m)};
  }

 private:
  TraceHeader make_header() const {
    TraceHeader h;
    h.scheduler = "rrfp-" + opt_.hint.name();
    h.num_stages = w_.num_stages();
    h.num_microbatches = w_.num_microbatches();
    h.num_chunks = w_.num_chunks();
    h.tp_group_size = w_.tp_group_size();
    h.seed = opt_.seed;
    return h;
  }

  void push(Micros time, EventClass cls, const TaskId& t, int rank, int payload) {
    queue_.push({time, cls, t.stage, dir_rank(t.direction), t.microbatch, t.chunk, rank, seq_++, payload});
  }

  StageBuffers& view(int stage, int rank) {
    return buffers_[static_cast<std::size_t>(stage)][static_cast<std::size_t>(rank)];
  }

  Micros rank_skew(int edge, int rank) const {
    if (R_ == 1 || opt_.tp.skew.is_zero()) return 0;
    Xoshiro256 rng(StreamFactory(skew_).key("edge", {edge, rank}));
    return std::max<Micros>(0, opt_.tp.skew.sample(rng));
  }

  void handle(const Event& e) {
    const Micros now = e.time;
    switch (e.cls) {
      case EventClass::Completion: {
        const TaskId t = w_.task_at(e.payload);
        auto& st = stages_[static_cast<std::size_t>(t.stage)];
        st.busy = false;
        ++done_;
        for (int r = 0; r < R_; ++r) view(t.stage, r).on_complete(t);
        for (const auto& link : graph_.successors(e.payload)) {
          const auto& edge = graph_.edges()[static_cast<std::size_t>(link.edge)];
          if (edge.is_local()) {
            for (int r = 0; r < R_; ++r) view(t.stage, r).on_input(edge, link.edge, now);
            continue;
          }
          const Micros base = now + graph_.edge_delay(link.edge);
          for (int r = 0; r < R_; ++r) {
            view(t.stage, r).on_send_start(t.direction);
            rec_.send(r, t, edge.to.stage, now, base);
            push(base, EventClass::SendComplete, t, r, 0);
            push(base + rank_skew(link.edge, r), EventClass::Arrival, edge.to, r, link.edge);
          }
        }
        break;
      }
      case EventClass::SendComplete:
        view(e.stage, e.rank).on_send_complete(e.dir == dir_rank(Direction::Forward) ? Direction::Forward
                                                                                      : Direction::Backward);
        break;
      case EventClass::Arrival: {
        const auto& edge = graph_.edges()[static_cast<std::size_t>(e.payload)];
        view(edge.to.stage, e.rank).on_input(edge, e.payload, now);
        rec_.recv(e.rank, edge.to, edge.from.stage, now);
        auto& st = stages_[static_cast<std::size_t>(edge.to.stage)];
        st.dirty = true;
        if (st.coordinating) st.arrival_in_round = true;
        break;
      }
      case EventClass::CoordEnd: {
        auto& st = stages_[static_cast<std::size_t>(e.stage)];
        st.coordinating = false;
        const CoordOutcome out = tp_coordinate(st.proposals);
        if (out.agreed) {
          dispatch(out.task, now);
        } else {
          ctl_[static_cast<std::size_t>(e.stage)].on_deferred();
          st.parked = true;
          st.dirty = st.arrival_in_round;
        }
        break;
      }
    }
  }

  void dispatch(const TaskId& t, Micros now) {
    auto& ctl = ctl_[static_cast<std::size_t>(t.stage)];
    ctl.commit(t);
    for (int r = 0; r < R_; ++r) view(t.stage, r).on_dispatch(t);
    const Micros lat = w_.latency(t);
    const Micros injected = jitter_.on_dispatch(t, lat);
    const Micros end = now + lat + injected;
    for (int r = 0; r < R_; ++r) rec_.exec(r, t, now, end, injected);
    makespan_ = std::max(makespan_, end);
    stages_[static_cast<std::size_t>(t.stage)].busy = true;
    push(end, EventClass::Completion, t, 0, w_.index(t));
  }

  void arbitration_pass() {
    for (int s = 0; s < N_; ++s) {
      auto& st = stages_[static_cast<std::size_t>(s)];
      if (st.busy || st.coordinating) continue;
      if (st.parked && !st.dirty) continue;
      auto& ctl = ctl_[static_cast<std::size_t>(s)];
      ctl.refresh_backpressure();
      if (R_ == 1) {
        const Decision d = ctl.decide(view(s, 0));
        if (!d.is_wait()) dispatch(d.task, queue_now());
        continue;
      }
      st.proposals.assign(static_cast<std::size_t>(R_), std::nullopt);
      bool any = false;
      for (int r = 0; r < R_; ++r) {
        const Decision d = ctl.decide(view(s, r));
        if (!d.is_wait()) {
          st.proposals[static_cast<std::size_t>(r)] = d.task;
          any = true;
        }
      }
      if (!any) continue;
      const CoordOutcome unanimous = tp_coordinate(st.proposals);
      if (unanimous.agreed && !is_collective_relevant(unanimous.task)) {
        st.parked = false;
        dispatch(unanimous.task, queue_now());
        continue;
      }
      // Metadata all-gather over the proposals.
      const Micros now = queue_now();
      const Micros end = now + opt_.tp.coord_cost;
      for (int r = 0; r < R_; ++r) {
        const auto& p = st.proposals[static_cast<std::size_t>(r)];
        rec_.coord(s, r, p ? &*p : nullptr, unanimous.agreed, now, end);
      }
      st.coordinating = true;
      st.parked = false;
      st.dirty = false;
      st.arrival_in_round = false;
      push(end, EventClass::CoordEnd, TaskId{s, 0, 0, Direction::Forward}, 0, 0);
    }
  }

  Micros queue_now() const { return current_; }

  std::string dump(Micros now) const {
    std::ostringstream os;
    os << "t=" << now << " done=" << done_ << "/" << w_.num_tasks() << "\n";
    for (int s = 0; s < N_; ++s) {
      const auto& st = stages_[static_cast<std::size_t>(s)];
      const auto& bp = ctl_[static_cast<std::size_t>(s)].state().bp;
      os << "stage " << s << ": busy=" << st.busy << " coordinating=" << st.coordinating << " parked=" << st.parked
         << " mode=" << to_string(bp.mode) << " n_f=" << bp.n_f << " n_b=" << bp.n_b;
      if (bp.mode == BackpressureMode::FocusMicrobatch)
        os << " focus=mb" << bp.focus_microbatch << "@" << bp.focus_position;
      os << "\n";
      for (int r = 0; r < R_; ++r)
        os << "  rank " << r << ": " << buffers_[static_cast<std::size_t>(s)][static_cast<std::size_t>(r)].describe()
           << "\n";
    }
    return os.str();
  }

  const Workload& w_;
  const EngineOptions& opt_;
  TaskGraph graph_;
  int N_, R_;
  detail::TraceRecorder rec_;
  JitterInjector jitter_;
  std::uint64_t skew_;
  std::vector<std::vector<StageBuffers>> buffers_;
  std::vector<StageController> ctl_;
  std::vector<StageRuntime> stages_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  std::int64_t processed_ = 0, max_events_ = 0;
  int done_ = 0;
  Micros current_ = 0, makespan_ = 0;
};

}  // namespace

RunResult run_rrfp(const Workload& workload, const EngineOptions& options) {
  workload.validate();
  options.jitter.validate();
  options.tp.validate();
  if (options.buffer_limit < 1) throw InvalidArgument("buffer_limit must be at least 1");
  Engine engine(workload, options);
  return engine.run();
}

RunResult run_rrfp(const Workload& workload, const HintOrder& hint, int buffer_limit, std::uint64_t seed) {
  EngineOptions o;
  o.hint = hint;
  o.buffer_limit = buffer_limit;
  o.seed = seed;
  return run_rrfp(workload, o);
}

}  // namespace rrfp
