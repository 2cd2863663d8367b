#include "rrfp/live.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <queue>
#include <sstream>
#include <thread>

namespace rrfp {

namespace {

using Clock = std::chrono::steady_clock;

struct Message {
  Micros sent_at = 0;
  Micros deliver_base = 0;
  Micros deliver_at = 0;
  int edge = -1;
  std::uint64_t seq = 0;

  bool operator>(const Message& o) const { return std::tie(deliver_at, seq) > std::tie(o.deliver_at, o.seq); }
};

/// Fixed-capacity FIFO between a sender and a receiver.
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  bool push(Message m, const std::atomic<bool>& abort) {
    std::unique_lock lk(m_);
    not_full_.wait(lk, [&] { return items_.size() < capacity_ || abort.load(); });
    if (abort.load()) return false;
    items_.push_back(m);
    not_empty_.notify_one();
    return true;
  }

  std::optional<Message> pop(const std::atomic<bool>& abort) {
    std::unique_lock lk(m_);
    not_empty_.wait(lk, [&] { return !items_.empty() || abort.load(); });
    if (items_.empty()) return std::nullopt;
    Message m = items_.front();
    items_.pop_front();
    not_full_.notify_one();
    return m;
  }

  void wake() {
    std::lock_guard lk(m_);
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t size() {
    std::lock_guard lk(m_);
    return items_.size();
  }

 private:
  std::size_t capacity_;
  std::mutex m_;
  std::condition_variable not_full_, not_empty_;
  std::deque<Message> items_;
};

/// Sender-side queue ordered by delivery deadline.
struct Outbox {
  std::mutex m;
  std::condition_variable cv;
  std::priority_queue<Message, std::vector<Message>, std::greater<>> pending;
  bool closed = false;
};

enum class RoundKind { Agreed, Deferred, AllWait };

struct RoundResult {
  RoundKind kind = RoundKind::AllWait;
  TaskId task;
  bool coordinated = false;
  std::uint64_t min_epoch = 0;
};

/// Everything one stage shares between its ranks; all mutation under `m`.
struct StageState {
  std::mutex m;
  std::condition_variable cv;
  std::vector<StageBuffers> views;
  std::vector<StageController> ctl;
  std::vector<JitterInjector> jitter;
  std::uint64_t epoch = 0;  // bumped on every arrival
  // All-gather rendezvous.
  std::uint64_t round = 0;
  int arrived = 0;
  std::vector<std::optional<TaskId>> proposals;
  std::vector<std::uint64_t> epochs;
  RoundResult result;
};

class LiveRun {
 public:
  LiveRun(const Workload& w, const HintOrder& hint, int limit, Rational scale, const LiveOptions& o)
      : w_(w), o_(o), scale_(scale), graph_(w), N_(w.num_stages()), R_(w.tp_group_size()) {
    const std::size_t lanes = static_cast<std::size_t>(N_ * R_);
    stages_.reserve(static_cast<std::size_t>(N_));
    for (int s = 0; s < N_; ++s) {
      auto st = std::make_unique<StageState>();
      for (int r = 0; r < R_; ++r) {
        st->views.emplace_back(w, graph_, s);
        st->ctl.emplace_back(w, s, hint, limit);
        st->jitter.emplace_back(o.jitter, o.seed, N_);
      }
      st->proposals.resize(static_cast<std::size_t>(R_));
      st->epochs.resize(static_cast<std::size_t>(R_));
      stages_.push_back(std::move(st));
    }
    const auto capacity = static_cast<std::size_t>(limit + w.num_chunks());
    for (std::size_t i = 0; i < lanes; ++i) {
      outboxes_.push_back(std::make_unique<Outbox>());
      inboxes_.push_back(std::make_unique<BoundedQueue>(capacity));
    }
    lanes_.resize(lanes);
    expected_inbound_.assign(static_cast<std::size_t>(N_), 0);
    for (const auto& e : graph_.edges())
      if (!e.is_local()) ++expected_inbound_[static_cast<std::size_t>(e.to.stage)];
    skew_root_ = StreamFactory(o.seed).key("tp-skew", {});
    header_.wall_clock = true;
    header_.scheduler = "live-" + hint.name();
    header_.num_stages = N_;
    header_.num_microbatches = w.num_microbatches();
    header_.num_chunks = w.num_chunks();
    header_.tp_group_size = R_;
    header_.seed = o.seed;
    header_.time_scale = scale;
  }

  RunResult run() {
    t0_ = Clock::now();
    std::vector<std::thread> threads;
    for (int s = 0; s < N_; ++s) {
      for (int r = 0; r < R_; ++r) {
        threads.emplace_back([this, s, r] { compute_loop(s, r); });
        threads.emplace_back([this, s, r] { sender_loop(s, r); });
        threads.emplace_back([this, s, r] { receiver_loop(s, r); });
      }
    }
    const std::int64_t total = static_cast<std::int64_t>(w_.num_tasks()) * R_;
    const auto window = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(o_.watchdog_secs));
    bool fired = false;
    {
      std::unique_lock lk(progress_m_);
      std::int64_t seen = -1;
      while (completed_ < total) {
        if (completed_ != seen) {
          seen = completed_;
          continue_wait_until_ = Clock::now() + window;
        }
        if (progress_cv_.wait_until(lk, continue_wait_until_) == std::cv_status::timeout && completed_ == seen) {
          fired = true;
          break;
        }
      }
    }
    std::string dump;
    if (fired) {
      dump = describe();
      abort_.store(true);
      wake_all();
    }
    for (auto& t : threads) t.join();
    if (fired)
      throw WatchdogError("live watchdog fired after " + std::to_string(o_.watchdog_secs) + "s without progress",
                          dump);
    if (failure_) std::rethrow_exception(failure_);
    return assemble();
  }

 private:
  Micros now_us() const {
    return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0_).count();
  }
  Clock::time_point at(Micros us) const { return t0_ + std::chrono::microseconds(us); }
  Micros to_wall(Micros v) const { return scale_.scale_floor(v); }

  std::size_t lane(int s, int r) const { return static_cast<std::size_t>(s * R_ + r); }

  void wait_until_us(Micros deadline) const {
    const Micros coarse = deadline - o_.spin_window;
    if (coarse > now_us()) std::this_thread::sleep_until(at(coarse));
    while (now_us() < deadline) std::this_thread::yield();
  }

  void wake_all() {
    for (auto& st : stages_) {
      std::lock_guard lk(st->m);
      st->cv.notify_all();
    }
    for (auto& ob : outboxes_) {
      std::lock_guard lk(ob->m);
      ob->cv.notify_all();
    }
    for (auto& q : inboxes_) q->wake();
  }

  void fail(std::exception_ptr e) {
    {
      std::lock_guard lk(progress_m_);
      if (!failure_) failure_ = e;
    }
    abort_.store(true);
    wake_all();
    std::lock_guard lk(progress_m_);
    completed_ = std::numeric_limits<std::int64_t>::max() / 2;
    progress_cv_.notify_all();
  }

  Micros rank_skew(int edge, int rank) const {
    if (R_ == 1 || o_.tp.skew.is_zero()) return 0;
    Xoshiro256 rng(StreamFactory(skew_root_).key("edge", {edge, rank}));
    return std::max<Micros>(0, o_.tp.skew.sample(rng));
  }

  void record(int s, int r, const TraceEvent& e) { lanes_[lane(s, r)].push_back(e); }

  void compute_loop(int s, int r) try {
    StageState& st = *stages_[static_cast<std::size_t>(s)];
    const auto ri = static_cast<std::size_t>(r);
    int done = 0;
    while (done < w_.tasks_per_stage() && !abort_.load()) {
      std::unique_lock lk(st.m);
      const Micros entry = now_us();
      st.ctl[ri].refresh_backpressure();
      const Decision d = st.ctl[ri].decide(st.views[ri]);
      st.proposals[ri] = d.is_wait() ? std::nullopt : std::optional<TaskId>(d.task);
      st.epochs[ri] = st.epoch;
      const std::uint64_t my_round = st.round;
      if (++st.arrived == R_) {
        RoundResult res;
        res.min_epoch = *std::min_element(st.epochs.begin(), st.epochs.end());
        const bool any = std::any_of(st.proposals.begin(), st.proposals.end(), [](const auto& p) { return p; });
        const CoordOutcome out = tp_coordinate(st.proposals);
        if (out.agreed) {
          res.kind = RoundKind::Agreed;
          res.task = out.task;
          res.coordinated = R_ > 1 && is_collective_relevant(out.task);
        } else {
          res.kind = any ? RoundKind::Deferred : RoundKind::AllWait;
          res.coordinated = any;
        }
        st.result = res;
        st.arrived = 0;
        ++st.round;
        st.cv.notify_all();
      } else {
        st.cv.wait(lk, [&] { return st.round != my_round || abort_.load(); });
        if (abort_.load()) return;
      }
      const RoundResult res = st.result;

      if (res.coordinated) {
        lk.unlock();
        wait_until_us(now_us() + to_wall(o_.tp.coord_cost));
        TraceEvent ev{entry, now_us(), s, r};
        ev.kind = EventKind::Coord;
        ev.agreed = res.kind == RoundKind::Agreed;
        if (d.kind == Decision::Kind::Execute) {
          ev.microbatch = d.task.microbatch;
          ev.chunk = d.task.chunk;
          ev.direction = d.task.direction;
        }
        record(s, r, ev);
        lk.lock();
      }
      if (res.kind != RoundKind::Agreed) {
        if (res.kind == RoundKind::Deferred) st.ctl[ri].on_deferred();
        st.cv.wait(lk, [&] { return st.epoch > res.min_epoch || abort_.load(); });
        continue;
      }

      const TaskId t = res.task;
      st.ctl[ri].commit(t);
      st.views[ri].on_dispatch(t);
      const Micros lat = w_.latency(t);
      const Micros injected = st.jitter[ri].on_dispatch(t, lat);
      lk.unlock();

      const Micros start = now_us();
      wait_until_us(start + to_wall(lat + injected));
      const Micros end = now_us();
      TraceEvent ev{start, end, s, r, t.microbatch, t.chunk, t.direction, EventKind::Exec};
      ev.injected = injected;
      record(s, r, ev);

      lk.lock();
      st.views[ri].on_complete(t);
      const int idx = w_.index(t);
      std::vector<Message> out;
      for (const auto& link : graph_.successors(idx)) {
        const auto& edge = graph_.edges()[static_cast<std::size_t>(link.edge)];
        if (edge.is_local()) {
          st.views[ri].on_input(edge, link.edge, end);
          continue;
        }
        st.views[ri].on_send_start(t.direction);
        Message m;
        m.sent_at = end;
        m.deliver_base = end + to_wall(graph_.edge_delay(link.edge));
        m.deliver_at = m.deliver_base + to_wall(rank_skew(link.edge, r));
        m.edge = link.edge;
        out.push_back(m);
      }
      lk.unlock();
      if (!out.empty()) {
        Outbox& ob = *outboxes_[lane(s, r)];
        std::lock_guard olk(ob.m);
        for (auto& m : out) {
          m.seq = ob_seq_.fetch_add(1);
          ob.pending.push(m);
        }
        ob.cv.notify_all();
      }
      ++done;
      std::lock_guard plk(progress_m_);
      ++completed_;
      progress_cv_.notify_all();
    }
    Outbox& ob = *outboxes_[lane(s, r)];
    std::lock_guard olk(ob.m);
    ob.closed = true;
    ob.cv.notify_all();
  } catch (...) {
    fail(std::current_exception());
  }

  void sender_loop(int s, int r) try {
    Outbox& ob = *outboxes_[lane(s, r)];
    StageState& st = *stages_[static_cast<std::size_t>(s)];
    for (;;) {
      std::unique_lock lk(ob.m);
      ob.cv.wait(lk, [&] { return !ob.pending.empty() || ob.closed || abort_.load(); });
      if (abort_.load() || (ob.pending.empty() && ob.closed)) return;
      const Micros due = ob.pending.top().deliver_at;
      if (now_us() < due) {
        ob.cv.wait_until(lk, at(due));
        continue;  // an earlier message may have been queued meanwhile
      }
      const Message m = ob.pending.top();
      ob.pending.pop();
      lk.unlock();

      const auto& edge = graph_.edges()[static_cast<std::size_t>(m.edge)];
      {
        std::lock_guard slk(st.m);
        st.views[static_cast<std::size_t>(r)].on_send_complete(edge.from.direction);
      }
      if (o_.record_messages) {
        TraceEvent e{m.sent_at, m.deliver_base, s, r, edge.from.microbatch, edge.from.chunk, edge.from.direction,
                     EventKind::Send};
        e.peer = edge.to.stage;
        sink(e);
      }
      if (!inboxes_[lane(edge.to.stage, r)]->push(m, abort_)) return;
    }
  } catch (...) {
    fail(std::current_exception());
  }

  void receiver_loop(int s, int r) try {
    StageState& st = *stages_[static_cast<std::size_t>(s)];
    BoundedQueue& q = *inboxes_[lane(s, r)];
    for (int got = 0; got < expected_inbound_[static_cast<std::size_t>(s)]; ++got) {
      const auto m = q.pop(abort_);
      if (!m) return;
      const auto& edge = graph_.edges()[static_cast<std::size_t>(m->edge)];
      Micros now = 0;
      {
        std::lock_guard lk(st.m);
        now = now_us();
        st.views[static_cast<std::size_t>(r)].on_input(edge, m->edge, now);
        ++st.epoch;
        st.cv.notify_all();
      }
      if (o_.record_messages) {
        TraceEvent e{now, now, s, r, edge.to.microbatch, edge.to.chunk, edge.to.direction, EventKind::Recv};
        e.peer = edge.from.stage;
        sink(e);
      }
    }
  } catch (...) {
    fail(std::current_exception());
  }

  void sink(const TraceEvent& e) {
    std::lock_guard lk(sink_m_);
    messages_.push_back(e);
  }

  std::string describe() {
    std::ostringstream os;
    os << "t=" << now_us() << "us completed=" << completed_ << "/" << std::int64_t{w_.num_tasks()} * R_ << "\n";
    for (int s = 0; s < N_; ++s) {
      StageState& st = *stages_[static_cast<std::size_t>(s)];
      std::unique_lock lk(st.m, std::try_to_lock);
      os << "stage " << s << (lk.owns_lock() ? "" : " (lock busy)") << ": round=" << st.round
         << " arrived=" << st.arrived << " epoch=" << st.epoch << "\n";
      for (int r = 0; r < R_; ++r) {
        const auto& bp = st.ctl[static_cast<std::size_t>(r)].state().bp;
        os << "  rank " << r << ": mode=" << to_string(bp.mode) << " n_f=" << bp.n_f << " n_b=" << bp.n_b << " "
           << st.views[static_cast<std::size_t>(r)].describe() << " inbox=" << inboxes_[lane(s, r)]->size();
        Outbox& ob = *outboxes_[lane(s, r)];
        std::unique_lock olk(ob.m, std::try_to_lock);
        if (olk.owns_lock()) os << " outbox=" << ob.pending.size() << (ob.closed ? " closed" : "");
        os << "\n";
      }
    }
    return os.str();
  }

  RunResult assemble() {
    Trace trace;
    trace.header = header_;
    Micros makespan = 0;
    for (const auto& l : lanes_)
      for (const auto& e : l)
        if (e.kind == EventKind::Exec) makespan = std::max(makespan, e.t_end);
    for (int s = 0; s < N_; ++s) {
      for (int r = 0; r < R_; ++r) {
        auto events = lanes_[lane(s, r)];
        std::sort(events.begin(), events.end(),
                  [](const TraceEvent& a, const TraceEvent& b) { return a.t_start < b.t_start; });
        Micros since = 0;
        for (const auto& e : events) {
          if (e.t_start > since) {
            TraceEvent b{since, e.t_start, s, r};
            b.kind = EventKind::Block;
            trace.events.push_back(b);
          }
          trace.events.push_back(e);
          since = std::max(since, e.t_end);
        }
        if (makespan > since) {
          TraceEvent b{since, makespan, s, r};
          b.kind = EventKind::Block;
          trace.events.push_back(b);
        }
      }
    }
    std::sort(messages_.begin(), messages_.end(), [](const TraceEvent& a, const TraceEvent& b) {
      return std::tie(a.t_start, a.stage, a.rank) < std::tie(b.t_start, b.stage, b.rank);
    });
    trace.events.insert(trace.events.end(), messages_.begin(), messages_.end());
    Metrics m = metrics_from_trace(trace);
    for (int s = 0; s < N_; ++s) {
      auto& sm = m.stages[static_cast<std::size_t>(s)];
      const StageState& st = *stages_[static_cast<std::size_t>(s)];
      for (const auto& v : st.views) sm.max_occupancy.raise_to(v.max_occupancy());
      for (const auto& c : st.ctl) sm.max_outstanding = std::max(sm.max_outstanding, c.max_outstanding());
    }
    return {std::move(trace), std::move(m)};
  }

  const Workload& w_;
  const LiveOptions& o_;
  Rational scale_;
  TaskGraph graph_;
  int N_, R_;
  TraceHeader header_;
  std::uint64_t skew_root_ = 0;
  Clock::time_point t0_;

  std::vector<std::unique_ptr<StageState>> stages_;
  std::vector<std::unique_ptr<Outbox>> outboxes_;
  std::vector<std::unique_ptr<BoundedQueue>> inboxes_;
  std::vector<int> expected_inbound_;
  std::vector<std::vector<TraceEvent>> lanes_;  // exec and coord events, one writer each
  std::atomic<std::uint64_t> ob_seq_{0};

  std::mutex sink_m_;
  std::vector<TraceEvent> messages_;

  std::mutex progress_m_;
  std::condition_variable progress_cv_;
  Clock::time_point continue_wait_until_;
  std::int64_t completed_ = 0;
  std::exception_ptr failure_;
  std::atomic<bool> abort_{false};
};

}  // namespace

RunResult run_live(const Workload& workload, const HintOrder& hint, int buffer_limit, Rational time_scale,
                   const LiveOptions& options) {
  workload.validate();
  options.jitter.validate();
  options.tp.validate();
  if (buffer_limit < 1) throw InvalidArgument("buffer_limit must be at least 1");
  if (time_scale.num <= 0 || time_scale.den <= 0) throw InvalidArgument("time_scale must be positive");
  if (options.watchdog_secs <= 0) throw InvalidArgument("watchdog_secs must be positive");
  LiveRun run(workload, hint, buffer_limit, time_scale, options);
  return run.run();
}

}  // namespace rrfp
