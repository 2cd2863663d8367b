#include "rrfp/fixed_schedule.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

#include "recorder.hpp"

namespace rrfp {

void FixedSchedule::validate(const Workload& workload) const {
  if (static_cast<int>(per_stage_order.size()) != workload.num_stages())
    throw InvalidArgument("schedule must list one order per stage");
  for (int s = 0; s < workload.num_stages(); ++s) {
    const auto& order = per_stage_order[static_cast<std::size_t>(s)];
    std::set<int> seen;
    for (const auto& t : order) {
      if (!workload.contains(t) || t.stage != s)
        throw InvalidArgument("stage " + std::to_string(s) + " lists foreign task " + to_string(t));
      if (!seen.insert(workload.index(t)).second)
        throw InvalidArgument("stage " + std::to_string(s) + " lists " + to_string(t) + " twice");
    }
    if (static_cast<int>(order.size()) != workload.tasks_per_stage())
      throw InvalidArgument("stage " + std::to_string(s) + " does not list all of its tasks");
  }
}

FixedSchedule build_1f1b_schedule(const Workload& w) {
  w.validate();
  if (w.num_chunks() != 1) throw InvalidArgument("1F1B baseline supports only non-interleaved workloads (C = 1)");
  if (w.decompose_backward()) throw InvalidArgument("1F1B baseline does not support backward decomposition");
  const int N = w.num_stages(), M = w.num_microbatches();
  FixedSchedule sched;
  for (int s = 0; s < N; ++s) {
    std::vector<TaskId> order;
    const int warmup = std::min(M, N - 1 - s);
    int next_f = 0, next_b = 0;
    for (; next_f < warmup; ++next_f) order.push_back({s, next_f, 0, Direction::Forward});
    while (next_f < M) {
      order.push_back({s, next_f++, 0, Direction::Forward});
      order.push_back({s, next_b++, 0, Direction::Backward});
    }
    while (next_b < M) order.push_back({s, next_b++, 0, Direction::Backward});
    sched.per_stage_order.push_back(std::move(order));
  }
  return sched;
}

ScheduleDeadlock::ScheduleDeadlock(std::vector<int> cycle, const std::string& detail)
    : std::runtime_error("schedule deadlock: " + detail), cycle_(std::move(cycle)) {}

Trace run_fixed(const FixedSchedule& schedule, const Workload& w, const FixedRunOptions& options) {
  w.validate();
  schedule.validate(w);
  options.jitter.validate();
  const TaskGraph graph(w);
  const int N = w.num_stages(), R = w.tp_group_size();
  constexpr Micros kNotDone = std::numeric_limits<Micros>::min();

  TraceHeader header;
  header.scheduler = options.scheduler_name;
  header.num_stages = N;
  header.num_microbatches = w.num_microbatches();
  header.num_chunks = w.num_chunks();
  header.tp_group_size = R;
  header.seed = options.seed;
  detail::TraceRecorder rec(header, N, R, options.record_messages);
  JitterInjector jitter(options.jitter, options.seed, N);

  std::vector<Micros> end_time(static_cast<std::size_t>(w.num_tasks()), kNotDone);
  std::vector<std::size_t> head(static_cast<std::size_t>(N), 0);
  std::vector<Micros> stage_free(static_cast<std::size_t>(N), 0);
  int remaining = w.num_tasks();
  Micros makespan = 0;

  auto head_ready = [&](int s, Micros& start) {
    const auto& order = schedule.per_stage_order[static_cast<std::size_t>(s)];
    const int idx = w.index(order[head[static_cast<std::size_t>(s)]]);
    start = stage_free[static_cast<std::size_t>(s)];
    for (const auto& p : graph.predecessors(idx)) {
      const Micros e = end_time[static_cast<std::size_t>(p.task)];
      if (e == kNotDone) return false;
      start = std::max(start, e + graph.edge_delay(p.edge));
    }
    return true;
  };

  bool progress = true;
  while (remaining > 0 && progress) {
    progress = false;
    for (int s = 0; s < N; ++s) {
      const auto& order = schedule.per_stage_order[static_cast<std::size_t>(s)];
      Micros start = 0;
      while (head[static_cast<std::size_t>(s)] < order.size() && head_ready(s, start)) {
        const TaskId t = order[head[static_cast<std::size_t>(s)]++];
        const int idx = w.index(t);
        const Micros lat = w.latency(t);
        const Micros injected = jitter.on_dispatch(t, lat);
        const Micros end = start + lat + injected;
        for (int r = 0; r < R; ++r) rec.exec(r, t, start, end, injected);
        end_time[static_cast<std::size_t>(idx)] = end;
        stage_free[static_cast<std::size_t>(s)] = end;
        makespan = std::max(makespan, end);
        for (const auto& succ : graph.successors(idx)) {
          const auto& edge = graph.edges()[static_cast<std::size_t>(succ.edge)];
          if (edge.is_local()) continue;
          const Micros arrive = end + graph.edge_delay(succ.edge);
          for (int r = 0; r < R; ++r) {
            rec.send(r, t, edge.to.stage, end, arrive);
            rec.recv(r, edge.to, t.stage, arrive);
          }
        }
        --remaining;
        progress = true;
      }
    }
  }

  if (remaining > 0) {
    // Each stuck head waits on the owner of its first unfinished predecessor.
    std::vector<int> waits_on(static_cast<std::size_t>(N), -1);
    std::vector<std::string> why(static_cast<std::size_t>(N));
    for (int s = 0; s < N; ++s) {
      const auto& order = schedule.per_stage_order[static_cast<std::size_t>(s)];
      if (head[static_cast<std::size_t>(s)] >= order.size()) continue;
      const TaskId t = order[head[static_cast<std::size_t>(s)]];
      for (const auto& p : graph.predecessors(w.index(t))) {
        if (end_time[static_cast<std::size_t>(p.task)] == kNotDone) {
          const TaskId pt = w.task_at(p.task);
          waits_on[static_cast<std::size_t>(s)] = pt.stage;
          why[static_cast<std::size_t>(s)] = "stage " + std::to_string(s) + " head " + to_string(t) +
                                             " waits on " + to_string(pt);
          break;
        }
      }
    }
    int start = 0;
    while (waits_on[static_cast<std::size_t>(start)] < 0) ++start;
    std::vector<int> path;
    std::vector<int> pos(static_cast<std::size_t>(N), -1);
    int cur = start;
    while (cur >= 0 && pos[static_cast<std::size_t>(cur)] < 0) {
      pos[static_cast<std::size_t>(cur)] = static_cast<int>(path.size());
      path.push_back(cur);
      cur = waits_on[static_cast<std::size_t>(cur)];
    }
    std::vector<int> cycle;
    if (cur >= 0) cycle.assign(path.begin() + pos[static_cast<std::size_t>(cur)], path.end());
    std::ostringstream os;
    os << "waiting cycle over stages [";
    for (std::size_t i = 0; i < cycle.size(); ++i) os << (i ? "," : "") << cycle[i];
    os << "]";
    for (int s : cycle) os << "; " << why[static_cast<std::size_t>(s)];
    throw ScheduleDeadlock(std::move(cycle), os.str());
  }
  return rec.finish(makespan);
}

namespace {

void require_analytic(const Workload& w) {
  w.validate();
  if (w.num_chunks() != 1) throw InvalidArgument("reference makespans require a non-interleaved workload");
  if (!w.comm_delay().is_zero()) throw InvalidArgument("reference makespans require zero communication delay");
}

}  // namespace

Micros forward_only_makespan(const Workload& w) {
  require_analytic(w);
  const int N = w.num_stages(), M = w.num_microbatches();
  // end[i][j] = max(end[i-1][j], end[i][j-1]) + F_i^j
  std::vector<Micros> prev_stage(static_cast<std::size_t>(M), 0), cur(static_cast<std::size_t>(M), 0);
  for (int i = 0; i < N; ++i) {
    Micros left = 0;
    for (int j = 0; j < M; ++j) {
      const Micros start = std::max(i > 0 ? prev_stage[static_cast<std::size_t>(j)] : 0, left);
      left = cur[static_cast<std::size_t>(j)] = start + w.forward_time(i, 0, j);
    }
    std::swap(prev_stage, cur);
  }
  return prev_stage[static_cast<std::size_t>(M - 1)];
}

Micros backward_only_makespan(const Workload& w) {
  require_analytic(w);
  const int N = w.num_stages(), M = w.num_microbatches();
  std::vector<Micros> next_stage(static_cast<std::size_t>(M), 0), cur(static_cast<std::size_t>(M), 0);
  for (int i = N - 1; i >= 0; --i) {
    Micros left = 0;
    for (int j = 0; j < M; ++j) {
      const Micros start = std::max(i < N - 1 ? next_stage[static_cast<std::size_t>(j)] : 0, left);
      left = cur[static_cast<std::size_t>(j)] = start + w.backward_time(i, 0, j);
    }
    std::swap(next_stage, cur);
  }
  return next_stage[static_cast<std::size_t>(M - 1)];
}

void to_json(nlohmann::json& j, const FixedSchedule& s) {
  j = nlohmann::json::object();
  j["per_stage_order"] = nlohmann::json::array();
  for (const auto& order : s.per_stage_order) j["per_stage_order"].push_back(order);
}

void from_json(const nlohmann::json& j, FixedSchedule& s) {
  s.per_stage_order = j.at("per_stage_order").get<std::vector<std::vector<TaskId>>>();
}

}  // namespace rrfp
