#include "rrfp/trace.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace rrfp {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Exec:
      return "exec";
    case EventKind::Send:
      return "send";
    case EventKind::Recv:
      return "recv";
    case EventKind::Coord:
      return "coord";
    case EventKind::Block:
      return "block";
  }
  return "?";
}

EventKind event_kind_from_string(std::string_view s) {
  if (s == "exec") return EventKind::Exec;
  if (s == "send") return EventKind::Send;
  if (s == "recv") return EventKind::Recv;
  if (s == "coord") return EventKind::Coord;
  if (s == "block") return EventKind::Block;
  throw InvalidArgument("unknown event kind '" + std::string(s) + "'");
}

Micros Trace::makespan() const {
  Micros m = 0;
  for (const auto& e : events)
    if (e.kind == EventKind::Exec) m = std::max(m, e.t_end);
  return m;
}

std::vector<TraceEvent> Trace::exec_events() const {
  std::vector<TraceEvent> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out),
               [](const TraceEvent& e) { return e.kind == EventKind::Exec; });
  return out;
}

void to_json(nlohmann::json& j, const TraceEvent& e) {
  j = {{"t_start", e.t_start},
       {"t_end", e.t_end},
       {"stage", e.stage},
       {"rank", e.rank},
       {"microbatch", e.microbatch},
       {"chunk", e.chunk},
       {"direction", e.has_task() ? std::string(1, direction_letter(e.direction)) : std::string("-")},
       {"event_kind", std::string(to_string(e.kind))}};
  if (e.kind == EventKind::Exec) j["injected"] = e.injected;
  if (e.kind == EventKind::Send || e.kind == EventKind::Recv) j["peer"] = e.peer;
  if (e.kind == EventKind::Coord) j["agreed"] = e.agreed;
}

void from_json(const nlohmann::json& j, TraceEvent& e) {
  e = TraceEvent{};
  e.t_start = j.at("t_start").get<Micros>();
  e.t_end = j.at("t_end").get<Micros>();
  e.stage = j.at("stage").get<int>();
  e.rank = j.value("rank", 0);
  e.microbatch = j.value("microbatch", -1);
  e.chunk = j.value("chunk", -1);
  const auto dir = j.value("direction", std::string("-"));
  if (dir != "-") e.direction = direction_from_string(dir);
  e.kind = event_kind_from_string(j.at("event_kind").get<std::string>());
  e.injected = j.value("injected", Micros{0});
  e.peer = j.value("peer", -1);
  e.agreed = j.value("agreed", false);
}

void to_json(nlohmann::json& j, const TraceHeader& h) {
  j = {{"header", true},
       {"wall_clock", h.wall_clock},
       {"scheduler", h.scheduler},
       {"num_stages", h.num_stages},
       {"num_microbatches", h.num_microbatches},
       {"num_chunks", h.num_chunks},
       {"tp_group_size", h.tp_group_size},
       {"seed", h.seed},
       {"time_scale", h.time_scale},
       {"time_unit", "us"}};
}

void from_json(const nlohmann::json& j, TraceHeader& h) {
  h.wall_clock = j.value("wall_clock", false);
  h.scheduler = j.value("scheduler", std::string());
  h.num_stages = j.value("num_stages", 0);
  h.num_microbatches = j.value("num_microbatches", 0);
  h.num_chunks = j.value("num_chunks", 0);
  h.tp_group_size = j.value("tp_group_size", 1);
  h.seed = j.value("seed", std::uint64_t{0});
  h.time_scale = j.contains("time_scale") ? j.at("time_scale").get<Rational>() : Rational{1, 1};
}

void write_jsonl(std::ostream& os, const Trace& trace) {
  os << nlohmann::json(trace.header).dump() << '\n';
  for (const auto& e : trace.events) os << nlohmann::json(e).dump() << '\n';
}

std::string to_jsonl(const Trace& trace) {
  std::ostringstream os;
  write_jsonl(os, trace);
  return os.str();
}

Trace read_jsonl(std::istream& is) {
  Trace t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (first && j.value("header", false)) {
      t.header = j.get<TraceHeader>();
    } else {
      t.events.push_back(j.get<TraceEvent>());
    }
    first = false;
  }
  return t;
}

std::string_view to_string(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::Precedence:
      return "precedence";
    case Violation::Kind::Serialization:
      return "serialization";
    case Violation::Kind::Completeness:
      return "completeness";
    case Violation::Kind::Duration:
      return "duration";
    case Violation::Kind::Malformed:
      return "malformed";
  }
  return "?";
}

std::size_t ValidationReport::count(Violation::Kind k) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; }));
}

std::string ValidationReport::summary(std::size_t max_lines) const {
  if (ok()) return "valid";
  std::ostringstream os;
  os << violations.size() << " violation(s)";
  for (std::size_t i = 0; i < violations.size() && i < max_lines; ++i) {
    os << "\n  [" << to_string(violations[i].kind) << "] " << violations[i].message;
  }
  return os.str();
}

std::string gantt_csv(const Trace& trace) {
  std::ostringstream os;
  os << "stage,rank,microbatch,chunk,direction,start,end,injected\n";
  for (const auto& e : trace.events) {
    if (e.kind != EventKind::Exec) continue;
    os << e.stage << "," << e.rank << "," << e.microbatch << "," << e.chunk << "," << direction_letter(e.direction)
       << "," << e.t_start << "," << e.t_end << "," << e.injected << "\n";
  }
  return os.str();
}

std::vector<TraceEvent> read_gantt_csv(std::istream& is) {
  std::vector<TraceEvent> out;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[8];
    for (auto& field : f) std::getline(ss, field, ',');
    TraceEvent e;
    e.kind = EventKind::Exec;
    e.stage = std::stoi(f[0]);
    e.rank = std::stoi(f[1]);
    e.microbatch = std::stoi(f[2]);
    e.chunk = std::stoi(f[3]);
    e.direction = direction_from_string(f[4]);
    e.t_start = std::stoll(f[5]);
    e.t_end = std::stoll(f[6]);
    e.injected = std::stoll(f[7]);
    out.push_back(e);
  }
  return out;
}

ValidationReport validate_trace(const Trace& trace, const Workload& workload,
                                const ValidationOptions& options) {
  ValidationReport report;
  auto add = [&](Violation::Kind k, std::string msg, std::vector<TaskId> tasks = {},
                 std::optional<EdgeKind> edge = std::nullopt) {
    report.violations.push_back({k, std::move(msg), std::move(tasks), edge});
  };

  const bool wall = trace.header.wall_clock;
  const Rational scale = wall ? trace.header.time_scale : Rational{1, 1};
  auto to_wall_floor = [&](Micros v) {
    return static_cast<Micros>(static_cast<__int128>(v) * scale.num / scale.den);
  };

  const int R = workload.tp_group_size();
  const auto n = static_cast<std::size_t>(workload.num_tasks());
  struct Slot {
    Micros start = 0, end = 0;
    bool seen = false;
  };
  std::vector<Slot> slots(n * static_cast<std::size_t>(R));
  std::map<std::pair<int, int>, std::vector<std::size_t>> per_lane;  // (stage, rank) -> event indices

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& e = trace.events[i];
    if (e.t_end < e.t_start) {
      add(Violation::Kind::Malformed,
          std::string(to_string(e.kind)) + " event ends before it starts (" + std::to_string(e.t_start) +
              " > " + std::to_string(e.t_end) + ")",
          e.has_task() && workload.contains(e.task()) ? std::vector<TaskId>{e.task()} : std::vector<TaskId>{});
      continue;
    }
    if (e.kind != EventKind::Exec) continue;
    const TaskId t = e.task();
    if (!workload.contains(t) || e.rank < 0 || e.rank >= R) {
      add(Violation::Kind::Malformed,
          "unknown task " + to_string(t) + " on rank " + std::to_string(e.rank));
      continue;
    }
    auto& slot = slots[static_cast<std::size_t>(workload.index(t)) * static_cast<std::size_t>(R) +
                       static_cast<std::size_t>(e.rank)];
    if (slot.seen) {
      add(Violation::Kind::Completeness,
          to_string(t) + " executed more than once on rank " + std::to_string(e.rank), {t});
      continue;
    }
    slot = {e.t_start, e.t_end, true};
    per_lane[{e.stage, e.rank}].push_back(i);

    const Micros nominal = workload.latency(t) + e.injected;
    const Micros actual = e.t_end - e.t_start;
    if (!wall) {
      if (actual != nominal) {
        add(Violation::Kind::Duration,
            to_string(t) + " ran " + std::to_string(actual) + "us, expected " + std::to_string(nominal), {t});
      }
    } else {
      const Micros expected = to_wall_floor(nominal);
      if (actual + 1 < expected || actual > expected + options.duration_tolerance) {
        add(Violation::Kind::Duration,
            to_string(t) + " ran " + std::to_string(actual) + "us wall, expected " + std::to_string(expected) +
                " (+" + std::to_string(options.duration_tolerance) + ")",
            {t});
      }
    }
  }

  for (std::size_t idx = 0; idx < n; ++idx) {
    for (int r = 0; r < R; ++r) {
      if (!slots[idx * static_cast<std::size_t>(R) + static_cast<std::size_t>(r)].seen) {
        const TaskId t = workload.task_at(static_cast<int>(idx));
        add(Violation::Kind::Completeness, to_string(t) + " never executed on rank " + std::to_string(r), {t});
      }
    }
  }

  for (const auto& edge : build_task_graph(workload)) {
    const Micros delay = edge.is_local() ? 0 : to_wall_floor(workload.comm_delay().delay(edge.from, edge.to));
    const auto from = static_cast<std::size_t>(workload.index(edge.from));
    const auto to = static_cast<std::size_t>(workload.index(edge.to));
    for (int r = 0; r < R; ++r) {
      const auto& u = slots[from * static_cast<std::size_t>(R) + static_cast<std::size_t>(r)];
      const auto& v = slots[to * static_cast<std::size_t>(R) + static_cast<std::size_t>(r)];
      if (!u.seen || !v.seen) continue;
      if (v.start < u.end + delay) {
        add(Violation::Kind::Precedence,
            to_string(edge.to) + " started at " + std::to_string(v.start) + " before " + to_string(edge.from) +
                " ended at " + std::to_string(u.end) + " + delay " + std::to_string(delay) + " [" +
                std::string(to_string(edge.kind)) + "]",
            {edge.from, edge.to}, edge.kind);
      }
    }
  }

  for (auto& [lane, indices] : per_lane) {
    std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
      const auto& ea = trace.events[a];
      const auto& eb = trace.events[b];
      return std::pair(ea.t_start, ea.t_end) < std::pair(eb.t_start, eb.t_end);
    });
    std::size_t latest = 0;  // position of the interval reaching furthest right so far
    for (std::size_t k = 1; k < indices.size(); ++k) {
      const auto& prev = trace.events[indices[latest]];
      const auto& cur = trace.events[indices[k]];
      if (cur.t_start < prev.t_end) {
        add(Violation::Kind::Serialization,
            to_string(prev.task()) + " and " + to_string(cur.task()) + " overlap on stage " +
                std::to_string(lane.first) + " rank " + std::to_string(lane.second),
            {prev.task(), cur.task()});
      }
      if (cur.t_end > prev.t_end) latest = k;
    }
  }
  return report;
}

}  // namespace rrfp
