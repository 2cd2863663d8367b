#include "rrfp/metrics.hpp"

namespace rrfp {

Metrics metrics_from_trace(const Trace& trace) {
  Metrics m;
  m.scheduler = trace.header.scheduler;
  m.makespan = trace.makespan();
  m.stages.resize(static_cast<std::size_t>(std::max(trace.header.num_stages, 0)));
  for (const auto& e : trace.events) {
    if (e.rank != 0 || e.stage < 0 || e.stage >= static_cast<int>(m.stages.size())) continue;
    auto& s = m.stages[static_cast<std::size_t>(e.stage)];
    const Micros d = e.t_end - e.t_start;
    switch (e.kind) {
      case EventKind::Exec:
        s.compute += d;
        m.injected += e.injected;
        ++m.exec_count;
        break;
      case EventKind::Block:
        s.blocking += d;
        break;
      case EventKind::Coord:
        s.coord += d;
        ++m.coord_rounds;
        if (!e.agreed) ++m.deferred_rounds;
        break;
      case EventKind::Send:
        ++m.messages;
        break;
      case EventKind::Recv:
        break;
    }
  }
  return m;
}

void to_json(nlohmann::json& j, const Metrics& m) {
  auto column = [&](auto field) {
    auto arr = nlohmann::json::array();
    for (const auto& s : m.stages) arr.push_back(field(s));
    return arr;
  };
  j = {
      {"scheduler", m.scheduler},
      {"makespan", m.makespan},
      {"compute", column([](const StageMetrics& s) { return s.compute; })},
      {"blocking", column([](const StageMetrics& s) { return s.blocking; })},
      {"coord", column([](const StageMetrics& s) { return s.coord; })},
      {"max_forward_ready", column([](const StageMetrics& s) { return s.max_occupancy.forward_ready; })},
      {"max_forward_finished", column([](const StageMetrics& s) { return s.max_occupancy.forward_finished; })},
      {"max_backward_ready", column([](const StageMetrics& s) { return s.max_occupancy.backward_ready; })},
      {"max_backward_finished", column([](const StageMetrics& s) { return s.max_occupancy.backward_finished; })},
      {"max_outstanding", column([](const StageMetrics& s) { return s.max_outstanding; })},
      {"exec_count", m.exec_count},
      {"coord_rounds", m.coord_rounds},
      {"deferred_rounds", m.deferred_rounds},
      {"messages", m.messages},
      {"injected", m.injected},
  };
}

}  // namespace rrfp
