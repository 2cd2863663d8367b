// JSON-in, JSON-out bindings; the Python package converts to and from dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "rrfp/analysis.hpp"
#include "rrfp/engine.hpp"
#include "rrfp/fixed_schedule.hpp"
#include "rrfp/harness.hpp"
#include "rrfp/live.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

rrfp::Workload workload_of(const std::string& text) {
  auto w = json::parse(text).get<rrfp::Workload>();
  w.validate();
  return w;
}

rrfp::TpGroup tp_of(const std::string& text) {
  if (text.empty()) return {};
  auto g = json::parse(text).get<rrfp::TpGroup>();
  g.validate();
  return g;
}

std::string result_json(const rrfp::RunResult& r) {
  json m = r.metrics;
  return json{{"trace", rrfp::to_jsonl(r.trace)}, {"metrics", m}}.dump();
}

rrfp::Trace trace_of(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return rrfp::read_jsonl(in);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Readiness-driven pipeline schedule simulator";

  m.def("generate_workload", [](const std::string& spec, std::uint64_t seed) {
    const auto g = json::parse(spec).get<rrfp::GeneratorSpec>();
    g.validate();
    return json(rrfp::generate_workload(g, seed)).dump();
  });

  m.def(
      "run_rrfp",
      [](const std::string& workload, const std::string& hint, int limit, std::uint64_t seed, const std::string& jitter,
         const std::string& tp) {
        rrfp::EngineOptions o;
        o.hint = rrfp::resolve_hint(hint);
        o.buffer_limit = limit;
        o.seed = seed;
        o.jitter = rrfp::resolve_jitter(jitter);
        o.tp = tp_of(tp);
        py::gil_scoped_release release;
        return result_json(rrfp::run_rrfp(workload_of(workload), o));
      },
      py::arg("workload"), py::arg("hint") = "bf", py::arg("buffer_limit") = 32, py::arg("seed") = 0,
      py::arg("jitter") = "J0", py::arg("tp") = "");

  m.def(
      "run_1f1b",
      [](const std::string& workload, std::uint64_t seed, const std::string& jitter) {
        const auto w = workload_of(workload);
        rrfp::FixedRunOptions o;
        o.seed = seed;
        o.jitter = rrfp::resolve_jitter(jitter);
        o.scheduler_name = "1f1b";
        py::gil_scoped_release release;
        return rrfp::to_jsonl(rrfp::run_fixed(rrfp::build_1f1b_schedule(w), w, o));
      },
      py::arg("workload"), py::arg("seed") = 0, py::arg("jitter") = "J0");

  m.def(
      "run_live",
      [](const std::string& workload, const std::string& hint, int limit, const std::string& time_scale,
         std::uint64_t seed, double watchdog_secs, const std::string& tp) {
        rrfp::LiveOptions o;
        o.seed = seed;
        o.watchdog_secs = watchdog_secs;
        o.tp = tp_of(tp);
        const auto scale = rrfp::Rational::parse(time_scale);
        const auto h = rrfp::resolve_hint(hint);
        const auto w = workload_of(workload);
        py::gil_scoped_release release;
        return result_json(rrfp::run_live(w, h, limit, scale, o));
      },
      py::arg("workload"), py::arg("hint") = "bf", py::arg("buffer_limit") = 32, py::arg("time_scale") = "1",
      py::arg("seed") = 0, py::arg("watchdog_secs") = 30.0, py::arg("tp") = "");

  m.def("theorem_bound", [](const std::string& workload) {
    return json(rrfp::theorem_bound(workload_of(workload))).dump();
  });
  m.def("last_stage_work", [](const std::string& workload) { return rrfp::last_stage_work(workload_of(workload)); });
  m.def("brute_force_makespan",
        [](const std::string& workload) { return rrfp::brute_force_makespan(workload_of(workload)); });
  m.attr("BRUTE_FORCE_MAX_TASKS") = rrfp::kBruteForceMaxTasks;

  m.def(
      "validate_trace",
      [](const std::string& jsonl, const std::string& workload, std::int64_t tolerance) {
        rrfp::ValidationOptions o;
        o.duration_tolerance = tolerance;
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& v : rrfp::validate_trace(trace_of(jsonl), workload_of(workload), o).violations)
          out.emplace_back(std::string(rrfp::to_string(v.kind)), v.message);
        return out;
      },
      py::arg("trace"), py::arg("workload"), py::arg("duration_tolerance") = 0);

  m.def("breakdown", [](const std::string& jsonl) { return json(rrfp::breakdown(trace_of(jsonl))).dump(); });

  m.def("validate_config", [](const std::string& doc) {
    try {
      rrfp::validate_config(json::parse(doc));
    } catch (const rrfp::ConfigError& e) {
      return e.path();
    }
    return std::string();
  });
}
