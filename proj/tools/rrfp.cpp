// rrfp: command-line front end for the simulator, live runtime and analyses.
//
// Exit codes: 0 success, 1 runtime error, 2 config/schema error,
// 3 watchdog or schedule deadlock (a dump file is written).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rrfp/analysis.hpp"
#include "rrfp/engine.hpp"
#include "rrfp/fixed_schedule.hpp"
#include "rrfp/harness.hpp"
#include "rrfp/live.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rrfp;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDeadlock = 3;

struct Options {
  std::string config;
  std::string preset;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string hint;
  std::optional<int> limit;
  std::string jitter;
  std::optional<int> tp;
  bool live = false;
  std::optional<double> watchdog_secs;
  // sweep
  std::string axis;
  std::string levels;
  std::optional<int> paired_seeds;
  std::optional<int> threads;
  // stats
  int iterations = 100;
  // simulate-1f1b
  std::string schedule;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--preset", o.preset, "Built-in experiment preset");
  cmd->add_option("--set", o.sets, "Dotted override, e.g. scheduler.buffer_limit=8");
  cmd->add_option("--out", o.out, "Output root directory");
  cmd->add_option("--seed", o.seed, "Scheduler seed");
  cmd->add_option("--hint", o.hint, "bf|fb|bprio|fprio|bfw|file:PATH or an explicit list");
  cmd->add_option("--limit", o.limit, "Buffer limit");
  cmd->add_option("--jitter", o.jitter, "J0..J3 or a JSON file");
  cmd->add_option("--tp", o.tp, "Tensor-parallel group size");
  cmd->add_flag("--live", o.live, "Use the wall-clock runtime");
  cmd->add_option("--watchdog-secs", o.watchdog_secs, "Live watchdog timeout");
}

class ExitError : public std::runtime_error {
 public:
  ExitError(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

ExperimentConfig load(const Options& o, const std::string& command) {
  json doc;
  if (!o.preset.empty()) {
    const auto& presets = experiment_presets();
    const auto it = presets.find(o.preset);
    if (it == presets.end()) throw ConfigError("--preset", "unknown preset '" + o.preset + "'");
    doc = it->second;
  } else if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("--config", "cannot open '" + o.config + "'");
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("$", "'" + o.config + "' is not valid JSON");
  } else {
    throw ConfigError("--config", "either --config or --preset is required");
  }
  for (const auto& s : o.sets) apply_override(doc, s);
  auto set = [&](const std::string& section, const std::string& key, json v) {
    if (!doc.contains(section) || !doc[section].is_object()) doc[section] = json::object();
    doc[section][key] = std::move(v);
  };
  if (o.seed) set("scheduler", "seed", *o.seed);
  if (!o.hint.empty()) set("scheduler", "hint", o.hint);
  if (o.limit) set("scheduler", "buffer_limit", *o.limit);
  if (o.watchdog_secs) set("scheduler", "watchdog_secs", *o.watchdog_secs);
  if (o.live) set("scheduler", "kind", "live");
  if (command == "live") set("scheduler", "kind", "live");
  if (o.tp) set("tp", "group_size", *o.tp);
  if (!o.out.empty()) set("output", "dir", o.out);
  if (!o.jitter.empty()) {
    try {
      doc["jitter"] = json(resolve_jitter(o.jitter));
    } catch (const std::exception& e) {
      throw ConfigError("--jitter", e.what());
    }
  }
  if (command == "sweep") {
    if (!o.axis.empty()) set("sweep", "axis", o.axis);
    if (!o.levels.empty()) {
      json levels = json::array();
      std::stringstream ss(o.levels);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const json v = json::parse(item, nullptr, false);
        levels.push_back(v.is_discarded() ? json(item) : v);
      }
      set("sweep", "levels", levels);
    }
    if (o.paired_seeds) set("sweep", "paired_seeds", *o.paired_seeds);
    if (o.threads) set("sweep", "threads", *o.threads);
  }
  return parse_config(doc);
}

fs::path prepare_dir(const ExperimentConfig& c) {
  const fs::path dir = fs::path(c.output_dir) / run_id(c.document);
  fs::create_directories(dir / "reports");
  std::ofstream(dir / "config.json") << c.document.dump(2) << "\n";
  return dir;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

void write_run(const fs::path& dir, const RunResult& r) {
  std::ofstream trace(dir / "trace.jsonl");
  write_jsonl(trace, r.trace);
  write_file(dir / "metrics.json", json(r.metrics).dump(2) + "\n");
  write_file(dir / "reports" / "breakdown.csv", breakdown_csv(breakdown(r.trace)));
  write_file(dir / "reports" / "gantt.csv", gantt_csv(r.trace));
}

[[noreturn]] void deadlock_exit(const fs::path& dir, const std::string& what, const std::string& dump) {
  const fs::path p = dir / "dump.txt";
  write_file(p, what + "\n" + dump);
  throw ExitError(kExitDeadlock, what + " (state dump: " + p.string() + ")");
}

bool baseline_applicable(const Workload& w) { return w.num_chunks() == 1 && !w.decompose_backward(); }

FixedRunOptions fixed_options(const ExperimentConfig& c) {
  FixedRunOptions fo;
  fo.jitter = c.jitter;
  fo.seed = c.scheduler.seed;
  fo.scheduler_name = "1f1b";
  fo.record_messages = c.record_messages;
  return fo;
}

int simulate(const ExperimentConfig& c) {
  const Workload w = c.make_workload();
  const fs::path dir = prepare_dir(c);
  RunResult r;
  try {
    if (c.scheduler.kind == "live") {
      LiveOptions lo;
      lo.seed = c.scheduler.seed;
      lo.tp = c.tp;
      lo.jitter = c.jitter;
      lo.record_messages = c.record_messages;
      lo.watchdog_secs = c.scheduler.watchdog_secs;
      r = run_live(w, c.scheduler.hint, c.scheduler.buffer_limit, c.scheduler.time_scale, lo);
    } else {
      EngineOptions eo;
      eo.hint = c.scheduler.hint;
      eo.buffer_limit = c.scheduler.buffer_limit;
      eo.seed = c.scheduler.seed;
      eo.tp = c.tp;
      eo.jitter = c.jitter;
      eo.record_messages = c.record_messages;
      r = run_rrfp(w, eo);
    }
  } catch (const WatchdogError& e) {
    deadlock_exit(dir, e.what(), e.dump());
  }
  write_run(dir, r);
  std::cout << r.metrics.scheduler << " makespan=" << r.metrics.makespan;
  if (c.scheduler.compare_baseline && c.scheduler.kind != "live" && baseline_applicable(w)) {
    const Micros base = run_fixed(build_1f1b_schedule(w), w, fixed_options(c)).makespan();
    std::cout << " 1f1b=" << base << " speedup=" << std::fixed << std::setprecision(3)
              << static_cast<double>(base) / static_cast<double>(std::max<Micros>(r.metrics.makespan, 1)) << "x";
  }
  std::cout << " out=" << dir.string() << "\n";
  return 0;
}

int simulate_1f1b(const ExperimentConfig& c, const std::string& schedule_path) {
  const Workload w = c.make_workload();
  const fs::path dir = prepare_dir(c);
  FixedSchedule sched;
  if (!schedule_path.empty()) {
    std::ifstream in(schedule_path);
    if (!in) throw ConfigError("--schedule", "cannot open '" + schedule_path + "'");
    try {
      sched = json::parse(in).get<FixedSchedule>();
      sched.validate(w);
    } catch (const std::exception& e) {
      throw ConfigError("--schedule", e.what());
    }
  } else {
    sched = build_1f1b_schedule(w);
  }
  Trace t;
  try {
    t = run_fixed(sched, w, fixed_options(c));
  } catch (const ScheduleDeadlock& e) {
    deadlock_exit(dir, e.what(), "");
  }
  write_run(dir, {t, metrics_from_trace(t)});
  std::cout << "1f1b makespan=" << t.makespan() << " out=" << dir.string() << "\n";
  return 0;
}

int bounds(const ExperimentConfig& c) {
  const Workload w = c.make_workload();
  const fs::path dir = prepare_dir(c);
  const BoundReport b = theorem_bound(w);
  json j = b;
  j["bf_makespan"] = run_rrfp(w, HintOrder{}, c.scheduler.buffer_limit, c.scheduler.seed).metrics.makespan;
  write_file(dir / "bounds.json", j.dump(2) + "\n");
  std::cout << j.dump() << "\n";
  return 0;
}

int stats(const ExperimentConfig& c, int iterations) {
  if (iterations < 1) throw ConfigError("--iterations", "must be positive");
  std::vector<Workload> ws;
  for (int k = 0; k < iterations; ++k) ws.push_back(c.make_workload(static_cast<std::uint64_t>(k)));
  const StatsReport s = bottleneck_stats(ws);
  const fs::path dir = prepare_dir(c);
  write_file(dir / "stats.json", json(s).dump(2) + "\n");
  write_file(dir / "reports" / "stats.csv", stats_csv(s));
  std::cout << "p_hat=" << s.p_hat << " rho_hat=" << s.rho_hat << " out=" << dir.string() << "\n";
  return 0;
}

int sweep(const ExperimentConfig& c) {
  const auto rows = run_sweep(c);
  const fs::path dir = prepare_dir(c);
  const std::string csv = sweep_csv(rows);
  write_file(dir / "reports" / "sweep.csv", csv);
  write_file(dir / "sweep.json", json(rows).dump(2) + "\n");
  std::cout << csv;
  return 0;
}

int bruteforce(const ExperimentConfig& c) {
  const Workload w = c.make_workload();
  const Micros opt = brute_force_makespan(w);
  const Micros bf = run_rrfp(w, HintOrder{}, c.scheduler.buffer_limit, c.scheduler.seed).metrics.makespan;
  std::cout << json({{"brute_force", opt}, {"lower_bound_L", last_stage_work(w)}, {"bf_makespan", bf}}).dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Readiness-driven pipeline-parallel simulator"};
  app.require_subcommand(1);
  Options o;
  std::map<std::string, CLI::App*> cmds;
  for (const char* name : {"simulate-rrfp", "simulate-1f1b", "live", "bounds", "stats", "sweep", "bruteforce"}) {
    cmds[name] = app.add_subcommand(name);
    add_common(cmds[name], o);
  }
  cmds["simulate-rrfp"]->description("Run the virtual-clock engine (and the 1F1B baseline for comparison)");
  cmds["simulate-1f1b"]->description("Run a fixed 1F1B schedule, or --schedule FILE");
  cmds["simulate-1f1b"]->add_option("--schedule", o.schedule, "External fixed schedule (JSON)");
  cmds["live"]->description("Run the wall-clock concurrent runtime");
  cmds["bounds"]->description("Theorem bound report next to the simulated BF makespan");
  cmds["stats"]->description("Bottleneck statistics over generated iterations");
  cmds["stats"]->add_option("--iterations", o.iterations, "Number of generated iterations");
  cmds["sweep"]->description("Parameter sweep with paired seeds");
  cmds["sweep"]->add_option("--axis", o.axis, "jitter|hint|limit|microbatches|stages|skew");
  cmds["sweep"]->add_option("--levels", o.levels, "Comma-separated levels");
  cmds["sweep"]->add_option("--paired-seeds", o.paired_seeds, "Seeds per level");
  cmds["sweep"]->add_option("--threads", o.threads, "Worker threads");
  cmds["bruteforce"]->description("Exhaustive optimum for tiny instances");
  auto* presets = app.add_subcommand("presets", "List built-in presets, or print one");
  std::string preset_name;
  presets->add_option("name", preset_name);

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) {
      if (preset_name.empty()) {
        for (const auto& [name, _] : experiment_presets()) std::cout << name << "\n";
      } else {
        const auto it = experiment_presets().find(preset_name);
        if (it == experiment_presets().end()) throw ConfigError("name", "unknown preset '" + preset_name + "'");
        std::cout << it->second.dump(2) << "\n";
      }
      return 0;
    }
    std::string command;
    for (const auto& [name, cmd] : cmds)
      if (cmd->parsed()) command = name;
    const ExperimentConfig c = load(o, command);
    if (command == "simulate-rrfp" || command == "live") return simulate(c);
    if (command == "simulate-1f1b") return simulate_1f1b(c, o.schedule);
    if (command == "bounds") return bounds(c);
    if (command == "stats") return stats(c, o.iterations);
    if (command == "sweep") return sweep(c);
    if (command == "bruteforce") return bruteforce(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return kExitConfig;
  } catch (const ExitError& e) {
    std::cerr << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
