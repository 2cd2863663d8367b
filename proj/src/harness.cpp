#include "rrfp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "rrfp/analysis.hpp"
#include "rrfp/fixed_schedule.hpp"

namespace rrfp {

namespace {

using nlohmann::json;

// Hand-written structural checks; mirrors schema/experiment.schema.json.
class Checker {
 public:
  static void object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    for (const auto& [key, _] : j.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
        throw ConfigError(path + "." + key, "unknown field");
    }
  }

  static void integer(const json& j, const std::string& key, const std::string& path, std::int64_t min,
                      bool required = false) {
    if (!j.contains(key)) {
      if (required) throw ConfigError(path + "." + key, "required field missing");
      return;
    }
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
    if (v.get<std::int64_t>() < min)
      throw ConfigError(path + "." + key, "must be at least " + std::to_string(min));
  }

  static void boolean(const json& j, const std::string& key, const std::string& path) {
    if (j.contains(key) && !j.at(key).is_boolean()) throw ConfigError(path + "." + key, "expected a boolean");
  }

  static void string(const json& j, const std::string& key, const std::string& path) {
    if (j.contains(key) && !j.at(key).is_string()) throw ConfigError(path + "." + key, "expected a string");
  }

  static void rational(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) return;
    try {
      (void)j.at(key).get<Rational>();
    } catch (const std::exception& e) {
      throw ConfigError(path + "." + key, e.what());
    }
  }

  static void distribution(const json& j, const std::string& path) {
    object(j, path, {"kind", "value", "lo", "hi", "mu", "sigma"});
    if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError(path + ".kind", "expected a string");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "constant") {
      integer(j, "value", path, 0, true);
    } else if (kind == "uniform") {
      integer(j, "lo", path, 0, true);
      integer(j, "hi", path, 0, true);
    } else if (kind == "lognormal") {
      for (const char* k : {"mu", "sigma"})
        if (!j.contains(k) || !j.at(k).is_number()) throw ConfigError(path + "." + k, "expected a number");
      integer(j, "lo", path, 0);
      integer(j, "hi", path, 0);
    } else {
      throw ConfigError(path + ".kind", "must be one of constant, uniform, lognormal");
    }
    try {
      j.get<Distribution>().validate(path);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(path, e.what());
    }
  }
};

void check_generator(const json& g, const std::string& p) {
  Checker::object(g, p,
                  {"num_stages", "num_microbatches", "num_chunks", "tp_group_size", "forward", "backward", "m_l",
                   "m_h", "skew", "skew_factor", "comm_delay", "decompose_backward", "backward_split_fraction",
                   "seed"});
  for (const char* k : {"num_stages", "num_microbatches", "num_chunks", "tp_group_size"}) Checker::integer(g, k, p, 1);
  for (const char* k : {"forward", "backward", "comm_delay"})
    if (g.contains(k)) Checker::distribution(g.at(k), p + "." + k);
  Checker::integer(g, "m_l", p, 1);
  Checker::integer(g, "m_h", p, 1);
  Checker::integer(g, "seed", p, 0);
  Checker::string(g, "skew", p);
  if (g.contains("skew")) {
    const auto s = g.at("skew").get<std::string>();
    if (s != "none" && s != "heavy_last" && s != "heavy_prefix")
      throw ConfigError(p + ".skew", "must be one of none, heavy_last, heavy_prefix");
  }
  Checker::rational(g, "skew_factor", p);
  Checker::rational(g, "backward_split_fraction", p);
  Checker::boolean(g, "decompose_backward", p);
  try {
    g.get<GeneratorSpec>().validate();
  } catch (const std::exception& e) {
    throw ConfigError(p, e.what());
  }
}

void check_workload(const json& w, const std::string& p) {
  Checker::object(w, p,
                  {"num_stages", "num_microbatches", "num_chunks", "tp_group_size", "latency", "comm_delay",
                   "decompose_backward", "backward_split_fraction"});
  Checker::integer(w, "num_stages", p, 1, true);
  Checker::integer(w, "num_microbatches", p, 1, true);
  Checker::integer(w, "num_chunks", p, 1);
  Checker::integer(w, "tp_group_size", p, 1);
  if (!w.contains("latency")) throw ConfigError(p + ".latency", "required field missing");
  Checker::object(w.at("latency"), p + ".latency", {"forward", "backward"});
  for (const char* k : {"forward", "backward"})
    if (!w.at("latency").contains(k)) throw ConfigError(p + ".latency." + k, "required field missing");
  if (w.contains("comm_delay")) {
    Checker::object(w.at("comm_delay"), p + ".comm_delay", {"dist", "seed"});
    if (!w.at("comm_delay").contains("dist")) throw ConfigError(p + ".comm_delay.dist", "required field missing");
    Checker::distribution(w.at("comm_delay").at("dist"), p + ".comm_delay.dist");
  }
  try {
    w.get<Workload>().validate();
  } catch (const std::exception& e) {
    throw ConfigError(p, e.what());
  }
}

void check_jitter(const json& j, const std::string& p) {
  if (j.is_string()) {
    const auto& names = jitter_preset_names();
    if (std::find(names.begin(), names.end(), j.get<std::string>()) == names.end())
      throw ConfigError(p, "unknown jitter preset '" + j.get<std::string>() + "'");
    return;
  }
  Checker::object(j, p, {"level", "p_j", "base_us", "alpha"});
  try {
    (void)j.get<JitterConfig>();
  } catch (const std::exception& e) {
    throw ConfigError(p, e.what());
  }
}

const std::vector<std::string> kAxes{"jitter", "hint", "limit", "microbatches", "stages", "skew"};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void validate_config(const json& doc) {
  Checker::object(doc, "$", {"workload", "generator", "scheduler", "jitter", "tp", "output", "sweep"});
  const bool has_w = doc.contains("workload"), has_g = doc.contains("generator");
  if (has_w == has_g) throw ConfigError("$", "exactly one of 'workload' or 'generator' is required");
  if (has_w) check_workload(doc.at("workload"), "$.workload");
  if (has_g) check_generator(doc.at("generator"), "$.generator");

  if (doc.contains("scheduler")) {
    const auto& s = doc.at("scheduler");
    const std::string p = "$.scheduler";
    Checker::object(s, p, {"kind", "hint", "buffer_limit", "seed", "time_scale", "watchdog_secs", "compare_baseline"});
    Checker::string(s, "kind", p);
    if (s.contains("kind")) {
      const auto k = s.at("kind").get<std::string>();
      if (k != "rrfp" && k != "1f1b" && k != "live") throw ConfigError(p + ".kind", "must be one of rrfp, 1f1b, live");
    }
    Checker::string(s, "hint", p);
    if (s.contains("hint")) {
      try {
        (void)resolve_hint(s.at("hint").get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(p + ".hint", e.what());
      }
    }
    Checker::integer(s, "buffer_limit", p, 1);
    Checker::integer(s, "seed", p, 0);
    Checker::rational(s, "time_scale", p);
    if (s.contains("time_scale") && s.at("time_scale").get<Rational>().num <= 0)
      throw ConfigError(p + ".time_scale", "must be positive");
    if (s.contains("watchdog_secs") && (!s.at("watchdog_secs").is_number() || s.at("watchdog_secs").get<double>() <= 0))
      throw ConfigError(p + ".watchdog_secs", "expected a positive number");
    Checker::boolean(s, "compare_baseline", p);
  }
  if (doc.contains("jitter")) check_jitter(doc.at("jitter"), "$.jitter");
  if (doc.contains("tp")) {
    const auto& t = doc.at("tp");
    Checker::object(t, "$.tp", {"group_size", "skew", "coord_cost"});
    Checker::integer(t, "group_size", "$.tp", 1);
    if (t.contains("skew")) Checker::distribution(t.at("skew"), "$.tp.skew");
    Checker::integer(t, "coord_cost", "$.tp", 0);
  }
  if (doc.contains("output")) {
    Checker::object(doc.at("output"), "$.output", {"dir", "record_messages"});
    Checker::string(doc.at("output"), "dir", "$.output");
    Checker::boolean(doc.at("output"), "record_messages", "$.output");
  }
  if (doc.contains("sweep")) {
    const auto& s = doc.at("sweep");
    const std::string p = "$.sweep";
    Checker::object(s, p, {"axis", "levels", "paired_seeds", "threads", "schedulers"});
    if (!s.contains("axis") || !s.at("axis").is_string()) throw ConfigError(p + ".axis", "expected a string");
    const auto axis = s.at("axis").get<std::string>();
    if (std::find(kAxes.begin(), kAxes.end(), axis) == kAxes.end())
      throw ConfigError(p + ".axis", "must be one of jitter, hint, limit, microbatches, stages, skew");
    if (!s.contains("levels") || !s.at("levels").is_array() || s.at("levels").empty())
      throw ConfigError(p + ".levels", "expected a non-empty array");
    if ((axis == "microbatches" || axis == "stages" || axis == "skew") && !has_g)
      throw ConfigError(p + ".axis", "axis '" + axis + "' needs a generator section");
    for (std::size_t i = 0; i < s.at("levels").size(); ++i) {
      const auto& v = s.at("levels")[i];
      const std::string lp = p + ".levels[" + std::to_string(i) + "]";
      if (axis == "jitter") {
        check_jitter(v, lp);
      } else if (axis == "hint") {
        if (!v.is_string()) throw ConfigError(lp, "expected a hint string");
        try {
          (void)resolve_hint(v.get<std::string>());
        } catch (const std::exception& e) {
          throw ConfigError(lp, e.what());
        }
      } else if (axis == "skew") {
        try {
          if (v.get<Rational>().num <= 0) throw InvalidArgument("must be positive");
        } catch (const std::exception& e) {
          throw ConfigError(lp, e.what());
        }
      } else if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
        throw ConfigError(lp, "expected a positive integer");
      }
    }
    Checker::integer(s, "paired_seeds", p, 1);
    Checker::integer(s, "threads", p, 0);
    if (s.contains("schedulers")) {
      if (!s.at("schedulers").is_array()) throw ConfigError(p + ".schedulers", "expected an array");
      for (std::size_t i = 0; i < s.at("schedulers").size(); ++i) {
        const auto& v = s.at("schedulers")[i];
        if (!v.is_string() || (v != "rrfp" && v != "1f1b"))
          throw ConfigError(p + ".schedulers[" + std::to_string(i) + "]", "must be 'rrfp' or '1f1b'");
      }
    }
  }
}

ExperimentConfig parse_config(const json& doc) {
  validate_config(doc);
  ExperimentConfig c;
  c.document = doc;
  if (doc.contains("workload")) c.workload = doc.at("workload").get<Workload>();
  if (doc.contains("generator")) {
    c.generator = doc.at("generator").get<GeneratorSpec>();
    c.generator_seed = doc.at("generator").value("seed", std::uint64_t{0});
  }
  if (doc.contains("scheduler")) {
    const auto& s = doc.at("scheduler");
    c.scheduler.kind = s.value("kind", c.scheduler.kind);
    if (s.contains("hint")) c.scheduler.hint = resolve_hint(s.at("hint").get<std::string>());
    c.scheduler.buffer_limit = s.value("buffer_limit", c.scheduler.buffer_limit);
    c.scheduler.seed = s.value("seed", c.scheduler.seed);
    if (s.contains("time_scale")) c.scheduler.time_scale = s.at("time_scale").get<Rational>();
    c.scheduler.watchdog_secs = s.value("watchdog_secs", c.scheduler.watchdog_secs);
    c.scheduler.compare_baseline = s.value("compare_baseline", c.scheduler.compare_baseline);
  }
  if (doc.contains("jitter")) c.jitter = doc.at("jitter").get<JitterConfig>();
  if (doc.contains("tp")) {
    const auto& t = doc.at("tp");
    if (t.contains("group_size")) c.tp_group_size = t.at("group_size").get<int>();
    c.tp = t.get<TpGroup>();
  }
  if (doc.contains("output")) {
    c.output_dir = doc.at("output").value("dir", c.output_dir);
    c.record_messages = doc.at("output").value("record_messages", c.record_messages);
  }
  if (doc.contains("sweep")) {
    const auto& s = doc.at("sweep");
    SweepConfig sw;
    sw.axis = s.at("axis").get<std::string>();
    sw.levels = s.at("levels").get<std::vector<json>>();
    sw.paired_seeds = s.value("paired_seeds", sw.paired_seeds);
    sw.threads = s.value("threads", sw.threads);
    if (s.contains("schedulers")) sw.schedulers = s.at("schedulers").get<std::vector<std::string>>();
    if (sw.axis == "hint" || sw.axis == "limit") sw.schedulers = {"rrfp"};
    c.sweep = std::move(sw);
  }
  return c;
}

Workload ExperimentConfig::make_workload(std::uint64_t k) const {
  Workload w = workload ? *workload : generate_workload(*generator, generator_seed + k);
  if (tp_group_size) w.set_tp_group_size(*tp_group_size);
  return w;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("$." + key, "cannot descend into a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("$." + key, "cannot descend into a non-object");
  (*node)[parts.back()] = std::move(value);
}

HintOrder resolve_hint(const std::string& text) {
  if (text.rfind("file:", 0) == 0) {
    std::ifstream in(text.substr(5));
    if (!in) throw InvalidArgument("cannot read hint file '" + text.substr(5) + "'");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    content.erase(std::remove_if(content.begin(), content.end(), [](unsigned char c) { return std::isspace(c); }),
                  content.end());
    return HintOrder::parse(content);
  }
  return HintOrder::parse(text);
}

JitterConfig resolve_jitter(const std::string& text) {
  const auto& names = jitter_preset_names();
  if (std::find(names.begin(), names.end(), text) != names.end()) return jitter_preset(text);
  std::ifstream in(text);
  if (!in) throw InvalidArgument("unknown jitter level or unreadable file '" + text + "'");
  const json j = json::parse(in);
  check_jitter(j, "$.jitter");
  return j.get<JitterConfig>();
}

std::string run_id(const json& doc) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(doc.dump())));
  return buf;
}

Distribution scale_distribution(const Distribution& d, Rational f) {
  Distribution out = d;
  auto sc = [&](Micros v) { return f.scale_round(v); };
  switch (d.kind) {
    case Distribution::Kind::Constant:
      out.value = sc(d.value);
      break;
    case Distribution::Kind::Uniform:
      out.lo = sc(d.lo);
      out.hi = sc(d.hi);
      break;
    case Distribution::Kind::LogNormal:
      out.mu = d.mu + std::log(static_cast<double>(f.num) / static_cast<double>(f.den));
      out.lo = sc(d.lo);
      out.hi = sc(d.hi);
      break;
  }
  return out;
}

const std::map<std::string, json>& experiment_presets() {
  static const std::map<std::string, json> presets = [] {
    std::map<std::string, json> m;
    const json out = {{"dir", "out"}, {"record_messages", false}};
    m["hint-sensitivity"] = {
        {"generator",
         {{"num_stages", 4},
          {"num_microbatches", 32},
          {"forward", {{"kind", "lognormal"}, {"mu", 5.29}, {"sigma", 0.3}, {"lo", 10}, {"hi", 5000}}},
          {"backward", {{"kind", "lognormal"}, {"mu", 4.6}, {"sigma", 0.3}, {"lo", 10}, {"hi", 5000}}},
          {"m_l", 10},
          {"m_h", 5000},
          {"seed", 0}}},
        {"scheduler", {{"kind", "rrfp"}, {"buffer_limit", 8}, {"seed", 0}}},
        {"sweep", {{"axis", "hint"}, {"levels", {"bf", "fb", "bprio", "fprio"}}, {"paired_seeds", 10}}},
        {"output", out}};
    m["buffer-limit"] = {
        {"generator",
         {{"num_stages", 8},
          {"num_microbatches", 64},
          {"forward", {{"kind", "uniform"}, {"lo", 80}, {"hi", 120}}},
          {"backward", {{"kind", "uniform"}, {"lo", 80}, {"hi", 120}}},
          {"comm_delay", {{"kind", "uniform"}, {"lo", 0}, {"hi", 20}}},
          {"seed", 0}}},
        {"scheduler", {{"kind", "rrfp"}, {"hint", "bf"}, {"seed", 0}}},
        {"sweep", {{"axis", "limit"}, {"levels", {4, 8, 16, 32, 48}}, {"paired_seeds", 5}}},
        {"output", out}};
    m["depth"] = {
        {"generator",
         {{"num_stages", 4},
          {"num_microbatches", 32},
          {"forward", {{"kind", "uniform"}, {"lo", 160}, {"hi", 240}}},
          {"backward", {{"kind", "uniform"}, {"lo", 320}, {"hi", 480}}},
          {"seed", 0}}},
        {"scheduler", {{"kind", "rrfp"}, {"hint", "bf"}, {"seed", 0}}},
        {"sweep", {{"axis", "stages"}, {"levels", {4, 8, 16}}, {"paired_seeds", 5}}},
        {"output", out}};
    m["imbalance"] = {
        {"generator",
         {{"num_stages", 8},
          {"num_microbatches", 32},
          {"forward", {{"kind", "lognormal"}, {"mu", 4.6}, {"sigma", 0.25}, {"lo", 10}, {"hi", 10000}}},
          {"backward", {{"kind", "lognormal"}, {"mu", 5.3}, {"sigma", 0.25}, {"lo", 10}, {"hi", 10000}}},
          {"m_l", 10},
          {"m_h", 10000},
          {"skew", "heavy_prefix"},
          {"seed", 0}}},
        {"scheduler", {{"kind", "rrfp"}, {"hint", "bf"}, {"seed", 0}}},
        {"sweep", {{"axis", "skew"}, {"levels", {"1", "3/2", "2", "3"}}, {"paired_seeds", 5}}},
        {"output", out}};
    m["batch"] = {
        {"generator",
         {{"num_stages", 4},
          {"num_microbatches", 8},
          {"forward", {{"kind", "uniform"}, {"lo", 80}, {"hi", 120}}},
          {"backward", {{"kind", "uniform"}, {"lo", 160}, {"hi", 240}}},
          {"seed", 0}}},
        {"scheduler", {{"kind", "rrfp"}, {"hint", "bf"}, {"seed", 0}}},
        {"sweep", {{"axis", "microbatches"}, {"levels", {8, 16, 32, 64}}, {"paired_seeds", 5}}},
        {"output", out}};
    m["jitter"] = {
        {"generator",
         {{"num_stages", 4},
          {"num_microbatches", 16},
          {"forward", {{"kind", "lognormal"}, {"mu", 9.2}, {"sigma", 0.35}, {"lo", 2000}, {"hi", 40000}}},
          {"backward", {{"kind", "lognormal"}, {"mu", 9.9}, {"sigma", 0.35}, {"lo", 4000}, {"hi", 80000}}},
          {"comm_delay", {{"kind", "uniform"}, {"lo", 100}, {"hi", 500}}},
          {"m_l", 2000},
          {"m_h", 80000},
          {"seed", 100}}},
        {"scheduler", {{"kind", "rrfp"}, {"hint", "bf"}, {"seed", 0}}},
        {"sweep", {{"axis", "jitter"}, {"levels", {"J0", "J1", "J2", "J3"}}, {"paired_seeds", 10}}},
        {"output", out}};
    return m;
  }();
  return presets;
}

namespace {

struct Cell {
  std::size_t level;
  std::size_t scheduler;
  int k;
  Micros makespan = 0;
  Micros lower = 0;
  bool skipped = false;
};

std::string level_name(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find(',') != std::string::npos) s = "\"" + s + "\"";
  return s;
}

void run_cell(const ExperimentConfig& base, const SweepConfig& sw, Cell& cell) {
  ExperimentConfig c = base;
  const json& lv = sw.levels[cell.level];
  if (sw.axis == "jitter") c.jitter = lv.get<JitterConfig>();
  if (sw.axis == "hint") c.scheduler.hint = resolve_hint(lv.get<std::string>());
  if (sw.axis == "limit") c.scheduler.buffer_limit = lv.get<int>();
  if (sw.axis == "microbatches") c.generator->num_microbatches = lv.get<int>();
  if (sw.axis == "skew") c.generator->skew_factor = lv.get<Rational>();
  if (sw.axis == "stages") {
    // Fixed total work: per-stage times shrink as the pipeline deepens.
    const int n = lv.get<int>();
    const Rational f{sw.levels.front().get<int>(), n};
    auto& g = *c.generator;
    g.num_stages = n;
    g.forward = scale_distribution(g.forward, f);
    g.backward = scale_distribution(g.backward, f);
    g.m_l = std::max<Micros>(1, f.scale_round(g.m_l));
    g.m_h = std::max(g.m_l, f.scale_round(g.m_h));
  }
  const Workload w = c.make_workload(static_cast<std::uint64_t>(cell.k));
  const std::uint64_t seed = c.scheduler.seed + static_cast<std::uint64_t>(cell.k);
  cell.lower = last_stage_work(w);
  if (sw.schedulers[cell.scheduler] == "1f1b") {
    if (w.num_chunks() != 1 || w.decompose_backward()) {
      cell.skipped = true;
      return;
    }
    FixedRunOptions fo;
    fo.jitter = c.jitter;
    fo.seed = seed;
    fo.record_messages = false;
    cell.makespan = run_fixed(build_1f1b_schedule(w), w, fo).makespan();
    return;
  }
  EngineOptions o;
  o.hint = c.scheduler.hint;
  o.buffer_limit = c.scheduler.buffer_limit;
  o.seed = seed;
  o.tp = c.tp;
  o.jitter = c.jitter;
  o.record_messages = false;
  cell.makespan = run_rrfp(w, o).metrics.makespan;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& config) {
  if (!config.sweep) throw ConfigError("$.sweep", "required for a sweep run");
  const SweepConfig& sw = *config.sweep;
  std::vector<Cell> cells;
  for (std::size_t l = 0; l < sw.levels.size(); ++l)
    for (std::size_t s = 0; s < sw.schedulers.size(); ++s)
      for (int k = 0; k < sw.paired_seeds; ++k) cells.push_back({l, s, k});

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(sw.threads > 0 ? static_cast<unsigned>(sw.threads) : hw,
                                              static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_m;
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        run_cell(config, sw, cells[i]);
      } catch (...) {
        std::lock_guard lk(error_m);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  std::vector<SweepRow> rows;
  std::vector<double> first_mean(sw.schedulers.size(), 0.0);
  for (std::size_t l = 0; l < sw.levels.size(); ++l) {
    for (std::size_t s = 0; s < sw.schedulers.size(); ++s) {
      std::vector<double> v, ratio;
      for (const auto& c : cells) {
        if (c.level != l || c.scheduler != s || c.skipped) continue;
        v.push_back(static_cast<double>(c.makespan));
        ratio.push_back(static_cast<double>(c.makespan) / static_cast<double>(std::max<Micros>(c.lower, 1)));
      }
      if (v.empty()) continue;
      SweepRow r;
      r.level = level_name(sw.levels[l]);
      r.scheduler = sw.schedulers[s];
      r.samples = static_cast<int>(v.size());
      for (double x : v) r.mean += x;
      r.mean /= static_cast<double>(v.size());
      for (double x : v) r.stddev += (x - r.mean) * (x - r.mean);
      r.stddev = v.size() > 1 ? std::sqrt(r.stddev / static_cast<double>(v.size() - 1)) : 0.0;
      for (double x : ratio) r.mean_ratio_to_L += x;
      r.mean_ratio_to_L /= static_cast<double>(ratio.size());
      if (l == 0) first_mean[s] = r.mean;
      r.slowdown_pct = first_mean[s] > 0 ? (r.mean / first_mean[s] - 1.0) * 100.0 : 0.0;
      rows.push_back(r);
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "level,scheduler,mean_T,std_T,slowdown_pct,mean_ratio_to_L,samples\n";
  for (const auto& r : rows)
    os << r.level << "," << r.scheduler << "," << r.mean << "," << r.stddev << "," << r.slowdown_pct << ","
       << r.mean_ratio_to_L << "," << r.samples << "\n";
  return os.str();
}

void to_json(json& j, const SweepRow& r) {
  j = {{"level", r.level},         {"scheduler", r.scheduler},       {"mean_T", r.mean},
       {"std_T", r.stddev},        {"slowdown_pct", r.slowdown_pct}, {"mean_ratio_to_L", r.mean_ratio_to_L},
       {"samples", r.samples}};
}

}  // namespace rrfp
