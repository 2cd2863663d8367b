// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Every tolerance and corpus size used below is pinned here.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rrfp/analysis.hpp"
#include "rrfp/engine.hpp"
#include "rrfp/fixed_schedule.hpp"
#include "rrfp/harness.hpp"
#include "rrfp/live.hpp"

namespace {

using namespace rrfp;

constexpr int kBoundCorpus = 1000;
constexpr int kBoundMaxStages = 8;
constexpr int kBoundMaxMicrobatches = 16;
constexpr int kDeadlockSeedsPerCell = 11;  // 48 cells -> 528 configs
constexpr int kLiveRuns = 200;
constexpr double kLiveWatchdogSecs = 30.0;
constexpr Micros kLiveDurationTolerance = 20000;  // wall µs of scheduling slack per task
constexpr int kTpRunsPerGroupSize = 60;
constexpr int kJitterSeeds = 10;
constexpr int kHintSeeds = 10;
constexpr double kHintSpread = 0.02;
constexpr double kFPriorityGap = 0.02;
constexpr double kSaturationTolerance = 0.03;
constexpr int kRatioSeeds = 10;
constexpr double kRatioCeiling = 1.25;
constexpr Micros kOneFOneBOracle = 600;  // hand event simulation, N=2 M=2 at 100

struct Result {
  bool pass = false;
  std::string detail;
};

// Every trace produced anywhere in this run goes through here.
struct TraceAudit {
  long traces = 0;
  long invalid = 0;
  long identity_broken = 0;
  long coord_without_tp = 0;
  std::string first_invalid;

  void check(const Trace& t, const Workload& w, Micros tolerance = 0) {
    ++traces;
    ValidationOptions vo;
    vo.duration_tolerance = tolerance;
    const auto r = validate_trace(t, w, vo);
    if (!r.ok()) {
      if (invalid++ == 0) first_invalid = t.header.scheduler + ": " + r.summary(3);
    }
    const auto b = breakdown(t);
    if (!b.identity_holds()) ++identity_broken;
    if (w.tp_group_size() == 1 && b.total_coord != 0) ++coord_without_tp;
  }
};

TraceAudit audit;

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

std::vector<Workload> bound_corpus() {
  std::vector<Workload> out;
  Xoshiro256 rng(20240601);
  for (int i = 0; i < kBoundCorpus; ++i) {
    GeneratorSpec g;
    g.num_stages = static_cast<int>(rng.uniform_int(1, kBoundMaxStages));
    g.num_microbatches = static_cast<int>(rng.uniform_int(1, kBoundMaxMicrobatches));
    switch (i % 3) {
      case 0:
        g.forward = Distribution::constant(rng.uniform_int(1, 200));
        g.backward = Distribution::constant(rng.uniform_int(1, 400));
        break;
      case 1:
        g.forward = Distribution::uniform(20, 200);
        g.backward = Distribution::uniform(40, 400);
        break;
      default:
        g.forward = Distribution::lognormal(4.0, 0.6, 1, 5000);
        g.backward = Distribution::lognormal(4.7, 0.6, 1, 5000);
        break;
    }
    g.m_l = 1;
    g.m_h = 5000;
    out.push_back(generate_workload(g, rng()));
  }
  return out;
}

Result criterion_bound(const std::vector<Workload>& corpus) {
  int violations = 0;
  double worst = 0;
  for (const auto& w : corpus) {
    const auto b = theorem_bound(w);
    const auto run = run_rrfp(w, HintOrder{}, 32, 0);
    audit.check(run.trace, w);
    if (run.metrics.makespan > b.upper_bound) ++violations;
    worst = std::max(worst, static_cast<double>(run.metrics.makespan) / static_cast<double>(b.upper_bound));
  }
  return {violations == 0, fmt("%.0f instances, %.0f above the bound, max makespan/bound %.4f",
                               static_cast<double>(corpus.size()), violations, worst)};
}

Result criterion_lower_bound(const std::vector<Workload>& corpus) {
  long below = 0, runs = 0;
  for (const auto& w : corpus) {
    const Micros L = last_stage_work(w);
    auto record = [&](const Trace& t, const Workload& wl) {
      audit.check(t, wl);
      ++runs;
      if (t.makespan() < L) ++below;
    };
    FixedRunOptions fo;
    fo.scheduler_name = "1f1b";
    record(run_fixed(build_1f1b_schedule(w), w, fo), w);
    for (const char* h : {"bf", "fb", "bprio", "fprio"}) record(run_rrfp(w, HintOrder::parse(h), 32, 0).trace, w);
    Workload split = w;
    split.set_decompose_backward(true);
    record(run_rrfp(split, HintOrder::parse("bfw"), 32, 0).trace, split);
  }
  return {below == 0, fmt("%.0f runs over 6 schedulers, %.0f below L", runs, below)};
}

struct DeadlockStats {
  long runs = 0, incomplete = 0, watchdog = 0, over_bound = 0;
  std::string first_failure;
};

DeadlockStats virtual_corpus() {
  DeadlockStats s;
  std::uint64_t seed = 0;
  for (int limit : {1, 2, 4, 32})
    for (int c : {1, 2, 4})
      for (int r : {1, 2})
        for (const char* j : {"J0", "J3"})
          for (int k = 0; k < kDeadlockSeedsPerCell; ++k, ++seed) {
            Xoshiro256 rng(seed * 7919 + 1);
            GeneratorSpec g;
            g.num_stages = static_cast<int>(rng.uniform_int(1, 6));
            g.num_microbatches = static_cast<int>(rng.uniform_int(1, 8));
            g.num_chunks = c;
            g.tp_group_size = r;
            g.forward = Distribution::uniform(10, 300);
            g.backward = Distribution::uniform(10, 600);
            g.comm_delay = Distribution::uniform(0, rng.uniform_int(0, 50));
            g.decompose_backward = k % 4 == 3;
            const auto w = generate_workload(g, seed);
            EngineOptions o;
            o.hint = HintOrder::parse(g.decompose_backward ? "bfw" : (k % 3 == 1 ? "fprio" : "bf"));
            o.buffer_limit = limit;
            o.seed = seed;
            o.jitter = jitter_preset(j);
            o.tp.skew = Distribution::uniform(0, 40);
            o.tp.coord_cost = 3;
            ++s.runs;
            try {
              const auto run = run_rrfp(w, o);
              audit.check(run.trace, w);
              if (!validate_trace(run.trace, w).ok()) ++s.incomplete;
              const int bound = c == 1 ? limit : limit + c;
              for (const auto& st : run.metrics.stages)
                if (st.max_occupancy.max_component() > bound) ++s.over_bound;
            } catch (const WatchdogError& e) {
              if (s.watchdog++ == 0) s.first_failure = e.what();
            }
          }
  return s;
}

// Collective-relevant sequences must match across the ranks of each stage.
bool ranks_agree(const Trace& t, int R) {
  std::map<int, std::vector<std::vector<TaskId>>> seq;
  for (const auto& e : t.events) {
    if (e.kind != EventKind::Exec || !is_collective_relevant(e.task())) continue;
    auto& ranks = seq[e.stage];
    ranks.resize(static_cast<std::size_t>(R));
    ranks[static_cast<std::size_t>(e.rank)].push_back(e.task());
  }
  for (const auto& [stage, ranks] : seq)
    for (const auto& r : ranks)
      if (r != ranks.front()) return false;
  return true;
}

Result criterion_collective_order(long& live_tp_runs, long& live_tp_mismatch) {
  long runs = 0, mismatched = 0;
  for (int R : {2, 4})
    for (int k = 0; k < kTpRunsPerGroupSize; ++k) {
      GeneratorSpec g;
      g.num_stages = 2 + k % 4;
      g.num_microbatches = 2 + k % 7;
      g.num_chunks = 1 + k % 2;
      g.tp_group_size = R;
      g.forward = Distribution::uniform(10, 200);
      g.backward = Distribution::uniform(10, 400);
      g.comm_delay = Distribution::uniform(0, 30);
      const auto w = generate_workload(g, static_cast<std::uint64_t>(k));
      EngineOptions o;
      o.buffer_limit = 1 + k % 4;
      o.seed = static_cast<std::uint64_t>(k);
      o.jitter = jitter_preset(k % 2 ? "J3" : "J1");
      o.tp.skew = Distribution::uniform(0, 80);
      o.tp.coord_cost = 5;
      const auto run = run_rrfp(w, o);
      audit.check(run.trace, w);
      ++runs;
      if (!ranks_agree(run.trace, R)) ++mismatched;
    }
  return {mismatched == 0 && live_tp_mismatch == 0,
          fmt("%.0f virtual runs and %.0f live runs with skew, %.0f rank disagreements", runs, live_tp_runs,
              mismatched + live_tp_mismatch)};
}

Result criterion_live(long& tp_runs, long& tp_mismatch) {
  long firings = 0, incomplete = 0;
  std::string first;
  for (int i = 0; i < kLiveRuns; ++i) {
    GeneratorSpec g;
    g.num_stages = 2 + i % 3;
    g.num_microbatches = 2 + i % 5;
    g.num_chunks = 1 + (i / 2) % 2;
    g.tp_group_size = 1 + (i / 4) % 2;
    g.forward = Distribution::uniform(20, 150);
    g.backward = Distribution::uniform(20, 300);
    g.comm_delay = Distribution::uniform(0, 30);
    const auto w = generate_workload(g, static_cast<std::uint64_t>(i));
    LiveOptions o;
    o.seed = static_cast<std::uint64_t>(i);
    o.watchdog_secs = kLiveWatchdogSecs;
    o.tp.skew = Distribution::uniform(0, 30);
    o.tp.coord_cost = 5;
    o.jitter = jitter_preset(i % 3 == 0 ? "J1" : "J0");
    const int limit = 1 + i % 2;
    try {
      const auto run = run_live(w, HintOrder{}, limit, {1, 1}, o);
      audit.check(run.trace, w, kLiveDurationTolerance);
      ValidationOptions vo;
      vo.duration_tolerance = kLiveDurationTolerance;
      if (validate_trace(run.trace, w, vo).count(Violation::Kind::Completeness) > 0) ++incomplete;
      if (w.tp_group_size() > 1) {
        ++tp_runs;
        if (!ranks_agree(run.trace, w.tp_group_size())) ++tp_mismatch;
      }
    } catch (const WatchdogError& e) {
      if (firings++ == 0) first = e.what();
    }
  }
  return {firings == 0 && incomplete == 0,
          fmt("%.0f runs at limit 1/2, C 1/2, %.0f watchdog firings, %.0f incomplete", kLiveRuns, firings,
              incomplete) +
              (first.empty() ? "" : " (" + first + ")")};
}

std::map<std::pair<std::string, std::string>, SweepRow> sweep_preset(const std::string& name,
                                                                      std::function<void(nlohmann::json&)> tweak) {
  auto doc = experiment_presets().at(name);
  tweak(doc);
  std::map<std::pair<std::string, std::string>, SweepRow> rows;
  for (const auto& r : run_sweep(parse_config(doc))) rows[{r.level, r.scheduler}] = r;
  return rows;
}

Result criterion_jitter() {
  auto rows = sweep_preset("jitter", [](nlohmann::json& d) { d["sweep"]["paired_seeds"] = kJitterSeeds; });
  bool ok = true;
  std::string detail;
  for (const char* lvl : {"J0", "J1", "J2", "J3"}) {
    const auto& bf = rows.at({lvl, "rrfp"});
    const auto& fx = rows.at({lvl, "1f1b"});
    ok &= bf.mean < fx.mean;
    if (std::string(lvl) == "J2" || std::string(lvl) == "J3") ok &= bf.slowdown_pct < fx.slowdown_pct;
    detail += std::string(lvl) +
              fmt(" BF %.0f (+%.1f%%) 1F1B %.0f (+%.1f%%); ", bf.mean, bf.slowdown_pct, fx.mean, fx.slowdown_pct);
  }
  if (detail.size() >= 2) detail.resize(detail.size() - 2);
  return {ok, detail};
}

Result criterion_hints() {
  auto rows = sweep_preset("hint-sensitivity", [](nlohmann::json& d) { d["sweep"]["paired_seeds"] = kHintSeeds; });
  const double bf = rows.at({"bf", "rrfp"}).mean, fb = rows.at({"fb", "rrfp"}).mean;
  const double bp = rows.at({"bprio", "rrfp"}).mean, fp = rows.at({"fprio", "rrfp"}).mean;
  const double hi = std::max({bf, fb, bp}), lo = std::min({bf, fb, bp});
  const bool ok = bf <= fb && bf <= bp && hi <= lo * (1 + kHintSpread) && fp >= hi * (1 + kFPriorityGap);
  return {ok, fmt("FB/BF %.4f, Bprio/BF %.4f, Fprio/BF %.4f", fb / bf, bp / bf, fp / bf) +
                  fmt(" (Fprio over next worst %.2f%%)", 100 * (fp / hi - 1))};
}

Result criterion_saturation() {
  auto rows = sweep_preset("buffer-limit", [](nlohmann::json&) {});
  const double t4 = rows.at({"4", "rrfp"}).mean, t16 = rows.at({"16", "rrfp"}).mean;
  const double t48 = rows.at({"48", "rrfp"}).mean;
  const bool ok = t16 <= t48 * (1 + kSaturationTolerance) && t16 >= t48 * (1 - kSaturationTolerance) && t4 > t16;
  return {ok, fmt("T16/T48 %.4f, T4/T16 %.4f", t16 / t48, t4 / t16)};
}

Result criterion_ratio_decay() {
  GeneratorSpec g;
  g.num_stages = 4;
  g.forward = Distribution::uniform(80, 120);
  g.backward = Distribution::uniform(160, 240);
  g.skew = GeneratorSpec::Skew::HeavyLast;
  g.skew_factor = {2, 1};
  std::vector<Workload> iters;
  for (int m : {8, 64})
    for (int k = 0; k < kRatioSeeds; ++k) {
      g.num_microbatches = m;
      iters.push_back(generate_workload(g, static_cast<std::uint64_t>(k)));
    }
  const double p_hat = bottleneck_stats(iters).p_hat;
  const auto curve = corollary_ratio_curve(g, {8, 64}, kRatioSeeds);
  const bool ok = p_hat == 0.0 && curve[1].mean_ratio < curve[0].mean_ratio && curve[1].mean_ratio <= kRatioCeiling &&
                  curve[1].min_ratio >= 1.0;
  return {ok, fmt("p_hat %.3f, mean C/L %.4f at M=8, %.4f at M=64", p_hat, curve[0].mean_ratio, curve[1].mean_ratio)};
}

Result criterion_oracles() {
  long instances = 0, bad = 0;
  Xoshiro256 rng(12);
  for (int n = 1; n <= 6; ++n)
    for (int m = 1; m <= 6; ++m) {
      if (2 * n * m > kBruteForceMaxTasks) continue;
      for (int k = 0; k < 8; ++k) {
        GeneratorSpec g;
        g.num_stages = n;
        g.num_microbatches = m;
        g.forward = k == 0 ? Distribution::constant(10) : Distribution::uniform(1, 20);
        g.backward = k == 0 ? Distribution::constant(10) : Distribution::uniform(1, 40);
        if (k >= 6) g.comm_delay = Distribution::uniform(0, 5);
        const auto w = generate_workload(g, rng());
        const auto bf = run_rrfp(w, HintOrder{}, 32, 0);
        audit.check(bf.trace, w);
        const Micros L = last_stage_work(w), opt = brute_force_makespan(w);
        ++instances;
        if (!(L <= opt && opt <= bf.metrics.makespan)) ++bad;
      }
    }
  Workload tiny(2, 2);
  tiny.fill(100, 100);
  const auto fixed = run_fixed(build_1f1b_schedule(tiny), tiny);
  audit.check(fixed, tiny);
  const bool ok = bad == 0 && fixed.makespan() == kOneFOneBOracle;
  return {ok, fmt("%.0f instances with at most 12 tasks, %.0f outside L <= OPT <= BF; 1F1B N=2 M=2: %.0f (oracle %.0f)",
                  instances, bad, fixed.makespan(), kOneFOneBOracle)};
}

void audit_fixed_modes() {
  // 1F1B under jitter, delay and TP, to widen the validity corpus.
  for (int k = 0; k < 40; ++k) {
    GeneratorSpec g;
    g.num_stages = 1 + k % 6;
    g.num_microbatches = 1 + k % 9;
    g.tp_group_size = 1 + k % 2;
    g.forward = Distribution::uniform(10, 100);
    g.backward = Distribution::uniform(10, 200);
    g.comm_delay = Distribution::uniform(0, 20);
    const auto w = generate_workload(g, static_cast<std::uint64_t>(k));
    FixedRunOptions fo;
    fo.jitter = jitter_preset(k % 2 ? "J3" : "J2");
    fo.seed = static_cast<std::uint64_t>(k);
    audit.check(run_fixed(build_1f1b_schedule(w), w, fo), w);
  }
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<int, Result> results;
  const auto corpus = bound_corpus();
  results[1] = criterion_bound(corpus);
  results[2] = criterion_lower_bound(corpus);

  const auto dl = virtual_corpus();
  results[4] = {dl.watchdog == 0 && dl.incomplete == 0,
                fmt("%.0f configs, %.0f watchdog firings, %.0f incomplete", dl.runs, dl.watchdog, dl.incomplete) +
                    (dl.first_failure.empty() ? "" : " (" + dl.first_failure + ")")};
  results[6] = {dl.over_bound == 0 && dl.watchdog == 0,
                fmt("%.0f stage buffers above limit (C=1) or limit+C (C>1) across %.0f configs", dl.over_bound,
                    dl.runs)};

  long live_tp_runs = 0, live_tp_mismatch = 0;
  results[5] = criterion_live(live_tp_runs, live_tp_mismatch);
  results[7] = criterion_collective_order(live_tp_runs, live_tp_mismatch);
  results[8] = criterion_jitter();
  results[9] = criterion_hints();
  results[10] = criterion_saturation();
  results[11] = criterion_ratio_decay();
  results[12] = criterion_oracles();
  audit_fixed_modes();

  results[3] = {audit.invalid == 0, fmt("%.0f traces checked, %.0f with violations", audit.traces, audit.invalid) +
                                        (audit.first_invalid.empty() ? "" : " (" + audit.first_invalid + ")")};
  results[13] = {audit.identity_broken == 0 && audit.coord_without_tp == 0,
                 fmt("%.0f traces, %.0f identity breaks, %.0f with TP coord at R=1", audit.traces,
                     audit.identity_broken, audit.coord_without_tp)};

  static const char* names[] = {"",
                                "theorem upper bound",
                                "lower bound L",
                                "trace validity",
                                "deadlock freedom (virtual)",
                                "deadlock freedom (live)",
                                "buffer bound",
                                "collective order",
                                "jitter robustness",
                                "hint sensitivity",
                                "buffer-limit saturation",
                                "makespan-to-L decay",
                                "oracle equivalence",
                                "breakdown identity"};
  int failed = 0;
  for (int c = 1; c <= 13; ++c) {
    const auto& r = results.at(c);
    failed += !r.pass;
    std::printf("criterion %2d %s  %-28s %s\n", c, r.pass ? "PASS" : "FAIL", names[c], r.detail.c_str());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d/13 passed in %.1f s\n", 13 - failed, secs);
  return failed == 0 ? 0 : 1;
}
