#include "rrfp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "rrfp/engine.hpp"
#include "rrfp/fixed_schedule.hpp"

namespace rrfp {

BoundReport theorem_bound(const Workload& w) {
  w.validate();
  if (w.num_chunks() != 1) throw InvalidArgument("theorem bound requires a non-interleaved workload (C = 1)");
  if (!w.comm_delay().is_zero()) throw InvalidArgument("theorem bound requires zero communication delay");
  if (w.decompose_backward()) throw InvalidArgument("theorem bound requires undecomposed backwards");
  const int N = w.num_stages(), M = w.num_microbatches();
  BoundReport b;
  b.F_cal = forward_only_makespan(w);
  b.B_cal = backward_only_makespan(w);
  for (int j = 0; j < M; ++j) {
    Micros f_max = 0, b_max = 0;
    for (int i = 0; i < N; ++i) {
      f_max = std::max(f_max, w.forward_time(i, 0, j));
      b_max = std::max(b_max, w.backward_time(i, 0, j));
    }
    const Micros f_last = w.forward_time(N - 1, 0, j);
    const Micros b_last = w.backward_time(N - 1, 0, j);
    if (j >= 1) b.forward_imbalance += f_max - f_last;
    if (j <= M - 2) b.backward_imbalance += b_max - b_last;
    b.lower_bound_L += f_last + b_last;
    b.T_max = std::max(b.T_max, f_max + b_max);
  }
  b.upper_bound = b.F_cal + b.B_cal + b.forward_imbalance + b.backward_imbalance;
  return b;
}

Micros last_stage_work(const Workload& w) {
  Micros sum = 0;
  for (const auto& t : w.stage_tasks(w.num_stages() - 1)) sum += w.latency(t);
  return sum;
}

Micros brute_force_makespan(const Workload& w) {
  w.validate();
  const int n = w.num_tasks();
  if (n > kBruteForceMaxTasks)
    throw InvalidArgument("brute force is limited to " + std::to_string(kBruteForceMaxTasks) + " tasks, got " +
                          std::to_string(n));
  const TaskGraph graph(w);
  const int N = w.num_stages();
  std::vector<Micros> lat(static_cast<std::size_t>(n)), end(static_cast<std::size_t>(n), -1);
  std::vector<int> owner(static_cast<std::size_t>(n));
  std::vector<Micros> remaining(static_cast<std::size_t>(N), 0), stage_free(static_cast<std::size_t>(N), 0);
  for (int i = 0; i < n; ++i) {
    const TaskId t = w.task_at(i);
    lat[static_cast<std::size_t>(i)] = w.latency(t);
    owner[static_cast<std::size_t>(i)] = t.stage;
    remaining[static_cast<std::size_t>(t.stage)] += w.latency(t);
  }
  Micros best = std::numeric_limits<Micros>::max();

  // Semi-active schedules listed in start-time order: each task starts as
  // early as its stage and inputs allow, and starts never decrease.
  std::function<void(int, Micros, Micros)> dfs = [&](int placed, Micros last_start, Micros span) {
    if (placed == n) {
      best = std::min(best, span);
      return;
    }
    for (int s = 0; s < N; ++s) {
      const auto si = static_cast<std::size_t>(s);
      if (remaining[si] > 0 && std::max(stage_free[si], last_start) + remaining[si] >= best) return;
    }
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      if (end[ii] >= 0) continue;
      const auto si = static_cast<std::size_t>(owner[ii]);
      Micros start = stage_free[si];
      bool ready = true;
      for (const auto& p : graph.predecessors(i)) {
        const Micros e = end[static_cast<std::size_t>(p.task)];
        if (e < 0) {
          ready = false;
          break;
        }
        start = std::max(start, e + graph.edge_delay(p.edge));
      }
      if (!ready || start < last_start) continue;
      const Micros prev_free = stage_free[si];
      end[ii] = start + lat[ii];
      stage_free[si] = end[ii];
      remaining[si] -= lat[ii];
      dfs(placed + 1, start, std::max(span, end[ii]));
      remaining[si] += lat[ii];
      stage_free[si] = prev_free;
      end[ii] = -1;
    }
  };
  dfs(0, 0, 0);
  return best;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

StatsReport bottleneck_stats(const std::vector<std::vector<Micros>>& rows, int N) {
  if (N < 1) throw InvalidArgument("bottleneck stats need at least one stage");
  StatsReport r;
  r.num_stages = N;
  r.rows = rows.size();
  const auto n = static_cast<std::size_t>(N);
  std::vector<std::size_t> wins(n, 0);
  std::vector<std::vector<double>> ratios(n);
  std::size_t violating = 0;
  for (const auto& row : rows) {
    if (row.size() != n) throw InvalidArgument("every row must hold one latency per stage");
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (row[i] >= row[arg]) arg = i;
    ++wins[arg];
    const Micros last = row[n - 1];
    for (std::size_t i = 0; i < n; ++i)
      ratios[i].push_back(last > 0 ? static_cast<double>(row[i]) / static_cast<double>(last)
                                   : std::numeric_limits<double>::infinity());
    if (arg != n - 1) {
      ++violating;
      r.rho_hat = std::max(r.rho_hat, ratios[arg].back());
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    r.argmax_fraction.push_back(rows.empty() ? 0.0 : static_cast<double>(wins[i]) / static_cast<double>(rows.size()));
    r.p85.push_back(percentile(ratios[i], 85));
    r.p90.push_back(percentile(ratios[i], 90));
    r.p95.push_back(percentile(ratios[i], 95));
  }
  r.p_hat = rows.empty() ? 0.0 : static_cast<double>(violating) / static_cast<double>(rows.size());
  return r;
}

StatsReport bottleneck_stats(const std::vector<Workload>& iterations) {
  if (iterations.empty()) throw InvalidArgument("no iterations given");
  const int N = iterations.front().num_stages();
  std::vector<std::vector<Micros>> rows;
  for (const auto& w : iterations) {
    if (w.num_stages() != N) throw InvalidArgument("iterations disagree on the stage count");
    for (int j = 0; j < w.num_microbatches(); ++j) {
      std::vector<Micros> row;
      for (int i = 0; i < N; ++i) row.push_back(w.forward_time(i, 0, j));
      rows.push_back(std::move(row));
    }
  }
  return bottleneck_stats(rows, N);
}

StatsReport bottleneck_stats(const std::vector<Trace>& traces) {
  if (traces.empty()) throw InvalidArgument("no traces given");
  const int N = traces.front().header.num_stages;
  std::vector<std::vector<Micros>> rows;
  for (const auto& t : traces) {
    if (t.header.num_stages != N) throw InvalidArgument("traces disagree on the stage count");
    const int M = t.header.num_microbatches, C = std::max(t.header.num_chunks, 1);
    std::vector<std::vector<Micros>> block(static_cast<std::size_t>(M * C),
                                           std::vector<Micros>(static_cast<std::size_t>(N), 0));
    for (const auto& e : t.events) {
      if (e.kind != EventKind::Exec || e.rank != 0 || e.direction != Direction::Forward) continue;
      if (e.microbatch < 0 || e.microbatch >= M || e.chunk < 0 || e.chunk >= C || e.stage < 0 || e.stage >= N)
        continue;
      block[static_cast<std::size_t>(e.chunk * M + e.microbatch)][static_cast<std::size_t>(e.stage)] =
          e.t_end - e.t_start;
    }
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return bottleneck_stats(rows, N);
}

bool BreakdownReport::identity_holds() const {
  return std::all_of(rows.begin(), rows.end(), [](const BreakdownRow& r) { return r.identity_holds(); });
}

BreakdownReport breakdown(const Trace& trace) {
  BreakdownReport b;
  b.makespan = trace.makespan();
  const int N = trace.header.num_stages, R = std::max(trace.header.tp_group_size, 1);
  for (int s = 0; s < N; ++s)
    for (int r = 0; r < R; ++r) b.rows.push_back({s, r, 0, 0, 0, b.makespan});
  for (const auto& e : trace.events) {
    if (e.stage < 0 || e.stage >= N || e.rank < 0 || e.rank >= R) continue;
    auto& row = b.rows[static_cast<std::size_t>(e.stage * R + e.rank)];
    const Micros d = e.t_end - e.t_start;
    switch (e.kind) {
      case EventKind::Exec:
        row.compute += d;
        break;
      case EventKind::Block:
        row.blocking += d;
        break;
      case EventKind::Coord:
        row.coord += d;
        break;
      case EventKind::Send:
      case EventKind::Recv:
        break;
    }
  }
  for (const auto& row : b.rows) {
    b.total_compute += row.compute;
    b.total_blocking += row.blocking;
    b.total_coord += row.coord;
  }
  return b;
}

std::vector<CurvePoint> corollary_ratio_curve(const GeneratorSpec& spec, const std::vector<int>& microbatches,
                                              int seeds, const HintOrder& hint, int buffer_limit,
                                              std::uint64_t seed_base) {
  if (seeds < 1) throw InvalidArgument("need at least one seed per point");
  std::vector<CurvePoint> curve;
  for (int m : microbatches) {
    GeneratorSpec g = spec;
    g.num_microbatches = m;
    CurvePoint p;
    p.num_microbatches = m;
    p.min_ratio = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (int k = 0; k < seeds; ++k) {
      const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(k);
      const Workload w = generate_workload(g, seed);
      const auto run = run_rrfp(w, hint, buffer_limit, seed);
      const double ratio = static_cast<double>(run.metrics.makespan) / static_cast<double>(last_stage_work(w));
      sum += ratio;
      p.min_ratio = std::min(p.min_ratio, ratio);
      p.max_ratio = std::max(p.max_ratio, ratio);
    }
    p.samples = seeds;
    p.mean_ratio = sum / seeds;
    curve.push_back(p);
  }
  return curve;
}

void to_json(nlohmann::json& j, const BoundReport& b) {
  j = {{"F_cal", b.F_cal},
       {"B_cal", b.B_cal},
       {"forward_imbalance", b.forward_imbalance},
       {"backward_imbalance", b.backward_imbalance},
       {"upper_bound", b.upper_bound},
       {"lower_bound_L", b.lower_bound_L},
       {"T_max", b.T_max}};
}

void to_json(nlohmann::json& j, const StatsReport& s) {
  j = {{"num_stages", s.num_stages}, {"rows", s.rows},   {"argmax_fraction", s.argmax_fraction},
       {"p85", s.p85},               {"p90", s.p90},     {"p95", s.p95},
       {"p_hat", s.p_hat},           {"rho_hat", s.rho_hat}};
}

void to_json(nlohmann::json& j, const BreakdownReport& b) {
  j = nlohmann::json::object();
  j["makespan"] = b.makespan;
  j["total_compute"] = b.total_compute;
  j["total_blocking"] = b.total_blocking;
  j["total_coord"] = b.total_coord;
  j["identity_holds"] = b.identity_holds();
  auto rows = nlohmann::json::array();
  for (const auto& r : b.rows)
    rows.push_back({{"stage", r.stage},
                    {"rank", r.rank},
                    {"compute", r.compute},
                    {"blocking", r.blocking},
                    {"coord", r.coord},
                    {"iteration", r.iteration}});
  j["rows"] = std::move(rows);
}

void to_json(nlohmann::json& j, const CurvePoint& p) {
  j = {{"num_microbatches", p.num_microbatches},
       {"mean_ratio", p.mean_ratio},
       {"min_ratio", p.min_ratio},
       {"max_ratio", p.max_ratio},
       {"samples", p.samples}};
}

std::string stats_csv(const StatsReport& s) {
  std::ostringstream os;
  os << "stage,argmax_fraction,p85,p90,p95\n";
  for (int i = 0; i < s.num_stages; ++i) {
    const auto k = static_cast<std::size_t>(i);
    os << i << "," << s.argmax_fraction[k] << "," << s.p85[k] << "," << s.p90[k] << "," << s.p95[k] << "\n";
  }
  return os.str();
}

std::string breakdown_csv(const BreakdownReport& b) {
  std::ostringstream os;
  os << "stage,rank,compute,blocking,coord,iteration\n";
  for (const auto& r : b.rows)
    os << r.stage << "," << r.rank << "," << r.compute << "," << r.blocking << "," << r.coord << "," << r.iteration
       << "\n";
  return os.str();
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "num_microbatches,mean_ratio,min_ratio,max_ratio,samples\n";
  for (const auto& p : curve)
    os << p.num_microbatches << "," << p.mean_ratio << "," << p.min_ratio << "," << p.max_ratio << "," << p.samples
       << "\n";
  return os.str();
}

}  // namespace rrfp
