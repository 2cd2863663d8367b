#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrfp/arbitration.hpp"
#include "rrfp/trace.hpp"
#include "rrfp/workload.hpp"

namespace rrfp {

/// Makespan bounds for the BF hint in the non-interleaved, zero-delay setting.
struct BoundReport {
  Micros F_cal = 0;               // forward-only pipeline makespan
  Micros B_cal = 0;               // backward-only pipeline makespan
  Micros forward_imbalance = 0;   // sum_{j=1}^{M-1} (F_max^j - F_last^j)
  Micros backward_imbalance = 0;  // sum_{j=0}^{M-2} (B_max^j - B_last^j)
  Micros upper_bound = 0;
  Micros lower_bound_L = 0;       // sum_j (F_last^j + B_last^j)
  Micros T_max = 0;               // max_j (F_max^j + B_max^j)

  friend bool operator==(const BoundReport&, const BoundReport&) = default;
};

/// Requires C = 1, zero communication delay and no backward decomposition.
BoundReport theorem_bound(const Workload& workload);

/// Last-stage work; a lower bound on any schedule. Valid for every workload
/// (sums all chunks and, under decomposition, W tasks of the last stage).
Micros last_stage_work(const Workload& workload);

inline constexpr int kBruteForceMaxTasks = 12;

/// Exact minimum makespan by exhaustive search over semi-active schedules.
/// Honours communication delays; at most kBruteForceMaxTasks tasks.
Micros brute_force_makespan(const Workload& workload);

/// Bottleneck statistics over forward latencies. Each row holds one
/// microbatch's forward time at every stage.
struct StatsReport {
  int num_stages = 0;
  std::size_t rows = 0;
  /// Fraction of rows whose argmax stage is i (ties go to the higher stage).
  std::vector<double> argmax_fraction;
  /// Percentiles of F_i / F_last per stage (linear interpolation).
  std::vector<double> p85, p90, p95;
  /// Fraction of rows where the last stage is not the bottleneck.
  double p_hat = 0.0;
  /// max F_max / F_last over those rows; 1 when there are none.
  double rho_hat = 1.0;
};

StatsReport bottleneck_stats(const std::vector<std::vector<Micros>>& rows, int num_stages);
/// One row per microbatch, chunk 0.
StatsReport bottleneck_stats(const std::vector<Workload>& iterations);
/// Forward exec durations (rank 0) of one or more traces, one row per microbatch and chunk.
StatsReport bottleneck_stats(const std::vector<Trace>& traces);

/// Linear-interpolation percentile of an unsorted sample, q in [0, 100].
double percentile(std::vector<double> values, double q);

struct BreakdownRow {
  int stage = 0;
  int rank = 0;
  Micros compute = 0;
  Micros blocking = 0;
  Micros coord = 0;
  Micros iteration = 0;  // trace makespan

  bool identity_holds() const { return compute + blocking + coord == iteration; }
};

struct BreakdownReport {
  std::vector<BreakdownRow> rows;
  Micros total_compute = 0, total_blocking = 0, total_coord = 0;
  Micros makespan = 0;

  bool identity_holds() const;
};

BreakdownReport breakdown(const Trace& trace);

struct CurvePoint {
  int num_microbatches = 0;
  double mean_ratio = 0.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  int samples = 0;
};

/// Mean makespan / L of the given hint over `seeds` generated workloads per M.
std::vector<CurvePoint> corollary_ratio_curve(const GeneratorSpec& spec, const std::vector<int>& microbatches,
                                              int seeds, const HintOrder& hint = {}, int buffer_limit = 32,
                                              std::uint64_t seed_base = 0);

void to_json(nlohmann::json& j, const BoundReport& b);
void to_json(nlohmann::json& j, const StatsReport& s);
void to_json(nlohmann::json& j, const BreakdownReport& b);
void to_json(nlohmann::json& j, const CurvePoint& p);

std::string stats_csv(const StatsReport& s);
std::string breakdown_csv(const BreakdownReport& b);
std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace rrfp
