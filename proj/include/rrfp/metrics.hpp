#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrfp/arbitration.hpp"
#include "rrfp/trace.hpp"

namespace rrfp {

struct StageMetrics {
  Micros compute = 0;
  Micros blocking = 0;
  Micros coord = 0;
  BufferOccupancy max_occupancy;
  int max_outstanding = 0;  // peak n_f - n_b

  friend bool operator==(const StageMetrics&, const StageMetrics&) = default;
};

struct Metrics {
  std::string scheduler;
  Micros makespan = 0;
  std::vector<StageMetrics> stages;
  std::int64_t exec_count = 0;
  std::int64_t coord_rounds = 0;
  std::int64_t deferred_rounds = 0;
  std::int64_t messages = 0;
  Micros injected = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Timing totals recovered from a trace, read off rank 0 of every stage.
/// Occupancy fields are left zero; executors that track buffers fill them in.
Metrics metrics_from_trace(const Trace& trace);

void to_json(nlohmann::json& j, const Metrics& m);

}  // namespace rrfp
