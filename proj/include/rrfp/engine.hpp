#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "rrfp/arbitration.hpp"
#include "rrfp/jitter.hpp"
#include "rrfp/metrics.hpp"
#include "rrfp/trace.hpp"
#include "rrfp/workload.hpp"

namespace rrfp {

/// Tensor-parallel group model. The group size itself lives on the workload.
struct TpGroup {
  /// Extra arrival delay seen by each rank, drawn per (edge, rank).
  Distribution skew = Distribution::constant(0);
  /// Duration of one metadata all-gather.
  Micros coord_cost = 0;

  void validate() const;
  friend bool operator==(const TpGroup&, const TpGroup&) = default;
};

void to_json(nlohmann::json& j, const TpGroup& g);
void from_json(const nlohmann::json& j, TpGroup& g);

struct EngineOptions {
  HintOrder hint;
  int buffer_limit = 32;
  std::uint64_t seed = 0;
  TpGroup tp;
  JitterConfig jitter;
  bool record_messages = true;
  /// Safety valve against runaway loops; 0 picks a bound from the task count.
  std::int64_t max_events = 0;
};

struct RunResult {
  Trace trace;
  Metrics metrics;
};

/// Raised when the executor stops making progress with tasks outstanding.
class WatchdogError : public std::runtime_error {
 public:
  WatchdogError(const std::string& what, std::string dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  /// Waiting state of every stage at the time of firing.
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

/// Discrete-event readiness-driven execution on a virtual clock.
RunResult run_rrfp(const Workload& workload, const EngineOptions& options);
RunResult run_rrfp(const Workload& workload, const HintOrder& hint, int buffer_limit, std::uint64_t seed);

}  // namespace rrfp
