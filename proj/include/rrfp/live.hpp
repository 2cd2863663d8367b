#pragma once

#include <cstdint>

#include "rrfp/engine.hpp"

namespace rrfp {

struct LiveOptions {
  std::uint64_t seed = 0;
  TpGroup tp;
  JitterConfig jitter;
  bool record_messages = true;
  /// Wall seconds without global progress before the run is aborted.
  double watchdog_secs = 30.0;
  /// Tasks sleep until this many wall µs before their deadline, then spin.
  Micros spin_window = 200;
};

/// Wall-clock executor: per (stage, rank) one compute, one sender and one
/// receiver thread, joined by bounded in-process queues. Arbitration,
/// backpressure and TP agreement are the same objects the virtual engine
/// uses. Trace timestamps are wall µs since launch; `time_scale` is wall µs
/// per virtual µs. Throws WatchdogError if no task completes for
/// `watchdog_secs`.
RunResult run_live(const Workload& workload, const HintOrder& hint, int buffer_limit, Rational time_scale,
                   const LiveOptions& options = {});

}  // namespace rrfp
