#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrfp/types.hpp"
#include "rrfp/workload.hpp"

namespace rrfp {

enum class EventKind : std::uint8_t { Exec, Send, Recv, Coord, Block };

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

/// One timestamped trace row. Task fields are -1 for events that carry no
/// task (block intervals, coordination rounds without a proposal).
struct TraceEvent {
  Micros t_start = 0;
  Micros t_end = 0;
  int stage = 0;
  int rank = 0;
  int microbatch = -1;
  int chunk = -1;
  Direction direction = Direction::Forward;
  EventKind kind = EventKind::Exec;
  /// Exec: jitter added on top of the task latency.
  Micros injected = 0;
  /// Send: destination stage. Recv: source stage.
  int peer = -1;
  /// Coord: whether the round agreed.
  bool agreed = false;

  bool has_task() const { return microbatch >= 0; }
  TaskId task() const { return {stage, microbatch, chunk, direction}; }

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct TraceHeader {
  bool wall_clock = false;
  std::string scheduler;
  int num_stages = 0;
  int num_microbatches = 0;
  int num_chunks = 0;
  int tp_group_size = 1;
  std::uint64_t seed = 0;
  /// Wall-clock traces: wall µs per virtual µs.
  Rational time_scale{1, 1};

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct Trace {
  TraceHeader header;
  std::vector<TraceEvent> events;

  /// Largest exec end time.
  Micros makespan() const;
  /// Exec events only, in emission order.
  std::vector<TraceEvent> exec_events() const;

  friend bool operator==(const Trace&, const Trace&) = default;
};

void to_json(nlohmann::json& j, const TraceEvent& e);
void from_json(const nlohmann::json& j, TraceEvent& e);
void to_json(nlohmann::json& j, const TraceHeader& h);
void from_json(const nlohmann::json& j, TraceHeader& h);

/// JSON-lines: a header object on the first line, then one event per line.
void write_jsonl(std::ostream& os, const Trace& trace);
std::string to_jsonl(const Trace& trace);
Trace read_jsonl(std::istream& is);

/// Gantt rows: one line per exec event, "stage,rank,microbatch,chunk,direction,start,end,injected".
std::string gantt_csv(const Trace& trace);
/// Inverse of gantt_csv; returns exec events in row order.
std::vector<TraceEvent> read_gantt_csv(std::istream& is);

struct Violation {
  enum class Kind { Precedence, Serialization, Completeness, Duration, Malformed };
  Kind kind;
  std::string message;
  std::vector<TaskId> tasks;
  std::optional<EdgeKind> edge;
};

std::string_view to_string(Violation::Kind k);

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::size_t count(Violation::Kind k) const;
  std::string summary(std::size_t max_lines = 10) const;
};

struct ValidationOptions {
  /// Slack allowed above the nominal duration (wall-clock traces).
  Micros duration_tolerance = 0;
};

/// Checks precedence (with communication delay), per-stage serialization,
/// completeness (each task exactly once per TP rank) and duration fidelity.
/// Malformed rows are reported as violations; this never throws on trace content.
ValidationReport validate_trace(const Trace& trace, const Workload& workload,
                                const ValidationOptions& options = {});

}  // namespace rrfp
