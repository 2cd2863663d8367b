#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrfp/rng.hpp"
#include "rrfp/types.hpp"

namespace rrfp {

/// A duration distribution. Samples are rounded to integer microseconds.
struct Distribution {
  enum class Kind { Constant, Uniform, LogNormal };

  Kind kind = Kind::Constant;
  Micros value = 0;       // Constant
  Micros lo = 0, hi = 0;  // Uniform bounds, inclusive; LogNormal clamp when hi > 0
  double mu = 0.0, sigma = 0.0;

  static Distribution constant(Micros v) { return {Kind::Constant, v}; }
  static Distribution uniform(Micros lo, Micros hi) { return {Kind::Uniform, 0, lo, hi}; }
  static Distribution lognormal(double mu, double sigma, Micros lo = 0, Micros hi = 0) {
    return {Kind::LogNormal, 0, lo, hi, mu, sigma};
  }

  Micros sample(Xoshiro256& rng) const;
  bool is_zero() const { return kind == Kind::Constant && value == 0; }
  void validate(const std::string& path) const;

  friend bool operator==(const Distribution&, const Distribution&) = default;
};

/// Per-edge communication delay. Each inter-stage edge draws its delay from
/// a stream keyed by the edge, so delays are a pure function of the model.
struct CommDelayModel {
  Distribution dist = Distribution::constant(0);
  std::uint64_t seed = 0;

  Micros delay(const TaskId& from, const TaskId& to) const;
  bool is_zero() const { return dist.is_zero(); }

  friend bool operator==(const CommDelayModel&, const CommDelayModel&) = default;
};

enum class EdgeKind {
  InterStageForward,
  InterStageBackward,
  LocalForwardToBackward,
  ChunkWrap,
  BackwardToWeight,
};

std::string_view to_string(EdgeKind k);

struct DependencyEdge {
  TaskId from;
  TaskId to;
  EdgeKind kind;

  /// Same-stage edges never pay communication delay.
  bool is_local() const { return from.stage == to.stage; }

  friend bool operator==(const DependencyEdge&, const DependencyEdge&) = default;
};

/// Static description of one training iteration.
///
/// Latency tables are indexed [stage][chunk][microbatch]. When backward
/// decomposition is enabled the stored backward time is split into a
/// B-input part round(β·B) and a weight-update part B - round(β·B).
class Workload {
 public:
  Workload() = default;
  Workload(int num_stages, int num_microbatches, int num_chunks = 1, int tp_group_size = 1);

  int num_stages() const { return num_stages_; }
  int num_microbatches() const { return num_microbatches_; }
  int num_chunks() const { return num_chunks_; }
  int tp_group_size() const { return tp_group_size_; }
  bool decompose_backward() const { return decompose_backward_; }
  const Rational& backward_split_fraction() const { return backward_split_; }
  const CommDelayModel& comm_delay() const { return comm_delay_; }

  void set_tp_group_size(int r);
  void set_comm_delay(CommDelayModel m) { comm_delay_ = std::move(m); }
  void set_decompose_backward(bool on, Rational beta = {1, 2});

  /// Raw (undecomposed) per-stage times.
  Micros forward_time(int stage, int chunk, int mb) const;
  Micros backward_time(int stage, int chunk, int mb) const;
  void set_forward_time(int stage, int chunk, int mb, Micros v);
  void set_backward_time(int stage, int chunk, int mb, Micros v);
  /// Sets every forward (backward) entry to `v`.
  void fill(Micros forward, Micros backward);

  /// Execution time of a task, honouring backward decomposition.
  Micros latency(const TaskId& t) const;

  int num_directions() const { return decompose_backward_ ? 3 : 2; }
  int num_tasks() const { return num_directions() * num_stages_ * num_chunks_ * num_microbatches_; }
  int tasks_per_stage() const { return num_directions() * num_chunks_ * num_microbatches_; }

  /// Dense index in [0, num_tasks()). Throws on out-of-range ids.
  int index(const TaskId& t) const;
  TaskId task_at(int index) const;
  bool contains(const TaskId& t) const;

  /// All tasks in canonical order.
  std::vector<TaskId> tasks() const;
  /// Tasks owned by `stage`, canonical order.
  std::vector<TaskId> stage_tasks(int stage) const;

  /// Throws InvalidArgument if any invariant is broken.
  void validate() const;

  friend bool operator==(const Workload&, const Workload&) = default;

 private:
  int cell(int stage, int chunk, int mb) const;

  int num_stages_ = 1;
  int num_microbatches_ = 1;
  int num_chunks_ = 1;
  int tp_group_size_ = 1;
  bool decompose_backward_ = false;
  Rational backward_split_{1, 2};
  CommDelayModel comm_delay_;
  std::vector<Micros> forward_;
  std::vector<Micros> backward_;
};

/// All dependency edges of one iteration.
std::vector<DependencyEdge> build_task_graph(const Workload& workload);

/// Adjacency view over the dense task indices; immutable once built.
class TaskGraph {
 public:
  explicit TaskGraph(const Workload& workload);

  struct Link {
    int task;    // dense index of the other end
    int edge;    // index into edges()
  };

  const std::vector<DependencyEdge>& edges() const { return edges_; }
  std::span<const Link> predecessors(int task) const;
  std::span<const Link> successors(int task) const;
  /// Edge communication delay (zero for local edges).
  Micros edge_delay(int edge) const { return delays_[static_cast<std::size_t>(edge)]; }

  /// Kahn topological order; empty if the graph has a cycle.
  std::vector<int> topological_order() const;

 private:
  std::vector<DependencyEdge> edges_;
  std::vector<Micros> delays_;
  std::vector<int> pred_offsets_, succ_offsets_;
  std::vector<Link> preds_, succs_;
};

/// Synthetic workload description.
struct GeneratorSpec {
  enum class Skew { None, HeavyLast, HeavyPrefix };

  int num_stages = 4;
  int num_microbatches = 8;
  int num_chunks = 1;
  int tp_group_size = 1;
  Distribution forward = Distribution::constant(100);
  Distribution backward = Distribution::constant(200);
  Micros m_l = 1;
  Micros m_h = 1'000'000'000;
  Skew skew = Skew::None;
  Rational skew_factor{1, 1};
  Distribution comm_delay = Distribution::constant(0);
  bool decompose_backward = false;
  Rational backward_split_fraction{1, 2};

  void validate() const;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

std::string_view to_string(GeneratorSpec::Skew s);

/// Deterministic for a fixed (spec, seed). Every latency entry lies in [m_l, m_h].
Workload generate_workload(const GeneratorSpec& spec, std::uint64_t seed);

// JSON schema: field names follow the domain types, durations are integers.
void to_json(nlohmann::json& j, const Distribution& d);
void from_json(const nlohmann::json& j, Distribution& d);
void to_json(nlohmann::json& j, const Workload& w);
void from_json(const nlohmann::json& j, Workload& w);
void to_json(nlohmann::json& j, const GeneratorSpec& g);
void from_json(const nlohmann::json& j, GeneratorSpec& g);
void to_json(nlohmann::json& j, const TaskId& t);
void from_json(const nlohmann::json& j, TaskId& t);
void to_json(nlohmann::json& j, const Rational& r);
void from_json(const nlohmann::json& j, Rational& r);

}  // namespace rrfp
