#include "rrfp/workload.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace rrfp {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Distribution

Micros Distribution::sample(Xoshiro256& rng) const {
  switch (kind) {
    case Kind::Constant:
      return value;
    case Kind::Uniform:
      return rng.uniform_int(lo, hi);
    case Kind::LogNormal: {
      const double x = std::exp(mu + sigma * rng.standard_normal());
      auto v = static_cast<Micros>(std::llround(std::min(x, 9.0e15)));
      if (hi > 0) v = std::clamp(v, lo, hi);
      return v;
    }
  }
  return 0;
}

void Distribution::validate(const std::string& path) const {
  switch (kind) {
    case Kind::Constant:
      require(value >= 0, path + ".value: must be non-negative");
      break;
    case Kind::Uniform:
      require(lo >= 0, path + ".lo: must be non-negative");
      require(hi >= lo, path + ".hi: must be >= lo");
      break;
    case Kind::LogNormal:
      require(sigma >= 0.0, path + ".sigma: must be non-negative");
      require(std::isfinite(mu), path + ".mu: must be finite");
      require(hi == 0 || hi >= lo, path + ".hi: must be >= lo");
      break;
  }
}

Micros CommDelayModel::delay(const TaskId& from, const TaskId& to) const {
  if (dist.kind == Distribution::Kind::Constant) return dist.value;
  auto rng = StreamFactory(seed).stream(
      "comm", {from.stage, static_cast<int>(from.direction), from.chunk, from.microbatch, to.stage,
               static_cast<int>(to.direction), to.chunk});
  return dist.sample(rng);
}

std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::InterStageForward:
      return "InterStageForward";
    case EdgeKind::InterStageBackward:
      return "InterStageBackward";
    case EdgeKind::LocalForwardToBackward:
      return "LocalForwardToBackward";
    case EdgeKind::ChunkWrap:
      return "ChunkWrap";
    case EdgeKind::BackwardToWeight:
      return "BackwardToWeight";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Workload

Workload::Workload(int num_stages, int num_microbatches, int num_chunks, int tp_group_size)
    : num_stages_(num_stages),
      num_microbatches_(num_microbatches),
      num_chunks_(num_chunks),
      tp_group_size_(tp_group_size) {
  require(num_stages > 0, "num_stages must be positive");
  require(num_microbatches > 0, "num_microbatches must be positive");
  require(num_chunks > 0, "num_chunks must be positive");
  require(tp_group_size > 0, "tp_group_size must be positive");
  const auto cells = static_cast<std::size_t>(num_stages) * num_chunks * num_microbatches;
  forward_.assign(cells, 0);
  backward_.assign(cells, 0);
}

void Workload::set_tp_group_size(int r) {
  require(r > 0, "tp_group_size must be positive");
  tp_group_size_ = r;
}

void Workload::set_decompose_backward(bool on, Rational beta) {
  if (on) {
    require(beta.den > 0 && beta.num > 0 && beta.num < beta.den,
            "backward_split_fraction must lie in (0,1)");
  }
  decompose_backward_ = on;
  backward_split_ = beta;
}

int Workload::cell(int stage, int chunk, int mb) const {
  require(stage >= 0 && stage < num_stages_ && chunk >= 0 && chunk < num_chunks_ && mb >= 0 &&
              mb < num_microbatches_,
          "latency index out of range");
  return (stage * num_chunks_ + chunk) * num_microbatches_ + mb;
}

Micros Workload::forward_time(int stage, int chunk, int mb) const {
  return forward_[static_cast<std::size_t>(cell(stage, chunk, mb))];
}
Micros Workload::backward_time(int stage, int chunk, int mb) const {
  return backward_[static_cast<std::size_t>(cell(stage, chunk, mb))];
}
void Workload::set_forward_time(int stage, int chunk, int mb, Micros v) {
  require(v >= 0, "durations must be non-negative");
  forward_[static_cast<std::size_t>(cell(stage, chunk, mb))] = v;
}
void Workload::set_backward_time(int stage, int chunk, int mb, Micros v) {
  require(v >= 0, "durations must be non-negative");
  backward_[static_cast<std::size_t>(cell(stage, chunk, mb))] = v;
}
void Workload::fill(Micros forward, Micros backward) {
  require(forward >= 0 && backward >= 0, "durations must be non-negative");
  std::fill(forward_.begin(), forward_.end(), forward);
  std::fill(backward_.begin(), backward_.end(), backward);
}

Micros Workload::latency(const TaskId& t) const {
  switch (t.direction) {
    case Direction::Forward:
      return forward_time(t.stage, t.chunk, t.microbatch);
    case Direction::Backward: {
      const Micros b = backward_time(t.stage, t.chunk, t.microbatch);
      return decompose_backward_ ? backward_split_.scale_round(b) : b;
    }
    case Direction::WeightUpdate: {
      require(decompose_backward_, "weight-update tasks require backward decomposition");
      const Micros b = backward_time(t.stage, t.chunk, t.microbatch);
      return b - backward_split_.scale_round(b);
    }
  }
  return 0;
}

bool Workload::contains(const TaskId& t) const {
  return t.stage >= 0 && t.stage < num_stages_ && t.chunk >= 0 && t.chunk < num_chunks_ &&
         t.microbatch >= 0 && t.microbatch < num_microbatches_ &&
         static_cast<int>(t.direction) < num_directions();
}

int Workload::index(const TaskId& t) const {
  if (!contains(t)) throw InvalidArgument("task " + to_string(t) + " is not part of this workload");
  return ((static_cast<int>(t.direction) * num_stages_ + t.stage) * num_chunks_ + t.chunk) *
             num_microbatches_ +
         t.microbatch;
}

TaskId Workload::task_at(int index) const {
  require(index >= 0 && index < num_tasks(), "task index out of range");
  TaskId t;
  t.microbatch = index % num_microbatches_;
  index /= num_microbatches_;
  t.chunk = index % num_chunks_;
  index /= num_chunks_;
  t.stage = index % num_stages_;
  t.direction = static_cast<Direction>(index / num_stages_);
  return t;
}

std::vector<TaskId> Workload::tasks() const {
  std::vector<TaskId> out;
  out.reserve(static_cast<std::size_t>(num_tasks()));
  for (int s = 0; s < num_stages_; ++s) {
    auto st = stage_tasks(s);
    out.insert(out.end(), st.begin(), st.end());
  }
  return out;
}

std::vector<TaskId> Workload::stage_tasks(int stage) const {
  std::vector<TaskId> out;
  for (int d = 0; d < num_directions(); ++d)
    for (int c = 0; c < num_chunks_; ++c)
      for (int m = 0; m < num_microbatches_; ++m)
        out.push_back({stage, m, c, static_cast<Direction>(d)});
  return out;
}

void Workload::validate() const {
  require(num_stages_ > 0, "num_stages must be positive");
  require(num_microbatches_ > 0, "num_microbatches must be positive");
  require(num_chunks_ > 0, "num_chunks must be positive");
  require(tp_group_size_ > 0, "tp_group_size must be positive");
  const auto cells = static_cast<std::size_t>(num_stages_) * num_chunks_ * num_microbatches_;
  require(forward_.size() == cells && backward_.size() == cells, "latency table has wrong shape");
  require(std::all_of(forward_.begin(), forward_.end(), [](Micros v) { return v >= 0; }),
          "forward latencies must be non-negative");
  require(std::all_of(backward_.begin(), backward_.end(), [](Micros v) { return v >= 0; }),
          "backward latencies must be non-negative");
  if (decompose_backward_) {
    require(backward_split_.num > 0 && backward_split_.num < backward_split_.den,
            "backward_split_fraction must lie in (0,1)");
  }
  comm_delay_.dist.validate("comm_delay.dist");
}

// ---------------------------------------------------------------------------
// Task graph

std::vector<DependencyEdge> build_task_graph(const Workload& w) {
  w.validate();
  const int N = w.num_stages(), M = w.num_microbatches(), C = w.num_chunks();
  std::vector<DependencyEdge> edges;
  auto F = [](int s, int m, int c) { return TaskId{s, m, c, Direction::Forward}; };
  auto B = [](int s, int m, int c) { return TaskId{s, m, c, Direction::Backward}; };
  for (int m = 0; m < M; ++m) {
    for (int c = 0; c < C; ++c) {
      for (int s = 0; s < N; ++s) {
        if (s > 0) {
          edges.push_back({F(s - 1, m, c), F(s, m, c), EdgeKind::InterStageForward});
        } else if (c > 0) {
          edges.push_back({F(N - 1, m, c - 1), F(0, m, c), EdgeKind::ChunkWrap});
        }
      }
      for (int s = N - 1; s >= 0; --s) {
        if (s < N - 1) {
          edges.push_back({B(s + 1, m, c), B(s, m, c), EdgeKind::InterStageBackward});
        } else if (c < C - 1) {
          edges.push_back({B(0, m, c + 1), B(N - 1, m, c), EdgeKind::ChunkWrap});
        }
      }
      for (int s = 0; s < N; ++s) {
        edges.push_back({F(s, m, c), B(s, m, c), EdgeKind::LocalForwardToBackward});
      }
      if (w.decompose_backward()) {
        for (int s = 0; s < N; ++s) {
          edges.push_back({B(s, m, c), TaskId{s, m, c, Direction::WeightUpdate},
                           EdgeKind::BackwardToWeight});
        }
      }
    }
  }
  return edges;
}

TaskGraph::TaskGraph(const Workload& w) : edges_(build_task_graph(w)) {
  const auto n = static_cast<std::size_t>(w.num_tasks());
  delays_.reserve(edges_.size());
  std::vector<int> in_count(n, 0), out_count(n, 0);
  for (const auto& e : edges_) {
    delays_.push_back(e.is_local() ? 0 : w.comm_delay().delay(e.from, e.to));
    ++in_count[static_cast<std::size_t>(w.index(e.to))];
    ++out_count[static_cast<std::size_t>(w.index(e.from))];
  }
  pred_offsets_.assign(n + 1, 0);
  succ_offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    pred_offsets_[i + 1] = pred_offsets_[i] + in_count[i];
    succ_offsets_[i + 1] = succ_offsets_[i] + out_count[i];
  }
  preds_.resize(edges_.size());
  succs_.resize(edges_.size());
  std::vector<int> pred_fill(pred_offsets_.begin(), pred_offsets_.end() - 1);
  std::vector<int> succ_fill(succ_offsets_.begin(), succ_offsets_.end() - 1);
  for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
    const int from = w.index(edges_[static_cast<std::size_t>(e)].from);
    const int to = w.index(edges_[static_cast<std::size_t>(e)].to);
    preds_[static_cast<std::size_t>(pred_fill[static_cast<std::size_t>(to)]++)] = {from, e};
    succs_[static_cast<std::size_t>(succ_fill[static_cast<std::size_t>(from)]++)] = {to, e};
  }
}

std::span<const TaskGraph::Link> TaskGraph::predecessors(int task) const {
  const auto i = static_cast<std::size_t>(task);
  return {preds_.data() + pred_offsets_[i], static_cast<std::size_t>(pred_offsets_[i + 1] - pred_offsets_[i])};
}

std::span<const TaskGraph::Link> TaskGraph::successors(int task) const {
  const auto i = static_cast<std::size_t>(task);
  return {succs_.data() + succ_offsets_[i], static_cast<std::size_t>(succ_offsets_[i + 1] - succ_offsets_[i])};
}

std::vector<int> TaskGraph::topological_order() const {
  const auto n = pred_offsets_.size() - 1;
  std::vector<int> indeg(n);
  std::queue<int> ready;
  for (std::size_t i = 0; i < n; ++i) {
    indeg[i] = pred_offsets_[i + 1] - pred_offsets_[i];
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  }
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    const int t = ready.front();
    ready.pop();
    order.push_back(t);
    for (const auto& s : successors(t)) {
      if (--indeg[static_cast<std::size_t>(s.task)] == 0) ready.push(s.task);
    }
  }
  if (order.size() != n) order.clear();
  return order;
}

// ---------------------------------------------------------------------------
// Generator

std::string_view to_string(GeneratorSpec::Skew s) {
  switch (s) {
    case GeneratorSpec::Skew::None:
      return "none";
    case GeneratorSpec::Skew::HeavyLast:
      return "heavy_last";
    case GeneratorSpec::Skew::HeavyPrefix:
      return "heavy_prefix";
  }
  return "?";
}

void GeneratorSpec::validate() const {
  require(num_stages > 0, "generator.num_stages: must be positive");
  require(num_microbatches > 0, "generator.num_microbatches: must be positive");
  require(num_chunks > 0, "generator.num_chunks: must be positive");
  require(tp_group_size > 0, "generator.tp_group_size: must be positive");
  require(m_l > 0, "generator.m_l: must be positive");
  require(m_h >= m_l, "generator.m_h: must be >= m_l");
  require(skew_factor.num > 0 && skew_factor.den > 0, "generator.skew_factor: must be positive");
  forward.validate("generator.forward");
  backward.validate("generator.backward");
  comm_delay.validate("generator.comm_delay");
  if (decompose_backward) {
    require(backward_split_fraction.num > 0 && backward_split_fraction.num < backward_split_fraction.den,
            "generator.backward_split_fraction: must lie in (0,1)");
  }
}

Workload generate_workload(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int N = spec.num_stages, M = spec.num_microbatches, C = spec.num_chunks;
  Workload w(N, M, C, spec.tp_group_size);
  const StreamFactory streams(seed);
  const int prefix = (N + 3) / 4;
  for (int s = 0; s < N; ++s) {
    auto fwd_rng = streams.stream("latency", {s, static_cast<int>(Direction::Forward)});
    auto bwd_rng = streams.stream("latency", {s, static_cast<int>(Direction::Backward)});
    Rational fwd_skew{1, 1}, bwd_skew{1, 1};
    if (spec.skew == GeneratorSpec::Skew::HeavyLast && s == N - 1) fwd_skew = bwd_skew = spec.skew_factor;
    if (spec.skew == GeneratorSpec::Skew::HeavyPrefix && s < prefix) fwd_skew = spec.skew_factor;
    for (int c = 0; c < C; ++c) {
      for (int m = 0; m < M; ++m) {
        const Micros f = fwd_skew.scale_round(spec.forward.sample(fwd_rng));
        const Micros b = bwd_skew.scale_round(spec.backward.sample(bwd_rng));
        w.set_forward_time(s, c, m, std::clamp(f, spec.m_l, spec.m_h));
        w.set_backward_time(s, c, m, std::clamp(b, spec.m_l, spec.m_h));
      }
    }
  }
  w.set_comm_delay({spec.comm_delay, streams.key("comm-seed", {})});
  w.set_decompose_backward(spec.decompose_backward, spec.backward_split_fraction);
  return w;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const Rational& r) { j = r.to_string(); }

void from_json(const nlohmann::json& j, Rational& r) {
  if (j.is_string()) {
    r = Rational::parse(j.get<std::string>());
  } else if (j.is_number_integer()) {
    r = Rational{j.get<std::int64_t>(), 1};
  } else if (j.is_number()) {
    r = Rational::parse(j.dump());
  } else {
    throw InvalidArgument("expected a rational number");
  }
}

void to_json(nlohmann::json& j, const Distribution& d) {
  switch (d.kind) {
    case Distribution::Kind::Constant:
      j = {{"kind", "constant"}, {"value", d.value}};
      break;
    case Distribution::Kind::Uniform:
      j = {{"kind", "uniform"}, {"lo", d.lo}, {"hi", d.hi}};
      break;
    case Distribution::Kind::LogNormal:
      j = {{"kind", "lognormal"}, {"mu", d.mu}, {"sigma", d.sigma}, {"lo", d.lo}, {"hi", d.hi}};
      break;
  }
}

void from_json(const nlohmann::json& j, Distribution& d) {
  if (j.is_number_integer()) {
    d = Distribution::constant(j.get<Micros>());
    return;
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    d = Distribution::constant(j.at("value").get<Micros>());
  } else if (kind == "uniform") {
    d = Distribution::uniform(j.at("lo").get<Micros>(), j.at("hi").get<Micros>());
  } else if (kind == "lognormal") {
    d = Distribution::lognormal(j.at("mu").get<double>(), j.at("sigma").get<double>(),
                                j.value("lo", Micros{0}), j.value("hi", Micros{0}));
  } else {
    throw InvalidArgument("unknown distribution kind '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const TaskId& t) {
  j = {{"stage", t.stage},
       {"microbatch", t.microbatch},
       {"chunk", t.chunk},
       {"direction", std::string(to_string(t.direction))}};
}

void from_json(const nlohmann::json& j, TaskId& t) {
  t.stage = j.at("stage").get<int>();
  t.microbatch = j.at("microbatch").get<int>();
  t.chunk = j.value("chunk", 0);
  t.direction = direction_from_string(j.at("direction").get<std::string>());
}

void to_json(nlohmann::json& j, const Workload& w) {
  auto table = [&](bool fwd) {
    nlohmann::json stages = nlohmann::json::array();
    for (int s = 0; s < w.num_stages(); ++s) {
      nlohmann::json chunks = nlohmann::json::array();
      for (int c = 0; c < w.num_chunks(); ++c) {
        nlohmann::json row = nlohmann::json::array();
        for (int m = 0; m < w.num_microbatches(); ++m)
          row.push_back(fwd ? w.forward_time(s, c, m) : w.backward_time(s, c, m));
        chunks.push_back(std::move(row));
      }
      stages.push_back(std::move(chunks));
    }
    return stages;
  };
  j = {{"num_stages", w.num_stages()},
       {"num_microbatches", w.num_microbatches()},
       {"num_chunks", w.num_chunks()},
       {"tp_group_size", w.tp_group_size()},
       {"latency", {{"forward", table(true)}, {"backward", table(false)}}},
       {"comm_delay", {{"dist", w.comm_delay().dist}, {"seed", w.comm_delay().seed}}},
       {"decompose_backward", w.decompose_backward()},
       {"backward_split_fraction", w.backward_split_fraction()}};
}

void from_json(const nlohmann::json& j, Workload& w) {
  w = Workload(j.at("num_stages").get<int>(), j.at("num_microbatches").get<int>(),
               j.value("num_chunks", 1), j.value("tp_group_size", 1));
  const auto& lat = j.at("latency");
  auto load = [&](const char* key, bool fwd) {
    const auto& stages = lat.at(key);
    require(stages.is_array() && static_cast<int>(stages.size()) == w.num_stages(),
            std::string("latency.") + key + ": expected one entry per stage");
    for (int s = 0; s < w.num_stages(); ++s) {
      const auto& chunks = stages[static_cast<std::size_t>(s)];
      require(chunks.is_array() && static_cast<int>(chunks.size()) == w.num_chunks(),
              std::string("latency.") + key + "[" + std::to_string(s) + "]: expected one entry per chunk");
      for (int c = 0; c < w.num_chunks(); ++c) {
        const auto& row = chunks[static_cast<std::size_t>(c)];
        require(row.is_array() && static_cast<int>(row.size()) == w.num_microbatches(),
                std::string("latency.") + key + "[" + std::to_string(s) + "][" + std::to_string(c) +
                    "]: expected one entry per microbatch");
        for (int m = 0; m < w.num_microbatches(); ++m) {
          const auto v = row[static_cast<std::size_t>(m)].get<Micros>();
          if (fwd) {
            w.set_forward_time(s, c, m, v);
          } else {
            w.set_backward_time(s, c, m, v);
          }
        }
      }
    }
  };
  load("forward", true);
  load("backward", false);
  if (j.contains("comm_delay")) {
    CommDelayModel cm;
    cm.dist = j.at("comm_delay").at("dist").get<Distribution>();
    cm.seed = j.at("comm_delay").value("seed", std::uint64_t{0});
    w.set_comm_delay(cm);
  }
  w.set_decompose_backward(j.value("decompose_backward", false),
                           j.contains("backward_split_fraction")
                               ? j.at("backward_split_fraction").get<Rational>()
                               : Rational{1, 2});
  w.validate();
}

void to_json(nlohmann::json& j, const GeneratorSpec& g) {
  j = {{"num_stages", g.num_stages},
       {"num_microbatches", g.num_microbatches},
       {"num_chunks", g.num_chunks},
       {"tp_group_size", g.tp_group_size},
       {"forward", g.forward},
       {"backward", g.backward},
       {"m_l", g.m_l},
       {"m_h", g.m_h},
       {"skew", std::string(to_string(g.skew))},
       {"skew_factor", g.skew_factor},
       {"comm_delay", g.comm_delay},
       {"decompose_backward", g.decompose_backward},
       {"backward_split_fraction", g.backward_split_fraction}};
}

void from_json(const nlohmann::json& j, GeneratorSpec& g) {
  g = GeneratorSpec{};
  g.num_stages = j.value("num_stages", g.num_stages);
  g.num_microbatches = j.value("num_microbatches", g.num_microbatches);
  g.num_chunks = j.value("num_chunks", g.num_chunks);
  g.tp_group_size = j.value("tp_group_size", g.tp_group_size);
  if (j.contains("forward")) g.forward = j.at("forward").get<Distribution>();
  if (j.contains("backward")) g.backward = j.at("backward").get<Distribution>();
  g.m_l = j.value("m_l", g.m_l);
  g.m_h = j.value("m_h", g.m_h);
  const auto skew = j.value("skew", std::string("none"));
  if (skew == "none") {
    g.skew = GeneratorSpec::Skew::None;
  } else if (skew == "heavy_last") {
    g.skew = GeneratorSpec::Skew::HeavyLast;
  } else if (skew == "heavy_prefix") {
    g.skew = GeneratorSpec::Skew::HeavyPrefix;
  } else {
    throw InvalidArgument("generator.skew: unknown skew '" + skew + "'");
  }
  if (j.contains("skew_factor")) g.skew_factor = j.at("skew_factor").get<Rational>();
  if (j.contains("comm_delay")) g.comm_delay = j.at("comm_delay").get<Distribution>();
  g.decompose_backward = j.value("decompose_backward", false);
  if (j.contains("backward_split_fraction"))
    g.backward_split_fraction = j.at("backward_split_fraction").get<Rational>();
}

}  // namespace rrfp
