#pragma once

// Experiment configuration, presets and sweeps. A config is one JSON
// document with the sections {workload | generator, scheduler, jitter, tp,
// output, sweep}; it is validated before anything runs.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrfp/engine.hpp"
#include "rrfp/jitter.hpp"
#include "rrfp/workload.hpp"

namespace rrfp {

/// Schema violation; `path` is a JSON path such as "$.scheduler.buffer_limit".
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string path, const std::string& message)
      : InvalidArgument(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct SchedulerConfig {
  std::string kind = "rrfp";  // rrfp | 1f1b | live
  HintOrder hint;
  int buffer_limit = 32;
  std::uint64_t seed = 0;
  Rational time_scale{1, 1};
  double watchdog_secs = 30.0;
  bool compare_baseline = true;
};

struct SweepConfig {
  std::string axis;  // jitter | hint | limit | microbatches | stages | skew
  std::vector<nlohmann::json> levels;
  int paired_seeds = 3;
  int threads = 0;  // 0: hardware concurrency
  std::vector<std::string> schedulers{"rrfp", "1f1b"};
};

struct ExperimentConfig {
  std::optional<Workload> workload;
  std::optional<GeneratorSpec> generator;
  std::uint64_t generator_seed = 0;
  SchedulerConfig scheduler;
  JitterConfig jitter;
  std::optional<int> tp_group_size;
  TpGroup tp;
  std::string output_dir = "out";
  bool record_messages = true;
  std::optional<SweepConfig> sweep;
  /// The validated document, used for the run id.
  nlohmann::json document;

  /// Builds the workload for paired-seed index `k` (generator seed + k).
  Workload make_workload(std::uint64_t k = 0) const;
};

/// Throws ConfigError naming the first offending field.
void validate_config(const nlohmann::json& doc);
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Applies "a.b.c=value". The value is read as JSON when it parses, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Hint names plus "file:PATH" (file content holds a hint string).
HintOrder resolve_hint(const std::string& text);
/// Preset names J0..J3, or a path to a JSON jitter document.
JitterConfig resolve_jitter(const std::string& text);

/// Stable content hash (hex) of the validated document.
std::string run_id(const nlohmann::json& doc);

/// Reproducible named experiments; every field is pinned.
const std::map<std::string, nlohmann::json>& experiment_presets();

/// Scales every sample of `d` by `factor` (lognormal shifts μ by ln factor).
Distribution scale_distribution(const Distribution& d, Rational factor);

struct SweepRow {
  std::string level;
  std::string scheduler;
  double mean = 0.0;
  double stddev = 0.0;
  double slowdown_pct = 0.0;  // vs. the same scheduler at the first level
  double mean_ratio_to_L = 0.0;
  int samples = 0;
};

/// Runs every (level, scheduler, seed) cell; cells run concurrently and
/// results are aggregated in a fixed order, so output is deterministic.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config);
std::string sweep_csv(const std::vector<SweepRow>& rows);
void to_json(nlohmann::json& j, const SweepRow& r);

}  // namespace rrfp
