#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrfp/rng.hpp"
#include "rrfp/types.hpp"

namespace rrfp {

/// Compute-path jitter: with probability p_j a task is delayed by
/// d = α · max(B, e) · (0.5 + r), r ~ U[0,1), where e is the stage-local
/// EMA of compute time. All arithmetic is integer.
struct JitterConfig {
  Rational probability{0, 1};  // p_j
  Micros base = 0;             // B
  Rational scale{0, 1};        // α
  std::string level = "J0";

  bool enabled() const { return probability.num > 0 && scale.num > 0; }
  void validate() const;

  friend bool operator==(const JitterConfig&, const JitterConfig&) = default;
};

/// Built-in levels J0..J3.
JitterConfig jitter_preset(const std::string& name);
const std::vector<std::string>& jitter_preset_names();

/// round(0.9 · e_prev + 0.1 · c).
Micros ema_update(Micros e_prev, Micros c);

struct JitterState {
  Micros ema = 0;
  bool primed = false;

  /// The first observation seeds the average with itself.
  void observe(Micros c);
};

/// Delay for an injected task; `r` is r · 2^32 as a 32-bit draw.
Micros injected_delay(const JitterConfig& cfg, Micros ema, std::uint32_t r);

/// Draws the injection decision and r from `stream` (two 32-bit draws, in
/// that order) and returns the delay, or 0 when not injected.
Micros sample_delay(const JitterConfig& cfg, const JitterState& state, Xoshiro256& stream);

/// Per-run injector. Each F/B task gets its own stream keyed by its TaskId,
/// so the injection pattern is independent of execution order and identical
/// across schedulers sharing a seed.
class JitterInjector {
 public:
  JitterInjector(JitterConfig cfg, std::uint64_t seed, int num_stages);

  /// Updates the stage EMA with `compute` and returns the injected delay.
  /// Weight-update tasks are never perturbed and do not touch the EMA.
  Micros on_dispatch(const TaskId& task, Micros compute);

  const JitterConfig& config() const { return cfg_; }

 private:
  JitterConfig cfg_;
  StreamFactory streams_;
  std::vector<JitterState> stages_;
};

void to_json(nlohmann::json& j, const JitterConfig& c);
void from_json(const nlohmann::json& j, JitterConfig& c);

}  // namespace rrfp
