#include "rrfp/jitter.hpp"

#include <algorithm>

#include "rrfp/workload.hpp"

namespace rrfp {

void JitterConfig::validate() const {
  if (probability.den <= 0 || probability.num < 0 || probability.num > probability.den)
    throw InvalidArgument("jitter.p_j: must lie in [0,1]");
  if (base < 0) throw InvalidArgument("jitter.base_us: must be non-negative");
  if (scale.den <= 0 || scale.num < 0) throw InvalidArgument("jitter.alpha: must be non-negative");
}

const std::vector<std::string>& jitter_preset_names() {
  static const std::vector<std::string> names{"J0", "J1", "J2", "J3"};
  return names;
}

JitterConfig jitter_preset(const std::string& name) {
  if (name == "J0") return {{0, 1}, 0, {0, 1}, "J0"};
  if (name == "J1") return {{1, 10}, 5'000, {1, 2}, "J1"};
  if (name == "J2") return {{2, 10}, 10'000, {1, 1}, "J2"};
  if (name == "J3") return {{3, 10}, 15'000, {3, 2}, "J3"};
  throw InvalidArgument("unknown jitter level '" + name + "'");
}

Micros ema_update(Micros e_prev, Micros c) { return (9 * e_prev + c + 5) / 10; }

void JitterState::observe(Micros c) {
  ema = primed ? ema_update(ema, c) : c;
  primed = true;
}

Micros injected_delay(const JitterConfig& cfg, Micros ema, std::uint32_t r) {
  constexpr __int128 two32 = __int128{1} << 32;
  const __int128 x = std::max(cfg.base, ema);
  // α · x · (2^31 + r) / 2^32, rounded half up.
  const __int128 num = static_cast<__int128>(cfg.scale.num) * x * ((two32 >> 1) + r);
  const __int128 den = static_cast<__int128>(cfg.scale.den) * two32;
  return static_cast<Micros>((2 * num + den) / (2 * den));
}

Micros sample_delay(const JitterConfig& cfg, const JitterState& state, Xoshiro256& stream) {
  const std::uint64_t decide = stream.next_u32();
  const std::uint32_t r = stream.next_u32();
  constexpr __int128 two32 = __int128{1} << 32;
  if (static_cast<__int128>(decide) * cfg.probability.den >= static_cast<__int128>(cfg.probability.num) * two32)
    return 0;
  return injected_delay(cfg, state.ema, r);
}

JitterInjector::JitterInjector(JitterConfig cfg, std::uint64_t seed, int num_stages)
    : cfg_(std::move(cfg)), streams_(seed), stages_(static_cast<std::size_t>(num_stages)) {}

Micros JitterInjector::on_dispatch(const TaskId& task, Micros compute) {
  if (task.direction == Direction::WeightUpdate) return 0;
  auto& st = stages_.at(static_cast<std::size_t>(task.stage));
  st.observe(compute);
  if (!cfg_.enabled()) return 0;
  auto stream = streams_.stream(
      "jitter", {task.stage, static_cast<int>(task.direction), task.chunk, task.microbatch});
  return sample_delay(cfg_, st, stream);
}

void to_json(nlohmann::json& j, const JitterConfig& c) {
  j = {{"level", c.level}, {"p_j", c.probability}, {"base_us", c.base}, {"alpha", c.scale}};
}

void from_json(const nlohmann::json& j, JitterConfig& c) {
  if (j.is_string()) {
    c = jitter_preset(j.get<std::string>());
    return;
  }
  if (j.contains("level") && !j.contains("p_j")) {
    c = jitter_preset(j.at("level").get<std::string>());
    return;
  }
  c.level = j.value("level", std::string("custom"));
  c.probability = j.at("p_j").get<Rational>();
  c.base = j.at("base_us").get<Micros>();
  c.scale = j.at("alpha").get<Rational>();
  c.validate();
}

}  // namespace rrfp
