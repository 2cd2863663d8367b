#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace rrfp {

/// SplitMix64 step; also used as the finaliser for stream keys.
std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** by Blackman and Vigna. Platform independent: the output
/// sequence depends only on the seed.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  /// 32 uniformly distributed bits.
  std::uint32_t next_u32() { return static_cast<std::uint32_t>((*this)() >> 32); }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double next_unit();

  /// Uniform integer in [lo, hi] (inclusive) by rejection; no modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller (no cached spare, so each call consumes two draws).
  double standard_normal();

 private:
  std::uint64_t s_[4];
};

/// Derives independent named sub-streams from a root seed. The stream for a
/// (purpose, indices...) key depends only on that key, never on how many other
/// streams were drawn before it, so adding instrumentation cannot perturb
/// sampled values.
class StreamFactory {
 public:
  explicit StreamFactory(std::uint64_t root_seed) : root_(root_seed) {}

  std::uint64_t key(std::string_view purpose, std::initializer_list<std::int64_t> indices) const;
  Xoshiro256 stream(std::string_view purpose, std::initializer_list<std::int64_t> indices) const {
    return Xoshiro256(key(purpose, indices));
  }

  std::uint64_t root() const { return root_; }

 private:
  std::uint64_t root_;
};

}  // namespace rrfp
