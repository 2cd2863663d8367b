#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rrfp {

/// Virtual time and durations are integer microseconds.
using Micros = std::int64_t;

enum class Direction : std::uint8_t { Forward = 0, Backward = 1, WeightUpdate = 2 };

inline constexpr int kNumDirections = 3;

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

/// Short tag used in trace rows and error messages: "F", "B", "W".
char direction_letter(Direction d);

/// One unit of work: a (stage, microbatch, chunk, direction) tuple.
struct TaskId {
  int stage = 0;
  int microbatch = 0;
  int chunk = 0;
  Direction direction = Direction::Forward;

  friend bool operator==(const TaskId&, const TaskId&) = default;
};

/// Canonical order: stage, direction, chunk, microbatch.
bool canonical_less(const TaskId& a, const TaskId& b);

struct CanonicalLess {
  bool operator()(const TaskId& a, const TaskId& b) const { return canonical_less(a, b); }
};

/// "F(mb3,c1)@s2"
std::string to_string(const TaskId& t);

/// Thrown for invalid workloads, configs and other caller errors.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exact integer rational used for configuration values that must not
/// introduce floating point into the simulation (β, α, p_j, time scale).
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  friend bool operator==(const Rational&, const Rational&) = default;

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  /// round(this * v), half away from zero, for non-negative v.
  std::int64_t scale_round(std::int64_t v) const;
  /// floor(v · num / den) for non-negative v.
  std::int64_t scale_floor(std::int64_t v) const;

  /// Parses "3/2", "1.5", "0.25" or "2" exactly.
  static Rational parse(std::string_view text);
  std::string to_string() const;
};

}  // namespace rrfp

template <>
struct std::hash<rrfp::TaskId> {
  std::size_t operator()(const rrfp::TaskId& t) const noexcept {
    std::size_t h = static_cast<std::size_t>(t.stage);
    h = h * 1000003u + static_cast<std::size_t>(t.microbatch);
    h = h * 1000003u + static_cast<std::size_t>(t.chunk);
    h = h * 31u + static_cast<std::size_t>(t.direction);
    return h;
  }
};
