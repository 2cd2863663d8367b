#include "rrfp/types.hpp"

#include <charconv>
#include <numeric>
#include <tuple>

namespace rrfp {

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Forward:
      return "forward";
    case Direction::Backward:
      return "backward";
    case Direction::WeightUpdate:
      return "weight";
  }
  return "?";
}

Direction direction_from_string(std::string_view s) {
  if (s == "forward" || s == "F" || s == "f") return Direction::Forward;
  if (s == "backward" || s == "B" || s == "b") return Direction::Backward;
  if (s == "weight" || s == "W" || s == "w") return Direction::WeightUpdate;
  throw InvalidArgument("unknown direction '" + std::string(s) + "'");
}

char direction_letter(Direction d) {
  switch (d) {
    case Direction::Forward:
      return 'F';
    case Direction::Backward:
      return 'B';
    case Direction::WeightUpdate:
      return 'W';
  }
  return '?';
}

bool canonical_less(const TaskId& a, const TaskId& b) {
  return std::tuple(a.stage, static_cast<int>(a.direction), a.chunk, a.microbatch) <
         std::tuple(b.stage, static_cast<int>(b.direction), b.chunk, b.microbatch);
}

std::string to_string(const TaskId& t) {
  std::string s(1, direction_letter(t.direction));
  s += "(mb" + std::to_string(t.microbatch) + ",c" + std::to_string(t.chunk) + ")@s" +
       std::to_string(t.stage);
  return s;
}

std::int64_t Rational::scale_floor(std::int64_t v) const {
  return static_cast<std::int64_t>(static_cast<__int128>(v) * num / den);
}

std::int64_t Rational::scale_round(std::int64_t v) const {
  const __int128 n = static_cast<__int128>(num) * v;
  const __int128 d = den;
  return static_cast<std::int64_t>((2 * n + d) / (2 * d));
}

Rational Rational::parse(std::string_view text) {
  auto parse_int = [&](std::string_view part) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || ptr != part.data() + part.size() || part.empty()) {
      throw InvalidArgument("not a rational number: '" + std::string(text) + "'");
    }
    return v;
  };
  Rational r;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    r.num = parse_int(text.substr(0, slash));
    r.den = parse_int(text.substr(slash + 1));
  } else if (auto dot = text.find('.'); dot != std::string_view::npos) {
    const auto whole = text.substr(0, dot);
    const auto frac = text.substr(dot + 1);
    if (frac.size() > 12) throw InvalidArgument("too many decimals in '" + std::string(text) + "'");
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    const std::int64_t w = whole.empty() ? 0 : parse_int(whole);
    const std::int64_t f = frac.empty() ? 0 : parse_int(frac);
    r.num = w * scale + f;
    r.den = scale;
  } else {
    r.num = parse_int(text);
  }
  if (r.den <= 0) throw InvalidArgument("rational denominator must be positive: '" + std::string(text) + "'");
  const auto g = std::gcd(r.num < 0 ? -r.num : r.num, r.den);
  if (g > 1) {
    r.num /= g;
    r.den /= g;
  }
  return r;
}

std::string Rational::to_string() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

}  // namespace rrfp
