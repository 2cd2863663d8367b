#include <gtest/gtest.h>

#include <set>

#include "rrfp/jitter.hpp"
#include "rrfp/rng.hpp"

namespace rrfp {
namespace {

TEST(Rng, XoshiroIsSeedDeterministic) {
  Xoshiro256 a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    differs |= x != c();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformIntStaysInRange) {
  Xoshiro256 r(1);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.uniform_int(-3, 3);
    ASSERT_GE(v, -3);
    ASSERT_LE(v, 3);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, StreamsDependOnlyOnKey) {
  StreamFactory f(9);
  auto s1 = f.stream("jitter", {1, 2, 3});
  (void)f.stream("other", {0})();
  auto s2 = f.stream("jitter", {1, 2, 3});
  EXPECT_EQ(s1(), s2());
  EXPECT_NE(f.key("jitter", {1, 2, 3}), f.key("jitter", {1, 2, 4}));
  EXPECT_NE(f.key("jitter", {1}), StreamFactory(10).key("jitter", {1}));
}

TEST(Ema, Examples) {
  EXPECT_EQ(ema_update(10000, 20000), 11000);
  EXPECT_EQ(ema_update(0, 0), 0);
  EXPECT_EQ(ema_update(5000, 5000), 5000);
}

TEST(Jitter, ZeroScaleNeverDelays) {
  JitterConfig cfg{{1, 1}, 1000, {0, 1}, "custom"};
  JitterState st;
  st.observe(500);
  Xoshiro256 r(3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_delay(cfg, st, r), 0);
}

TEST(Jitter, J3HalfwayDelay) {
  const auto j3 = jitter_preset("J3");
  EXPECT_EQ(j3.probability, (Rational{3, 10}));
  EXPECT_EQ(j3.base, 15000);
  EXPECT_EQ(j3.scale, (Rational{3, 2}));
  EXPECT_EQ(injected_delay(j3, 10000, 1u << 31), 22500);
}

TEST(Jitter, EmaAboveBaseDominates) {
  const auto j1 = jitter_preset("J1");
  EXPECT_EQ(injected_delay(j1, 20000, 0), 5000);
  EXPECT_EQ(injected_delay(j1, 1000, 0), 1250);
}

TEST(Jitter, J3MeanExceedsJ1) {
  double sums[2] = {0, 0};
  const JitterConfig levels[2] = {jitter_preset("J1"), jitter_preset("J3")};
  JitterState st;
  st.observe(10000);
  for (int k = 0; k < 2; ++k) {
    Xoshiro256 r(77);
    for (int i = 0; i < 100000; ++i) sums[k] += static_cast<double>(sample_delay(levels[k], st, r));
  }
  EXPECT_GT(sums[1], sums[0]);
}

TEST(Jitter, InjectionRateTracksProbability) {
  const auto j2 = jitter_preset("J2");
  JitterState st;
  st.observe(1);
  Xoshiro256 r(5);
  int hits = 0;
  for (int i = 0; i < 100000; ++i) hits += sample_delay(j2, st, r) > 0;
  EXPECT_NEAR(hits / 100000.0, 0.2, 0.01);
}

TEST(Jitter, InjectorIsOrderIndependent) {
  JitterInjector a(jitter_preset("J3"), 4, 2), b(jitter_preset("J3"), 4, 2);
  const TaskId t{1, 3, 0, Direction::Backward};
  // Same task, same EMA history: same delay.
  EXPECT_EQ(a.on_dispatch(t, 100), b.on_dispatch(t, 100));
  EXPECT_EQ(a.on_dispatch({0, 0, 0, Direction::WeightUpdate}, 100), 0);
}

TEST(Jitter, PresetsRejectUnknown) {
  EXPECT_THROW(jitter_preset("J9"), InvalidArgument);
  EXPECT_FALSE(jitter_preset("J0").enabled());
  JitterConfig bad{{3, 2}, 0, {1, 1}, "x"};
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

}  // namespace
}  // namespace rrfp
