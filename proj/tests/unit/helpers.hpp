#pragma once

#include <vector>

#include "rrfp/workload.hpp"

namespace rrfp::testing {

inline Workload uniform_workload(int n, int m, Micros f, Micros b, int c = 1, int r = 1) {
  Workload w(n, m, c, r);
  w.fill(f, b);
  return w;
}

/// Mixed constant / uniform / lognormal corpus, C = 1, zero delay, R = 1.
inline std::vector<Workload> random_corpus(int count, int max_n, int max_m, std::uint64_t seed) {
  std::vector<Workload> out;
  Xoshiro256 rng(seed);
  for (int i = 0; i < count; ++i) {
    GeneratorSpec g;
    g.num_stages = static_cast<int>(rng.uniform_int(1, max_n));
    g.num_microbatches = static_cast<int>(rng.uniform_int(1, max_m));
    switch (i % 3) {
      case 0:
        g.forward = Distribution::constant(rng.uniform_int(1, 50));
        g.backward = Distribution::constant(rng.uniform_int(1, 100));
        break;
      case 1:
        g.forward = Distribution::uniform(10, 60);
        g.backward = Distribution::uniform(20, 120);
        break;
      default:
        g.forward = Distribution::lognormal(3.5, 0.5, 1, 500);
        g.backward = Distribution::lognormal(4.2, 0.5, 1, 1000);
        break;
    }
    g.m_l = 1;
    g.m_h = 1000;
    out.push_back(generate_workload(g, rng()));
  }
  return out;
}

}  // namespace rrfp::testing
