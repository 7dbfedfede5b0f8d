#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dsm/rng.hpp"
#include "dsm/scan_graph.hpp"
#include "dsm/tensor.hpp"

namespace dsm::test {

inline Tensor4 random_tensor(Shape4 s, Pcg32& rng, Real lo = -1, Real hi = 1) {
  Tensor4 t(s);
  for (Real& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor5 random_tensor5(Shape5 s, Pcg32& rng, Real lo = -1, Real hi = 1) {
  Tensor5 t(s);
  for (Real& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline std::vector<Real> random_vector(std::size_t n, Pcg32& rng, Real lo = -1, Real hi = 1) {
  std::vector<Real> v(n);
  for (Real& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Real dot(std::span<const Real> a, std::span<const Real> b) {
  Real s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Real max_abs_diff(std::span<const Real> a, std::span<const Real> b) {
  Real m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Positive random weights with self + in-range predecessors summing to 1.
inline EdgeWeightField random_unit_weights(const ScanGraph& g, Pcg32& rng) {
  EdgeWeightField f(g);
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      Real sum = f.at(y, x, 0) = rng.uniform(0.05, 1);
      for (std::size_t k = 0; k < g.predecessor_offsets.size(); ++k)
        if (g.in_range(y, x, g.predecessor_offsets[k])) sum += f.at(y, x, k + 1) = rng.uniform(0.05, 1);
      for (Real& v : f.pixel(y, x)) v /= sum;
    }
  return f;
}

}  // namespace dsm::test
