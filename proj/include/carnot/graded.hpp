#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "carnot/types.hpp"

namespace carnot {

/// max_i |v_i|^{1/deg_i}: the anisotropic norm shared by d_inf and d_inf^g.
inline double graded_norm(const Vec& v, const std::vector<int>& degrees) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a == 0.0) continue;
    const int d = degrees[static_cast<std::size_t>(i)];
    m = std::max(m, d == 1 ? a : std::pow(a, 1.0 / d));
  }
  return m;
}

/// (v_i eps^{deg_i})_i.
inline Vec graded_scale(const Vec& v, const std::vector<int>& degrees, double eps) {
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i] * std::pow(eps, degrees[static_cast<std::size_t>(i)]);
  return out;
}

/// Seeded generator with a platform-independent uniform mapping.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 42) : eng_(seed) {}

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  Vec uniform_vec(Eigen::Index n, double lo, double hi) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  /// Coordinates with |v_i| < r^{deg_i}, i.e. graded_norm(v) < r.
  Vec graded_box(const std::vector<int>& degrees, double r) {
    Vec v(static_cast<Eigen::Index>(degrees.size()));
    for (std::size_t i = 0; i < degrees.size(); ++i) {
      const double h = std::pow(r, degrees[i]);
      v[static_cast<Eigen::Index>(i)] = uniform(-h, h);
    }
    return v;
  }

private:
  std::mt19937_64 eng_;
};

}  // namespace carnot
