#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "carnot/errors.hpp"
#include "carnot/types.hpp"

namespace carnot {

struct OdeOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_steps = 200000;
};

struct OdeStats {
  int accepted = 0;
  int rejected = 0;
};

/// Dormand-Prince 5(4) with local extrapolation and FSAL.
///
/// Integrates y' = rhs(y) from 0 to t_end (either sign). `on_step(y)` is
/// called after every accepted step and may throw to abort the integration.
template <class Rhs, class OnStep>
Vec integrate_dopri5(Rhs&& rhs, Vec y, double t_end, const OdeOptions& opt, OnStep&& on_step,
                     OdeStats* stats = nullptr) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2; (void)c3; (void)c4; (void)c5;

  if (t_end == 0.0) return y;
  const double dir = t_end > 0 ? 1.0 : -1.0;
  const double span = std::abs(t_end);
  double t = 0.0;
  double h = span;
  Vec k1 = rhs(y);
  int steps = 0;
  while (t < span) {
    if (++steps > opt.max_steps) throw StepFailure("ODE step budget exhausted");
    if (t + h > span) h = span - t;
    const double hs = dir * h;
    const Vec k2 = rhs(Vec(y + hs * a21 * k1));
    const Vec k3 = rhs(Vec(y + hs * (a31 * k1 + a32 * k2)));
    const Vec k4 = rhs(Vec(y + hs * (a41 * k1 + a42 * k2 + a43 * k3)));
    const Vec k5 = rhs(Vec(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const Vec k6 = rhs(Vec(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    Vec y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec k7 = rhs(y_new);
    const Vec err_vec = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      const double r = err_vec[i] / sc;
      err += r * r;
    }
    err = std::sqrt(err / static_cast<double>(y.size()));
    if (!std::isfinite(err)) err = 1e10;

    if (err <= 1.0) {
      t += h;
      y = std::move(y_new);
      k1 = k7;
      if (stats) ++stats->accepted;
      on_step(y);
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= fac;
    } else {
      if (stats) ++stats->rejected;
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
    }
    if (h < 1e-14 * std::max(1.0, span) && t < span)
      throw StepFailure("ODE step size underflow at t = " + std::to_string(t));
  }
  return y;
}

}  // namespace carnot
