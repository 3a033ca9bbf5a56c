#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include "carnot/errors.hpp"
#include "carnot/frame.hpp"
#include "carnot/graded.hpp"
#include "carnot/ode.hpp"
#include "carnot/types.hpp"

namespace carnot {

struct ChartOptions {
  double ode_tolerance = 1e-10;
  /// Exact flow Jacobian from the variational equation; central differences otherwise.
  bool use_variational = true;
  double fd_step = 1e-6;
  int max_newton_iterations = 50;
  /// Residual |exp(v) - u| accepted when Newton stalls at roundoff.
  double newton_tolerance = 1e-9;
  bool enforce_grading = true;
  double grading_tolerance = 1e-8;
};

namespace detail {

inline OdeOptions ode_options(const ChartOptions& opt) { return {opt.ode_tolerance, opt.ode_tolerance, 200000}; }

inline auto chart_guard(const Vec& start, double radius) {
  return [&start, radius](const Vec& y) {
    if (!y.allFinite() || sup_norm(y.head(start.size()) - start) > radius) {
      std::ostringstream os;
      os << "trajectory left the chart box of radius " << radius << " around (" << start.transpose() << ")";
      throw OutOfChart(os.str());
    }
  };
}

}  // namespace detail

/// Time-t flow of the frozen combination sum_i coeffs_i X_i from `start`.
inline Vec flow(const Frame& frame, const Vec& coeffs, const Vec& start, double t,
                const ChartOptions& opt = {}) {
  if (!start.allFinite() || !coeffs.allFinite()) throw ConfigError("flow: non-finite input");
  if (coeffs.isZero(0.0) || t == 0.0) return start;
  auto rhs = [&](const Vec& y) { return frame.combination(coeffs, y); };
  return integrate_dopri5(rhs, start, t, detail::ode_options(opt),
                          detail::chart_guard(start, frame.coordinate_radius()));
}

/// Time-1 flow together with its Jacobian with respect to the coefficients.
inline std::pair<Vec, Mat> flow_with_jacobian(const Frame& frame, const Vec& coeffs, const Vec& start,
                                              const ChartOptions& opt = {}) {
  const int n = frame.dim();
  if (!opt.use_variational) {
    Mat J(n, n);
    const Vec y = flow(frame, coeffs, start, 1.0, opt);
    for (int i = 0; i < n; ++i) {
      Vec cp = coeffs, cm = coeffs;
      cp[i] += opt.fd_step;
      cm[i] -= opt.fd_step;
      J.col(i) = (flow(frame, cp, start, 1.0, opt) - flow(frame, cm, start, 1.0, opt)) / (2 * opt.fd_step);
    }
    return {y, J};
  }
  // state = (y, vec(J)); J' = (sum_k c_k DX_k(y)) J + [X_1(y) .. X_N(y)]
  Vec state = Vec::Zero(n + n * n);
  state.head(n) = start;
  auto rhs = [&](const Vec& s) {
    const Vec y = s.head(n);
    const Mat A = frame.values(y);
    const Mat B = frame.combination_jacobian(coeffs, y);
    const Eigen::Map<const Mat> J(s.data() + n, n, n);
    Vec out(n + n * n);
    out.head(n) = A * coeffs;
    Eigen::Map<Mat>(out.data() + n, n, n) = B * J + A;
    return out;
  };
  const Vec end = integrate_dopri5(rhs, state, 1.0, detail::ode_options(opt),
                                   detail::chart_guard(start, frame.coordinate_radius()));
  return {end.head(n), Eigen::Map<const Mat>(end.data() + n, n, n)};
}

/// exp(sum_i v_i X_i)(base), guarded by graded_norm(v) <= radius.
inline Vec exp_from(const Frame& frame, const Vec& base, const Vec& v, const ChartOptions& opt = {}) {
  const double r = graded_norm(v, frame.degrees());
  if (!(r <= frame.coordinate_radius())) {
    std::ostringstream os;
    os << "normal coordinates with d_inf-norm " << r << " exceed coordinate radius " << frame.coordinate_radius();
    throw OutOfChart(os.str());
  }
  return flow(frame, v, base, 1.0, opt);
}

/// First-kind coordinates of u with respect to base (damped Newton on exp_from).
inline Vec normal_coords_from(const Frame& frame, const Vec& base, const Vec& u, const ChartOptions& opt = {}) {
  if (!u.allFinite()) throw ConfigError("normal_coords: non-finite point");
  const int n = frame.dim();
  if (u == base) return Vec::Zero(n);
  Vec v = frame.values(base).partialPivLu().solve(u - base);

  auto residual = [&](const Vec& c) -> std::pair<Vec, Mat> {
    if (graded_norm(c, frame.degrees()) > frame.coordinate_radius()) throw OutOfChart("Newton iterate left chart");
    auto [y, J] = flow_with_jacobian(frame, c, base, opt);
    return {y - u, J};
  };

  const double scale = std::max({sup_norm(u), sup_norm(base), 1e-300});
  auto [F, J] = residual(v);
  double fn = sup_norm(F);
  for (int it = 0; it < opt.max_newton_iterations; ++it) {
    if (fn <= 2e-16 * scale) return v;
    const Vec step = J.partialPivLu().solve(F);
    if (!step.allFinite()) break;
    bool improved = false;
    double lambda = 1.0;
    for (int ls = 0; ls < 12; ++ls, lambda *= 0.5) {
      const Vec trial = v - lambda * step;
      try {
        auto [F2, J2] = residual(trial);
        const double f2 = sup_norm(F2);
        if (f2 < fn) {
          v = trial;
          F = std::move(F2);
          J = std::move(J2);
          fn = f2;
          improved = true;
          break;
        }
      } catch (const OutOfChart&) {
      } catch (const StepFailure&) {
      }
      // only full steps are meaningful once at roundoff level
      if (fn <= 1e-13 * scale) break;
    }
    if (!improved) break;
    if (sup_norm(lambda * step) <= 1e-16 * std::max(sup_norm(v), 1e-300)) break;
  }
  if (fn <= opt.newton_tolerance) return v;
  std::ostringstream os;
  os << "Newton inversion of exp at (" << base.transpose() << ") did not converge for (" << u.transpose()
     << "), residual " << fn;
  throw NoConvergence(os.str());
}

/// d_inf(u, w) = max_i |v_i|^{1/deg X_i}, v the coordinates of w with respect to u.
inline double dist_inf(const Frame& frame, const Vec& u, const Vec& w, const ChartOptions& opt = {}) {
  return graded_norm(normal_coords_from(frame, u, w, opt), frame.degrees());
}

/// d_inf with coordinates below rel * max(|u|, |w|) treated as zero, which keeps
/// Newton roundoff from being amplified by the roots of the higher layers.
inline double dist_inf_resolved(const Frame& frame, const Vec& u, const Vec& w, const ChartOptions& opt = {},
                                double rel = 1e-12) {
  Vec v = normal_coords_from(frame, u, w, opt);
  const double s = std::max(sup_norm(u), sup_norm(w));
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (std::abs(v[k]) <= rel * s) v[k] = 0.0;
  return graded_norm(v, frame.degrees());
}

/// Delta^base_eps x.
inline Vec dilate_from(const Frame& frame, const Vec& base, const Vec& x, double eps, const ChartOptions& opt = {}) {
  if (!(eps > 0.0)) throw ConfigError("dilation parameter must be positive");
  if (eps == 1.0) return x;
  if (x == base) return base;
  const Vec c = normal_coords_from(frame, base, x, opt);
  return exp_from(frame, base, graded_scale(c, frame.degrees(), eps), opt);
}

/// A base point g with its first-kind coordinate system and cached c_ijk(g).
class Chart {
public:
  Chart(std::shared_ptr<const Frame> frame, Vec base, ChartOptions opt = {})
      : frame_(std::move(frame)), base_(std::move(base)), opt_(opt) {
    if (!frame_) throw ConfigError("chart without frame");
    if (base_.size() != frame_->dim()) throw ConfigError("base point dimension mismatch");
    structure_ = structure_constants(*frame_, base_, {opt_.grading_tolerance, opt_.enforce_grading});
  }
  Chart(const Frame& frame, Vec base, ChartOptions opt = {})
      : Chart(std::make_shared<const Frame>(frame), std::move(base), opt) {}

  const Frame& frame() const { return *frame_; }
  std::shared_ptr<const Frame> frame_ptr() const { return frame_; }
  const Vec& base() const { return base_; }
  double coordinate_radius() const { return frame_->coordinate_radius(); }
  double ode_tolerance() const { return opt_.ode_tolerance; }
  const ChartOptions& options() const { return opt_; }
  const StructureField& structure() const { return structure_; }
  int dim() const { return frame_->dim(); }

  /// Same frame and options at another base point.
  Chart recentered(Vec base) const { return Chart(frame_, std::move(base), opt_); }
  /// Chart at `point` of the frame translated so that `point` is the origin.
  /// Small offsets from the base keep full relative precision there.
  Chart centered_at(const Vec& point) const {
    return Chart(frame_->translated(point), Vec::Zero(point.size()), opt_);
  }
  Chart centered() const { return centered_at(base_); }

private:
  std::shared_ptr<const Frame> frame_;
  Vec base_;
  ChartOptions opt_;
  StructureField structure_;
};

/// Normal coordinates tied to the chart they were computed in.
struct NormalCoords {
  Vec v;
  const Chart* chart = nullptr;
};

inline Vec exp_map(const Chart& chart, const Vec& v) {
  return exp_from(chart.frame(), chart.base(), v, chart.options());
}
inline Vec exp_map(const Chart& chart, const NormalCoords& v) { return exp_map(chart, v.v); }

inline NormalCoords normal_coords(const Chart& chart, const Vec& u) {
  return {normal_coords_from(chart.frame(), chart.base(), u, chart.options()), &chart};
}

inline Vec dilation_delta_cap(const Chart& chart, const Vec& x, double eps) {
  return dilate_from(chart.frame(), chart.base(), x, eps, chart.options());
}

/// Box(center, r) = {v : d_inf(center, v) < r}.
class Box {
public:
  Box(const Chart& chart, double r) : chart_(&chart), r_(r) {
    if (!(r > 0.0) || r > chart.coordinate_radius())
      throw ConfigError("box radius must lie in (0, coordinate_radius]");
  }

  double radius() const { return r_; }

  bool contains(const Vec& v) const {
    if (v == chart_->base()) return true;
    try {
      return dist_inf(chart_->frame(), chart_->base(), v, chart_->options()) < r_;
    } catch (const OutOfChart&) {
      return false;
    } catch (const NoConvergence&) {
      return false;
    }
  }

  /// Draws normal coordinates from the graded coordinate box, maps them
  /// through exp and rejects anything the membership test refuses.
  Vec sample(Rng& rng) const {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const Vec z = rng.graded_box(chart_->frame().degrees(), r_);
      Vec p;
      try {
        p = exp_map(*chart_, z);
      } catch (const OutOfChart&) {
        continue;
      }
      if (contains(p)) return p;
    }
    throw NoConvergence("box sampler rejected 1000 consecutive draws");
  }

private:
  const Chart* chart_;
  double r_;
};

inline Box box(const Chart& chart, double r) { return Box(chart, r); }

}  // namespace carnot
