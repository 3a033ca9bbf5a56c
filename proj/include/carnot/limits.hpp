#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "carnot/convergence.hpp"
#include "carnot/expmap.hpp"
#include "carnot/nilpotent.hpp"

namespace carnot {

// -- epsilon combinations ---------------------------------------------------

/// Delta^{x}_{eps^{-1}} Delta^{Delta^x_eps u}_eps v, x the chart base.
inline Vec sigma_eps(const Chart& chart, const Vec& u, const Vec& v, double eps) {
  const auto& f = chart.frame();
  const auto& opt = chart.options();
  const Vec ue = dilate_from(f, chart.base(), u, eps, opt);
  const Vec a = dilate_from(f, ue, v, eps, opt);
  return dilate_from(f, chart.base(), a, 1.0 / eps, opt);
}

/// Delta^{Delta^x_eps u}_{eps^{-1}} Delta^x_eps v.
inline Vec lambda_eps(const Chart& chart, const Vec& u, const Vec& v, double eps) {
  const auto& f = chart.frame();
  const auto& opt = chart.options();
  const Vec ue = dilate_from(f, chart.base(), u, eps, opt);
  const Vec ve = dilate_from(f, chart.base(), v, eps, opt);
  return dilate_from(f, ue, ve, 1.0 / eps, opt);
}

/// Delta^{Delta^x_eps u}_{eps^{-1}} x.
inline Vec inv_eps(const Chart& chart, const Vec& u, double eps) {
  const auto& f = chart.frame();
  const auto& opt = chart.options();
  const Vec ue = dilate_from(f, chart.base(), u, eps, opt);
  return dilate_from(f, ue, chart.base(), 1.0 / eps, opt);
}

/// Nilpotentized algebra at the chart base, graded as the chart options demand.
inline GradedAlgebra tangent_algebra(const Chart& chart) {
  return nilpotentize(chart.structure(), chart.frame().degrees(), chart.frame().depth(),
                      chart.options().enforce_grading, chart.options().grading_tolerance);
}

// -- local approximation and integral lines ----------------------------------

/// max |d_inf(u,v) - d_inf^g(u,v)| over u, v drawn from Box(g, eps), per rung.
inline ConvergenceReport check_local_approximation(const Chart& chart_g, const EpsilonLadder& ladder,
                                                   int samples_per_rung, Rng& rng,
                                                   const ConvergenceOptions& opt = {}) {
  if (samples_per_rung < 1) throw ConfigError("local approximation: need at least one sample pair");
  const Chart chart = chart_g.centered();
  const GradedAlgebra alg = tangent_algebra(chart);
  const auto& f = chart.frame();
  std::vector<double> values, errors;
  for (double eps : ladder.values()) {
    const Box b = box(chart, eps);
    double worst = 0.0, dmax = 0.0;
    for (int s = 0; s < samples_per_rung; ++s) {
      const Vec u = b.sample(rng), v = b.sample(rng);
      const double d = dist_inf(f, u, v, chart.options());
      const double dg = alg.distance(normal_coords(chart, u).v, normal_coords(chart, v).v);
      worst = std::max(worst, std::abs(d - dg));
      dmax = std::max(dmax, d);
    }
    values.push_back(dmax);
    errors.push_back(worst);
  }
  return analyze_errors(ladder, std::move(values), std::move(errors), opt);
}

struct DivergenceReport {
  ConvergenceReport report;  // errors = d_inf^u(w_eps, what_eps)
  std::vector<double> ratio;  // measured / eps
  /// Unresolved distances, roundoff included.
  std::vector<double> raw;
  /// max/min of the ratio over the final rungs with measured >= floor (1 if none).
  double spread = 1.0;
  bool bounded = true;
};

/// d_inf^u(w_eps, what_eps), where w_eps flows sum w_i eps^deg X_i from v and
/// what_eps flows the nilpotentized fields at u from v.
inline DivergenceReport check_integral_line_divergence(const Chart& chart, const Vec& v_in, const Vec& w,
                                                       const EpsilonLadder& ladder, int tail = 5,
                                                       const ConvergenceOptions& opt = {}) {
  if (w.size() != chart.dim() || v_in.size() != chart.dim()) throw ConfigError("divergence: dimension mismatch");
  const Chart chart_u = chart.centered();
  const auto& f = chart_u.frame();
  const Vec v = v_in - chart.base();
  const GradedAlgebra alg = tangent_algebra(chart_u);
  const Vec vc = normal_coords(chart_u, v).v;
  std::vector<double> values, errors;
  DivergenceReport out;
  for (double eps : ladder.values()) {
    const Vec we = graded_scale(w, f.degrees(), eps);
    const Vec w_eps = flow(f, we, v, 1.0, chart_u.options());
    const Vec what = alg.product(vc, we);
    const Vec wc = normal_coords(chart_u, w_eps).v;
    const double m = alg.resolved_distance(wc, what);
    out.raw.push_back(alg.distance(wc, what));
    errors.push_back(m);
    values.push_back(m / eps);
    out.ratio.push_back(m / eps);
  }
  out.report = analyze_errors(ladder, values, errors, opt);
  double lo = INFINITY, hi = 0.0;
  const int n = ladder.count();
  for (int k = std::max(0, n - tail); k < n; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    if (!std::isfinite(out.ratio[kk])) out.bounded = false;
    if (errors[kk] < opt.noise_floor) continue;
    lo = std::min(lo, out.ratio[kk]);
    hi = std::max(hi, out.ratio[kk]);
  }
  out.spread = hi > 0.0 ? hi / lo : 1.0;
  out.bounded = out.bounded && out.spread < 3.0;
  return out;
}

// -- distortion ----------------------------------------------------------------

using Quasimetric = std::function<double(const Vec&, const Vec&)>;

struct SampledMap {
  std::vector<Vec> domain_points;
  Quasimetric domain_metric;
  std::vector<Vec> image_points;
  Quasimetric image_metric;
};

/// sup over ordered pairs of |d_Y(f(u), f(v)) - d_X(u, v)|.
inline double distortion(const SampledMap& m) {
  if (m.domain_points.empty()) throw ConfigError("distortion: empty sample");
  if (m.domain_points.size() != m.image_points.size()) throw ConfigError("distortion: unmatched samples");
  double d = 0.0;
  const std::size_t n = m.domain_points.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dy = m.image_metric(m.image_points[i], m.image_points[j]);
      const double dx = m.domain_metric(m.domain_points[i], m.domain_points[j]);
      d = std::max(d, std::abs(dy - dx));
    }
  return d;
}

/// Distortion of u -> Delta_eps u from (points, d^x) to (image, eps^{-1} d_inf).
inline double rescaled_distortion(const Chart& chart, const GradedAlgebra& alg, const std::vector<Vec>& points,
                                  double eps) {
  SampledMap m;
  const auto& f = chart.frame();
  for (const Vec& p : points) {
    m.domain_points.push_back(normal_coords(chart, p).v);
    m.image_points.push_back(dilation_delta_cap(chart, p, eps));
  }
  m.domain_metric = [&alg](const Vec& a, const Vec& b) { return alg.distance(a, b); };
  m.image_metric = [&f, &chart, eps](const Vec& a, const Vec& b) {
    return dist_inf(f, a, b, chart.options()) / eps;
  };
  return distortion(m);
}

// -- axiom suite -------------------------------------------------------------------

struct AxiomSuiteConfig {
  EpsilonLadder ladder{};
  std::uint64_t seed = 42;
  /// Sample pairs per rung for the ladder checks at the base point.
  int samples = 8;
  /// Sample pairs per grid point for the uniformity probes.
  int grid_samples = 2;
  bool uniformity = true;
  /// Sample radii as fractions of the coordinate radius.
  double a3_radius = 0.5;
  double a4_radius = 0.25;
  /// Half-width of the base-point grid as a fraction of the coordinate radius.
  double grid_halfwidth = 0.4;
  double limit_tolerance = 1e-3;
  double order_margin = 0.15;
  double uniformity_order_margin = 0.2;
  double exact_tolerance = 1e-8;
  double noise_floor = 1e-9;
};

struct CheckRow {
  double eps = std::numeric_limits<double>::quiet_NaN();
  double measured = std::numeric_limits<double>::quiet_NaN();
  double reference = std::numeric_limits<double>::quiet_NaN();
  double error = std::numeric_limits<double>::quiet_NaN();
  double fitted_order = std::numeric_limits<double>::quiet_NaN();
};

struct CheckResult {
  CheckResult() = default;
  CheckResult(std::string id_, std::string description_, double tolerance_)
      : id(std::move(id_)), description(std::move(description_)), tolerance(tolerance_) {}

  std::string id;
  std::string description;
  double tolerance = 0.0;
  bool pass = false;
  std::string status;  // convergence status or a short verdict
  std::string note;
  std::vector<CheckRow> rows;
};

struct SuiteReport {
  std::string frame;
  Vec base;
  std::vector<CheckResult> checks;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }
  const CheckResult* find(const std::string& id) const {
    for (const auto& c : checks)
      if (c.id == id) return &c;
    return nullptr;
  }
};

namespace detail {

inline std::vector<CheckRow> ladder_rows(const ConvergenceReport& r, const std::vector<double>& reference = {}) {
  std::vector<CheckRow> rows;
  for (int k = 0; k < r.ladder.count(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    CheckRow row;
    row.eps = r.ladder[k];
    row.measured = r.values[kk];
    row.reference = kk < reference.size() ? reference[kk] : 0.0;
    row.error = r.errors[kk];
    row.fitted_order = r.fitted_order;
    rows.push_back(row);
  }
  return rows;
}

inline CheckResult from_report(std::string id, std::string description, const ConvergenceReport& r) {
  CheckResult c{std::move(id), std::move(description), r.tolerance};
  c.rows = ladder_rows(r);
  c.status = to_string(r.status);
  c.pass = r.converged();
  return c;
}

inline CheckResult single(std::string id, std::string description, double measured, double reference,
                          double tolerance) {
  CheckResult c{std::move(id), std::move(description), tolerance};
  CheckRow row;
  row.measured = measured;
  row.reference = reference;
  row.error = std::abs(measured - reference);
  c.rows.push_back(row);
  c.pass = std::isfinite(row.error) && row.error <= tolerance;
  c.status = c.pass ? "PASS" : "FAIL";
  return c;
}

inline std::vector<Vec> grid_points(const Vec& center, double halfwidth) {
  const int axes = static_cast<int>(std::min<Eigen::Index>(center.size(), 3));
  int total = 1;
  for (int a = 0; a < axes; ++a) total *= 5;
  std::vector<Vec> pts;
  for (int idx = 0; idx < total; ++idx) {
    Vec p = center;
    int rem = idx;
    for (int a = 0; a < axes; ++a) {
      p[a] += halfwidth * (-1.0 + 0.5 * (rem % 5));
      rem /= 5;
    }
    pts.push_back(p);
  }
  return pts;
}

/// eps^{-1} d_inf(Delta_eps u, Delta_eps v).
inline double rescaled_distance(const Chart& chart, const Vec& u, const Vec& v, double eps) {
  const Vec a = dilation_delta_cap(chart, u, eps), b = dilation_delta_cap(chart, v, eps);
  return dist_inf(chart.frame(), a, b, chart.options()) / eps;
}

struct SamplePair {
  Vec u, v, uc, vc;
};

inline std::vector<SamplePair> sample_pairs(const Chart& chart, double radius, int count, Rng& rng) {
  const Box b = box(chart, radius);
  std::vector<SamplePair> out;
  for (int s = 0; s < count; ++s) {
    SamplePair p;
    p.u = b.sample(rng);
    p.v = b.sample(rng);
    p.uc = normal_coords(chart, p.u).v;
    p.vc = normal_coords(chart, p.v).v;
    out.push_back(std::move(p));
  }
  return out;
}

/// Per-rung max over pairs of |eps^{-1} d(Delta u, Delta v) - d^x(u, v)|.
inline ConvergenceReport a3_ladder(const Chart& chart, const GradedAlgebra& alg, const std::vector<SamplePair>& pairs,
                                   const EpsilonLadder& ladder, const ConvergenceOptions& opt) {
  std::vector<double> values, errors;
  for (double eps : ladder.values()) {
    double worst = 0.0, meas = 0.0;
    for (const auto& p : pairs) {
      const double m = rescaled_distance(chart, p.u, p.v, eps);
      const double ref = alg.distance(p.uc, p.vc);
      if (!std::isfinite(m)) {
        worst = INFINITY;
        continue;
      }
      if (std::abs(m - ref) >= worst) meas = m;
      worst = std::max(worst, std::abs(m - ref));
    }
    values.push_back(meas);
    errors.push_back(worst);
  }
  return analyze_errors(ladder, std::move(values), std::move(errors), opt);
}

/// Per-rung max over pairs of the sup-norm gap between Lambda_eps(u,v) and (-u)*v in center coordinates.
inline ConvergenceReport lambda_ladder(const Chart& chart, const GradedAlgebra& alg,
                                       const std::vector<SamplePair>& pairs, const EpsilonLadder& ladder,
                                       const ConvergenceOptions& opt) {
  std::vector<double> values, errors;
  for (double eps : ladder.values()) {
    double worst = 0.0, meas = 0.0;
    for (const auto& p : pairs) {
      const Vec l = normal_coords(chart, lambda_eps(chart, p.u, p.v, eps)).v;
      const double e = sup_norm(l - alg.product(alg.inverse(p.uc), p.vc));
      if (e >= worst) meas = sup_norm(l);
      worst = std::max(worst, e);
    }
    values.push_back(meas);
    errors.push_back(worst);
  }
  return analyze_errors(ladder, std::move(values), std::move(errors), opt);
}

template <class F>
CheckResult guarded(const std::string& id, const std::string& description, double tolerance, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    CheckResult c{id, description, tolerance};
    c.pass = false;
    c.status = "ERROR";
    c.note = e.what();
    return c;
  }
}

}  // namespace detail

/// Dilation-structure axioms (A0)-(A4) plus the derived limit identities at the chart base.
inline SuiteReport run_axiom_suite(const Chart& chart_x, const AxiomSuiteConfig& cfg = {}) {
  using detail::guarded;
  using detail::single;
  SuiteReport rep{chart_x.frame().name(), chart_x.base(), {}};
  const Chart chart = chart_x.centered();
  const auto& f = chart.frame();
  const Vec& x = chart.base();
  const double R = chart.coordinate_radius();
  const EpsilonLadder& ladder = cfg.ladder;
  const double eps_min = ladder.smallest();
  const ConvergenceOptions conv{cfg.limit_tolerance, cfg.noise_floor};
  const double tol = cfg.limit_tolerance;

  // Independent streams per check keep failures in one check from shifting the samples of the next.
  auto rng_for = [&](std::uint64_t k) { return Rng(cfg.seed + 7919 * k); };

  std::unique_ptr<GradedAlgebra> alg_ptr;
  std::string alg_error;
  try {
    alg_ptr = std::make_unique<GradedAlgebra>(tangent_algebra(chart));
  } catch (const std::exception& e) {
    alg_error = e.what();
  }
  auto need_alg = [&]() -> const GradedAlgebra& {
    if (!alg_ptr) throw Error("tangent algebra unavailable: " + alg_error);
    return *alg_ptr;
  };

  std::vector<detail::SamplePair> pairs3, pairs4;
  std::string sample_error;
  try {
    Rng r3 = rng_for(1), r4 = rng_for(2);
    pairs3 = detail::sample_pairs(chart, cfg.a3_radius * R, cfg.samples, r3);
    pairs4 = detail::sample_pairs(chart, cfg.a4_radius * R, cfg.samples, r4);
  } catch (const std::exception& e) {
    sample_error = e.what();
  }
  auto need_pairs = [&](const std::vector<detail::SamplePair>& p) -> const std::vector<detail::SamplePair>& {
    if (p.empty()) throw Error("sampling failed: " + sample_error);
    return p;
  };

  // regularity on the grid used for the uniformity probes
  rep.checks.push_back(guarded("regularity", "frame regular and graded on the base-point grid", 1e-8, [&] {
    const auto pts = detail::grid_points(x, cfg.grid_halfwidth * R);
    const auto r = validate_regularity(f, pts);
    auto c = single("regularity", "frame regular and graded on the base-point grid", r.max_residual, 0.0, 1e-8);
    c.pass = r.pass;
    c.status = r.pass ? "PASS" : "FAIL";
    if (!r.layers_consistent) c.note = r.layer_message;
    return c;
  }));

  // (A0) continuity in eps and the ball inclusions
  rep.checks.push_back(guarded("A0.continuity", "Delta_eps u continuous in eps", 1e-5, [&] {
    const auto& p = need_pairs(pairs3);
    CheckResult c{"A0.continuity", "Delta_eps u continuous in eps", 1e-5};
    double prev = INFINITY;
    bool monotone = true;
    for (double h = 1e-2; h >= 1e-6; h *= 0.1) {
      double m = 0.0;
      for (const auto& s : p)
        m = std::max(m, sup_norm(dilation_delta_cap(chart, s.u, 0.5 + h) - dilation_delta_cap(chart, s.u, 0.5)));
      monotone = monotone && m < prev;
      prev = m;
      CheckRow row;
      row.eps = h;
      row.measured = m;
      row.reference = 0.0;
      row.error = m;
      c.rows.push_back(row);
    }
    c.pass = monotone && prev <= c.tolerance;
    c.status = c.pass ? "PASS" : "FAIL";
    return c;
  }));
  rep.checks.push_back(guarded("A0.inclusion", "B(x, r eps) in Delta_eps B(x, r) in B(x, r)", cfg.exact_tolerance, [&] {
    Rng rng = rng_for(3);
    const double r = cfg.a3_radius * R;
    CheckResult c{"A0.inclusion", "B(x, r eps) in Delta_eps B(x, r) in B(x, r)", cfg.exact_tolerance};
    double worst = 0.0;
    for (int k = 0; k < ladder.count(); k += 3) {
      const double eps = ladder[k];
      const Box small = box(chart, r * eps), big = box(chart, r);
      for (int s = 0; s < cfg.samples; ++s) {
        // image of the big ball stays in B(x, r eps); preimage of the small ball lies in B(x, r)
        const Vec u = big.sample(rng);
        const double du = dist_inf(f, x, dilation_delta_cap(chart, u, eps), chart.options());
        worst = std::max(worst, std::max(0.0, du - r * eps));
        const Vec w = small.sample(rng);
        const double dw = dist_inf(f, x, dilation_delta_cap(chart, w, 1.0 / eps), chart.options());
        worst = std::max(worst, std::max(0.0, dw - r));
      }
      CheckRow row;
      row.eps = eps;
      row.measured = worst;
      row.reference = 0.0;
      row.error = worst;
      c.rows.push_back(row);
    }
    c.pass = worst <= c.tolerance;
    c.status = c.pass ? "PASS" : "FAIL";
    return c;
  }));

  // (A1)
  rep.checks.push_back(guarded("A1.fixed_point", "Delta_eps x = x and Delta_1 = id", 0.0, [&] {
    const auto& p = need_pairs(pairs3);
    double worst = 0.0;
    for (double eps : ladder.values()) worst = std::max(worst, sup_norm(dilation_delta_cap(chart, x, eps) - x));
    for (const auto& s : p) worst = std::max(worst, sup_norm(dilation_delta_cap(chart, s.u, 1.0) - s.u));
    return single("A1.fixed_point", "Delta_eps x = x and Delta_1 = id", worst, 0.0, 0.0);
  }));
  rep.checks.push_back(guarded("A1.contraction", "d(x, Delta_eps u) = eps d(x, u) -> 0", cfg.exact_tolerance, [&] {
    const auto& p = need_pairs(pairs3);
    CheckResult c{"A1.contraction", "d(x, Delta_eps u) = eps d(x, u) -> 0", cfg.exact_tolerance};
    double worst = 0.0;
    for (double eps : ladder.values()) {
      double rung = 0.0, meas = 0.0;
      for (const auto& s : p) {
        const double d = dist_inf(f, x, dilation_delta_cap(chart, s.u, eps), chart.options());
        const double ref = eps * graded_norm(s.uc, f.degrees());
        rung = std::max(rung, std::abs(d - ref) / eps);
        meas = std::max(meas, d);
      }
      worst = std::max(worst, rung);
      CheckRow row;
      row.eps = eps;
      row.measured = meas;
      row.reference = 0.0;
      row.error = rung;
      c.rows.push_back(row);
    }
    c.pass = worst <= c.tolerance && c.rows.back().measured <= eps_min * R;
    c.status = c.pass ? "PASS" : "FAIL";
    return c;
  }));

  // (A2)
  rep.checks.push_back(guarded("A2.semigroup", "Delta_eps Delta_mu u = Delta_{eps mu} u", cfg.exact_tolerance, [&] {
    const auto& p = need_pairs(pairs3);
    CheckResult c{"A2.semigroup", "Delta_eps Delta_mu u = Delta_{eps mu} u", cfg.exact_tolerance};
    double worst = 0.0;
    for (int k = 0; k < ladder.count(); ++k) {
      const double eps = ladder[k];
      const double mu = ladder[ladder.count() - 1 - k];
      double rung = 0.0;
      for (const auto& s : p) {
        const Vec lhs = dilation_delta_cap(chart, dilation_delta_cap(chart, s.u, mu), eps);
        rung = std::max(rung, sup_norm(lhs - dilation_delta_cap(chart, s.u, eps * mu)));
      }
      worst = std::max(worst, rung);
      CheckRow row;
      row.eps = eps;
      row.measured = rung;
      row.reference = 0.0;
      row.error = rung;
      c.rows.push_back(row);
    }
    c.pass = worst <= c.tolerance;
    c.status = c.pass ? "PASS" : "FAIL";
    return c;
  }));

  // (A3)
  const std::string a3_desc = "eps^-1 d(Delta_eps u, Delta_eps v) -> d^x(u, v)";
  ConvergenceReport a3_base(ladder);
  bool have_a3 = false;
  rep.checks.push_back(guarded("A3.limit", a3_desc, tol, [&] {
    a3_base = detail::a3_ladder(chart, need_alg(), need_pairs(pairs3), ladder, conv);
    have_a3 = true;
    auto c = detail::from_report("A3.limit", a3_desc, a3_base);
    std::ostringstream os;
    os << "expected order alpha/M = " << f.alpha() / f.depth();
    c.note = os.str();
    if (a3_base.fit_points >= 2 && a3_base.fitted_order < f.alpha() / f.depth() - cfg.order_margin) c.pass = false;
    return c;
  }));
  if (cfg.uniformity)
    rep.checks.push_back(guarded("A3.uniformity", "A3 error, max over the base-point grid", tol, [&] {
      const auto pts = detail::grid_points(x, cfg.grid_halfwidth * R);
      std::vector<double> worst(static_cast<std::size_t>(ladder.count()), 0.0);
      Rng rng = rng_for(4);
      for (const Vec& y : pts) {
        const Chart cy = chart.centered_at(y);
        const auto alg = tangent_algebra(cy);
        const auto pairs = detail::sample_pairs(cy, cfg.a4_radius * R, cfg.grid_samples, rng);
        const auto r = detail::a3_ladder(cy, alg, pairs, ladder, conv);
        for (std::size_t k = 0; k < worst.size(); ++k) worst[k] = std::max(worst[k], r.errors[k]);
      }
      const auto r = analyze_errors(ladder, worst, worst, conv);
      auto c = detail::from_report("A3.uniformity", "A3 error, max over the base-point grid", r);
      if (have_a3 && !r.at_floor() && !a3_base.at_floor() && r.fit_points >= 2 && a3_base.fit_points >= 2 &&
          std::abs(r.fitted_order - a3_base.fitted_order) > cfg.uniformity_order_margin) {
        c.pass = false;
        c.note = "grid order departs from the base-point order";
      }
      std::ostringstream os;
      os << pts.size() << " base points";
      c.note += (c.note.empty() ? "" : "; ") + os.str();
      return c;
    }));
  rep.checks.push_back(guarded("A3.group_route", "ladder limit of A3 equals dist_inf_group", tol, [&] {
    if (!have_a3) throw Error("A3 ladder unavailable");
    return single("A3.group_route", "ladder limit of A3 equals dist_inf_group", a3_base.final_error(), 0.0, tol);
  }));
  rep.checks.push_back(guarded("A3.nondegenerate", "d^x(u, v) = 0 iff u = v", 1e-12, [&] {
    const auto& alg = need_alg();
    const auto& p = need_pairs(pairs3);
    double self = 0.0, min_distinct = INFINITY;
    for (const auto& s : p) {
      self = std::max(self, alg.distance(s.uc, s.uc));
      if (s.uc != s.vc) min_distinct = std::min(min_distinct, alg.distance(s.uc, s.vc));
    }
    auto c = single("A3.nondegenerate", "d^x(u, v) = 0 iff u = v", self, 0.0, 1e-12);
    c.rows.front().measured = min_distinct;
    c.pass = c.pass && min_distinct > 1e-12;
    c.status = c.pass ? "PASS" : "FAIL";
    return c;
  }));
  rep.checks.push_back(guarded("A3.cone", "limit quasimetric is conical on the manifold side", tol, [&] {
    const auto& p = need_pairs(pairs3);
    CheckResult c{"A3.cone", "limit quasimetric is conical on the manifold side", tol};
    double worst = 0.0;
    for (double mu : {0.5, 0.1}) {
      double rung = 0.0;
      for (const auto& s : p) {
        const double d = detail::rescaled_distance(chart, s.u, s.v, eps_min);
        const Vec a = dilation_delta_cap(chart, s.u, mu), b = dilation_delta_cap(chart, s.v, mu);
        const double dm = detail::rescaled_distance(chart, a, b, eps_min) / mu;
        rung = std::max(rung, std::abs(dm - d));
      }
      worst = std::max(worst, rung);
      CheckRow row;
      row.eps = mu;
      row.measured = rung;
      row.reference = 0.0;
      row.error = rung;
      c.rows.push_back(row);
    }
    c.pass = worst <= tol;
    c.status = c.pass ? "PASS" : "FAIL";
    return c;
  }));
  rep.checks.push_back(guarded("A3.distortion", "distortion of the rescaled space against d^x", tol, [&] {
    const auto& alg = need_alg();
    const auto& p = need_pairs(pairs3);
    std::vector<Vec> pts;
    for (const auto& s : p) pts.push_back(s.u), pts.push_back(s.v);
    std::vector<double> d;
    for (double eps : ladder.values()) d.push_back(rescaled_distortion(chart, alg, pts, eps));
    return detail::from_report("A3.distortion", "distortion of the rescaled space against d^x",
                               analyze_errors(ladder, d, d, conv));
  }));

  // (A4) and the combinations it induces
  rep.checks.push_back(guarded("A4.lambda", "Lambda_eps(u, v) -> Sigma(inv u, v) = (-u)*v", tol, [&] {
    return detail::from_report("A4.lambda", "Lambda_eps(u, v) -> Sigma(inv u, v) = (-u)*v",
                               detail::lambda_ladder(chart, need_alg(), need_pairs(pairs4), ladder, conv));
  }));
  rep.checks.push_back(guarded("A4.sigma", "Sigma_eps(u, v) -> u*v", tol, [&] {
    const auto& alg = need_alg();
    const auto& p = need_pairs(pairs4);
    std::vector<Vec> worst_seq;
    std::vector<double> values, errors;
    for (double eps : ladder.values()) {
      double worst = 0.0, meas = 0.0;
      for (const auto& s : p) {
        const Vec z = normal_coords(chart, sigma_eps(chart, s.u, s.v, eps)).v;
        const double e = sup_norm(z - alg.product(s.uc, s.vc));
        if (e >= worst) meas = sup_norm(z);
        worst = std::max(worst, e);
      }
      values.push_back(meas);
      errors.push_back(worst);
    }
    return detail::from_report("A4.sigma", "Sigma_eps(u, v) -> u*v", analyze_errors(ladder, values, errors, conv));
  }));
  rep.checks.push_back(guarded("A4.inv", "inv_eps(u) -> -u", tol, [&] {
    const auto& p = need_pairs(pairs4);
    std::vector<double> values, errors;
    for (double eps : ladder.values()) {
      double worst = 0.0, meas = 0.0;
      for (const auto& s : p) {
        const Vec z = normal_coords(chart, inv_eps(chart, s.u, eps)).v;
        const double e = sup_norm(z + s.uc);
        if (e >= worst) meas = sup_norm(z);
        worst = std::max(worst, e);
      }
      values.push_back(meas);
      errors.push_back(worst);
    }
    return detail::from_report("A4.inv", "inv_eps(u) -> -u", analyze_errors(ladder, values, errors, conv));
  }));
  if (cfg.uniformity)
    rep.checks.push_back(guarded("A4.uniformity", "Lambda_eps error, max over the base-point grid", tol, [&] {
      const auto pts = detail::grid_points(x, cfg.grid_halfwidth * R);
      std::vector<double> worst(static_cast<std::size_t>(ladder.count()), 0.0);
      Rng rng = rng_for(5);
      for (const Vec& y : pts) {
        const Chart cy = chart.centered_at(y);
        const auto alg = tangent_algebra(cy);
        const auto pairs = detail::sample_pairs(cy, cfg.a4_radius * R, cfg.grid_samples, rng);
        const auto r = detail::lambda_ladder(cy, alg, pairs, ladder, conv);
        for (std::size_t k = 0; k < worst.size(); ++k) worst[k] = std::max(worst[k], r.errors[k]);
      }
      return detail::from_report("A4.uniformity", "Lambda_eps error, max over the base-point grid",
                                 analyze_errors(ladder, worst, worst, conv));
    }));

  // identities between the limits, evaluated at the smallest rung
  auto nc = [&](const Vec& p) { return normal_coords(chart, p).v; };
  rep.checks.push_back(guarded("limit.lambda_sigma", "Lambda(u, v) = Sigma(inv u, v)", tol, [&] {
    double worst = 0.0;
    for (const auto& s : need_pairs(pairs4)) {
      const Vec l = nc(lambda_eps(chart, s.u, s.v, eps_min));
      const Vec r = nc(sigma_eps(chart, inv_eps(chart, s.u, eps_min), s.v, eps_min));
      worst = std::max(worst, sup_norm(l - r));
    }
    auto c = single("limit.lambda_sigma", "Lambda(u, v) = Sigma(inv u, v)", worst, 0.0, tol);
    c.rows.front().eps = eps_min;
    return c;
  }));
  rep.checks.push_back(guarded("limit.identities", "Sigma(x,u) = u, Sigma(u, inv u) = x, inv inv u = u", tol, [&] {
    double worst = 0.0;
    for (const auto& s : need_pairs(pairs4)) {
      worst = std::max(worst, sup_norm(nc(sigma_eps(chart, x, s.u, eps_min)) - s.uc));
      const Vec iu = inv_eps(chart, s.u, eps_min);
      worst = std::max(worst, sup_norm(nc(sigma_eps(chart, s.u, iu, eps_min))));
      worst = std::max(worst, sup_norm(nc(inv_eps(chart, iu, eps_min)) - s.uc));
    }
    auto c = single("limit.identities", "Sigma(x,u) = u, Sigma(u, inv u) = x, inv inv u = u", worst, 0.0, tol);
    c.rows.front().eps = eps_min;
    return c;
  }));
  rep.checks.push_back(guarded("limit.automorphism", "delta_mu commutes with Sigma and inv", tol, [&] {
    const double mu = 0.5;
    double worst = 0.0;
    for (const auto& s : need_pairs(pairs4)) {
      const Vec lhs = dilation_delta_cap(chart, sigma_eps(chart, s.u, s.v, eps_min), mu);
      const Vec rhs = sigma_eps(chart, dilation_delta_cap(chart, s.u, mu), dilation_delta_cap(chart, s.v, mu), eps_min);
      worst = std::max(worst, sup_norm(nc(lhs) - nc(rhs)));
      const Vec il = inv_eps(chart, dilation_delta_cap(chart, s.u, mu), eps_min);
      const Vec ir = dilation_delta_cap(chart, inv_eps(chart, s.u, eps_min), mu);
      worst = std::max(worst, sup_norm(nc(il) - nc(ir)));
    }
    auto c = single("limit.automorphism", "delta_mu commutes with Sigma and inv", worst, 0.0, tol);
    c.rows.front().eps = eps_min;
    return c;
  }));
  rep.checks.push_back(guarded("limit.isometry", "d^x(Sigma(u,v), Sigma(u,w)) = d^x(v,w)", tol, [&] {
    const auto& alg = need_alg();
    const auto& p = need_pairs(pairs4);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& s = p[i];
      const auto& w = p[(i + 1) % p.size()].v;
      const Vec a = nc(sigma_eps(chart, s.u, s.v, eps_min));
      const Vec b = nc(sigma_eps(chart, s.u, w, eps_min));
      worst = std::max(worst, std::abs(alg.distance(a, b) - alg.distance(s.vc, nc(w))));
    }
    auto c = single("limit.isometry", "d^x(Sigma(u,v), Sigma(u,w)) = d^x(v,w)", worst, 0.0, tol);
    c.rows.front().eps = eps_min;
    return c;
  }));
  return rep;
}

}  // namespace carnot
