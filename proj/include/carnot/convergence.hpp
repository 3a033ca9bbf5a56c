#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "carnot/errors.hpp"
#include "carnot/types.hpp"

namespace carnot {

/// eps_k = eps0 * ratio^k, k = 0..count-1.
class EpsilonLadder {
public:
  EpsilonLadder(double eps0 = 0.5, double ratio = 0.5, int count = 10) : eps0_(eps0), ratio_(ratio), count_(count) {
    if (!(eps0 > 0.0 && eps0 <= 1.0)) throw ConfigError("ladder: eps0 must lie in (0, 1]");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("ladder: ratio must lie in (0, 1)");
    if (count < 5) throw ConfigError("ladder: at least 5 rungs are required");
    values_.reserve(static_cast<std::size_t>(count));
    double e = eps0;
    for (int k = 0; k < count; ++k, e *= ratio) values_.push_back(e);
  }

  double eps0() const { return eps0_; }
  double ratio() const { return ratio_; }
  int count() const { return count_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](int k) const { return values_[static_cast<std::size_t>(k)]; }
  double smallest() const { return values_.back(); }

private:
  double eps0_, ratio_;
  int count_;
  std::vector<double> values_;
};

enum class LimitStatus { Converged, NotConverged, Diverging };

inline const char* to_string(LimitStatus s) {
  switch (s) {
    case LimitStatus::Converged: return "CONVERGED";
    case LimitStatus::NotConverged: return "NOT_CONVERGED";
    case LimitStatus::Diverging: return "DIVERGING";
  }
  return "?";
}

struct ConvergenceOptions {
  /// Accepted error at the smallest rung.
  double tolerance = 1e-3;
  /// Errors below this are treated as exact and left out of the fit.
  double noise_floor = 1e-9;
};

struct ConvergenceReport {
  explicit ConvergenceReport(EpsilonLadder l = {}) : ladder(std::move(l)) {}

  EpsilonLadder ladder;
  /// Measured quantity per rung (for vector sequences: the value's sup norm).
  std::vector<double> values;
  std::vector<double> errors;
  /// Slope of log(error) against log(eps); +inf when every rung is at the floor.
  double fitted_order = std::numeric_limits<double>::quiet_NaN();
  double fit_residual = 0.0;
  int fit_points = 0;
  Vec limit_estimate;
  LimitStatus status = LimitStatus::NotConverged;
  double tolerance = 1e-3;
  double noise_floor = 1e-9;

  bool converged() const { return status == LimitStatus::Converged; }
  bool at_floor() const { return fit_points == 0; }
  double final_error() const { return errors.back(); }
};

/// Least-squares power law through the above-floor errors plus the status rules.
inline ConvergenceReport analyze_errors(const EpsilonLadder& ladder, std::vector<double> values,
                                        std::vector<double> errors, const ConvergenceOptions& opt = {}) {
  if (static_cast<int>(errors.size()) != ladder.count() || values.size() != errors.size())
    throw ConfigError("convergence: one value per rung is required");
  ConvergenceReport r(ladder);
  r.values = std::move(values);
  r.errors = std::move(errors);
  r.tolerance = opt.tolerance;
  r.noise_floor = opt.noise_floor;

  std::vector<double> xs, ys;
  bool finite = true;
  for (int k = 0; k < ladder.count(); ++k) {
    const double e = r.errors[static_cast<std::size_t>(k)];
    if (!std::isfinite(e)) finite = false;
    if (e >= opt.noise_floor && std::isfinite(e)) {
      xs.push_back(std::log(ladder[k]));
      ys.push_back(std::log(e));
    }
  }
  r.fit_points = static_cast<int>(xs.size());
  if (xs.empty()) {
    r.fitted_order = std::numeric_limits<double>::infinity();
  } else if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    r.fitted_order = sxy / sxx;
    const double icpt = my - r.fitted_order * mx;
    double ss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) ss += std::pow(ys[i] - icpt - r.fitted_order * xs[i], 2);
    r.fit_residual = std::sqrt(ss / n);
  }

  const auto& e = r.errors;
  const std::size_t m = e.size();
  const bool rising = finite && e[m - 1] >= opt.noise_floor && e[m - 1] > e[m - 2] && e[m - 2] > e[m - 3];
  if (!finite || rising) {
    r.status = LimitStatus::Diverging;
  } else if (e[m - 1] < opt.tolerance && (r.fit_points < 2 || r.fitted_order > 0.0)) {
    r.status = LimitStatus::Converged;
  } else {
    r.status = LimitStatus::NotConverged;
  }
  return r;
}

/// Errors of a ladder-indexed sequence against a reference under `distance`
/// (sup norm of the coordinate difference by default).
inline ConvergenceReport estimate_limit(const EpsilonLadder& ladder, const std::vector<Vec>& sequence,
                                        const Vec& reference, const ConvergenceOptions& opt = {},
                                        const std::function<double(const Vec&, const Vec&)>& distance = {}) {
  if (static_cast<int>(sequence.size()) != ladder.count())
    throw ConfigError("estimate_limit: sequence length differs from ladder length");
  std::vector<double> values, errors;
  for (const Vec& v : sequence) {
    values.push_back(sup_norm(v));
    errors.push_back(distance ? distance(v, reference) : sup_norm(v - reference));
  }
  auto r = analyze_errors(ladder, std::move(values), std::move(errors), opt);
  r.limit_estimate = sequence.back();
  return r;
}

}  // namespace carnot
