#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "carnot/convergence.hpp"
#include "carnot/expmap.hpp"
#include "carnot/limits.hpp"
#include "carnot/nilpotent.hpp"
#include "carnot/polynomial.hpp"

namespace carnot {

// -- polynomial maps ------------------------------------------------------------

/// Coordinate map R^n -> R^m with polynomial components in x1..xn.
class PolyMap {
public:
  PolyMap(std::string name, std::size_t source_dim, std::vector<Polynomial> comps)
      : name_(std::move(name)), n_(source_dim), comps_(std::move(comps)) {
    if (comps_.empty()) throw ConfigError("map '" + name_ + "' has no components");
    for (const auto& c : comps_)
      if (c.num_vars() != n_) throw ConfigError("map '" + name_ + "': component arity differs from source dimension");
  }

  const std::string& name() const { return name_; }
  int source_dim() const { return static_cast<int>(n_); }
  int target_dim() const { return static_cast<int>(comps_.size()); }
  const Polynomial& component(int k) const { return comps_[static_cast<std::size_t>(k)]; }

  Vec operator()(const Vec& x) const {
    if (x.size() != source_dim()) throw ConfigError("map '" + name_ + "': point dimension mismatch");
    Vec y(target_dim());
    for (int k = 0; k < target_dim(); ++k) y[k] = comps_[static_cast<std::size_t>(k)].eval(as_span(x));
    return y;
  }

  /// (*this) o inner.
  PolyMap after(const PolyMap& inner) const {
    if (inner.target_dim() != source_dim()) throw ConfigError("maps cannot be composed: dimension mismatch");
    std::vector<Polynomial> out;
    for (const auto& c : comps_) out.push_back(c.compose(inner.comps_));
    return PolyMap(name_ + " o " + inner.name_, inner.n_, std::move(out));
  }

  /// x -> f(x + g) - f(g).
  PolyMap recentered(const Vec& g) const {
    if (g.size() != source_dim()) throw ConfigError("map '" + name_ + "': base dimension mismatch");
    std::vector<Polynomial> shift;
    for (std::size_t k = 0; k < n_; ++k)
      shift.push_back(Polynomial::variable(n_, k) + Polynomial::constant(n_, g[static_cast<Eigen::Index>(k)]));
    const Vec fg = (*this)(g);
    std::vector<Polynomial> out;
    for (int k = 0; k < target_dim(); ++k)
      out.push_back(comps_[static_cast<std::size_t>(k)].compose(shift) - Polynomial::constant(n_, fg[k]));
    return PolyMap(name_, n_, std::move(out));
  }

private:
  std::string name_;
  std::size_t n_;
  std::vector<Polynomial> comps_;
};

/// "p1; p2; ...; pm" over x1..x{source_dim}.
inline PolyMap parse_map(const std::string& text, int source_dim, std::string name = "") {
  std::vector<Polynomial> comps;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ';')) comps.push_back(parse_polynomial(part, static_cast<std::size_t>(source_dim)));
  return PolyMap(name.empty() ? text : std::move(name), static_cast<std::size_t>(source_dim), std::move(comps));
}

namespace detail {
inline std::vector<double> map_parameters(const std::string& name, std::size_t prefix, std::size_t count) {
  std::vector<double> out;
  std::stringstream ss(name.substr(prefix));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad parameter '" + tok + "' in map '" + name + "'");
    }
    if (used != tok.size() || !std::isfinite(v)) throw ConfigError("bad parameter '" + tok + "' in map '" + name + "'");
    out.push_back(v);
  }
  if (out.size() != count) throw ConfigError("map '" + name + "' takes " + std::to_string(count) + " parameters");
  return out;
}

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << v << ")";
  return os.str();
}
}  // namespace detail

inline bool is_builtin_map(const std::string& name) {
  return name == "identity" || name == "heis-shear" || name == "heis-shear-perturbed" ||
         name.rfind("heis-dilation:", 0) == 0 || name.rfind("heis-linear:", 0) == 0;
}

/// identity (any dimension), and on Heisenberg coordinates: heis-dilation:l,
/// heis-shear, heis-shear-perturbed, heis-linear:a,b,c,d.
inline PolyMap builtin_map(const std::string& name, int source_dim) {
  using detail::num;
  if (name == "identity") {
    std::vector<Polynomial> comps;
    for (int k = 0; k < source_dim; ++k)
      comps.push_back(Polynomial::variable(static_cast<std::size_t>(source_dim), static_cast<std::size_t>(k)));
    return PolyMap(name, static_cast<std::size_t>(source_dim), std::move(comps));
  }
  if (source_dim != 3) throw ConfigError("map '" + name + "' acts on three-dimensional Heisenberg coordinates");
  if (name == "heis-shear") return parse_map("x1 + x2; x2; x3", 3, name);
  if (name == "heis-shear-perturbed") return parse_map("x1 + x2 + x2^2; x2; x3 + x1^3", 3, name);
  if (name.rfind("heis-dilation:", 0) == 0) {
    const double l = detail::map_parameters(name, 14, 1)[0];
    return parse_map(num(l) + "*x1; " + num(l) + "*x2; " + num(l * l) + "*x3", 3, name);
  }
  if (name.rfind("heis-linear:", 0) == 0) {
    const auto p = detail::map_parameters(name, 12, 4);
    const double det = p[0] * p[3] - p[1] * p[2];
    return parse_map(num(p[0]) + "*x1 + " + num(p[1]) + "*x2; " + num(p[2]) + "*x1 + " + num(p[3]) + "*x2; " +
                         num(det) + "*x3",
                     3, name);
  }
  throw ConfigError("unknown built-in map '" + name + "'");
}

/// Built-in name, or the polynomial DSL otherwise.
inline PolyMap resolve_map(const std::string& spec, int source_dim) {
  return is_builtin_map(spec) ? builtin_map(spec, source_dim) : parse_map(spec, source_dim);
}

// -- homogeneous homomorphisms ----------------------------------------------------

/// Linear map of exponential coordinates between two tangent groups.
struct HomogeneousHom {
  Mat matrix;
  GradedAlgebra source;
  GradedAlgebra target;

  Vec operator()(const Vec& v) const { return matrix * v; }
};

/// Largest |L_ji| with deg_target(j) != deg_source(i).
inline double block_violation(const Mat& m, const std::vector<int>& source_deg, const std::vector<int>& target_deg) {
  if (m.rows() != static_cast<Eigen::Index>(target_deg.size()) || m.cols() != static_cast<Eigen::Index>(source_deg.size()))
    throw ConfigError("matrix shape does not match the algebras");
  double v = 0.0;
  for (Eigen::Index j = 0; j < m.rows(); ++j)
    for (Eigen::Index i = 0; i < m.cols(); ++i)
      if (target_deg[static_cast<std::size_t>(j)] != source_deg[static_cast<std::size_t>(i)]) v = std::max(v, std::abs(m(j, i)));
  return v;
}

/// Zeroes every entry outside the degree-matched blocks.
inline Mat project_blocks(Mat m, const std::vector<int>& source_deg, const std::vector<int>& target_deg) {
  for (Eigen::Index j = 0; j < m.rows(); ++j)
    for (Eigen::Index i = 0; i < m.cols(); ++i)
      if (target_deg[static_cast<std::size_t>(j)] != source_deg[static_cast<std::size_t>(i)]) m(j, i) = 0.0;
  return m;
}

struct HomCheck {
  double block_violation = 0.0;
  double hom_residual = 0.0;
  /// max |tilde delta_t (L v) - L (delta_t v)| over samples and t in {0.5, 0.1, 0.01}.
  double commutation_residual = 0.0;
  double tolerance = 1e-8;

  bool blocks_ok() const { return block_violation == 0.0; }
  bool pass() const { return blocks_ok() && hom_residual <= tolerance; }
};

inline HomCheck check_homogeneous_hom(const HomogeneousHom& L, int samples, Rng& rng, double radius = 0.5,
                                      double tolerance = 1e-8) {
  HomCheck c;
  c.tolerance = tolerance;
  c.block_violation = block_violation(L.matrix, L.source.degrees(), L.target.degrees());
  for (int s = 0; s < samples; ++s) {
    const Vec a = rng.graded_box(L.source.degrees(), radius), b = rng.graded_box(L.source.degrees(), radius);
    c.hom_residual = std::max(c.hom_residual, sup_norm(L(L.source.product(a, b)) - L.target.product(L(a), L(b))));
    for (double t : {0.5, 0.1, 0.01})
      c.commutation_residual =
          std::max(c.commutation_residual, sup_norm(L.target.dilate(L(a), t) - L(L.source.dilate(a, t))));
  }
  return c;
}

// -- numerical differentials -------------------------------------------------------

struct PansuOptions {
  EpsilonLadder ladder{};
  std::uint64_t seed = 42;
  /// Random probes on top of the scaled basis directions.
  int probes = 12;
  /// Probe radius as a fraction of the source coordinate radius.
  double probe_radius = 0.5;
  /// Fit on the first-order extrapolation of the two smallest rungs.
  bool extrapolate = true;
  double tolerance = 1e-3;
  double noise_floor = 1e-9;
  /// Smallest fitted order counted as a vanishing residual.
  double min_order = 0.1;
  double hom_tolerance = 1e-8;
  /// Allowed drift of the max-to-mean residual ratio across the ladder.
  double uniformity_factor = 3.0;
};

/// Source and target charts recentered at g and f(g), with the map in the shifted coordinates.
class PansuProblem {
public:
  PansuProblem(const Chart& source, const Frame& target, const PolyMap& f)
      : src_(source.centered()),
        image_base_(f(source.base())),
        dst_(Chart(target, image_base_, source.options()).centered()),
        f_(f.recentered(source.base())),
        src_alg_(tangent_algebra(src_)),
        dst_alg_(tangent_algebra(dst_)) {
    if (f.source_dim() != source.dim() || f.target_dim() != target.dim())
      throw ConfigError("map '" + f.name() + "' does not match the frame dimensions");
  }

  const Chart& source() const { return src_; }
  const Chart& target() const { return dst_; }
  const Vec& image_base() const { return image_base_; }
  const GradedAlgebra& source_algebra() const { return src_alg_; }
  const GradedAlgebra& target_algebra() const { return dst_alg_; }

  /// Image of exp_g(delta_t v) in normal coordinates at f(g).
  Vec image_coords(const Vec& v, double t) const {
    return normal_coords(dst_, f_(exp_map(src_, src_alg_.dilate(v, t)))).v;
  }
  /// tilde delta_{1/t} of image_coords.
  Vec rescaled(const Vec& v, double t) const { return dst_alg_.dilate(image_coords(v, t), 1.0 / t); }
  Vec image_point(const Vec& v, double t) const { return f_(exp_map(src_, src_alg_.dilate(v, t))); }

  /// Deterministic scaled basis directions followed by seeded random probes.
  std::vector<Vec> probes(const PansuOptions& opt) const {
    const int n = src_alg_.dim();
    const double r = opt.probe_radius * src_.coordinate_radius();
    std::vector<Vec> out;
    for (int i = 0; i < n; ++i) {
      Vec e = Vec::Zero(n);
      e[i] = std::pow(r, src_alg_.degree(i));
      out.push_back(e);
    }
    Rng rng(opt.seed);
    for (int k = 0; k < opt.probes; ++k) out.push_back(rng.graded_box(src_alg_.degrees(), r));
    return out;
  }

private:
  Chart src_;
  Vec image_base_;
  Chart dst_;
  PolyMap f_;
  GradedAlgebra src_alg_, dst_alg_;
};

struct DifferentialResult {
  HomogeneousHom L;
  /// Item 1 residual: max over probes of d^{f(g)}(tilde delta_{1/t} f(delta_t v), L v).
  ConvergenceReport report;
  /// The same with the mean over probes.
  std::vector<double> mean_residual;
  bool uniform = true;
  Vec image_base;
  double hom_residual = 0.0;
  double min_order = 0.1;

  bool vanishing() const {
    return report.status != LimitStatus::Diverging && (report.at_floor() || report.fitted_order > min_order);
  }
  bool differentiable() const { return vanishing() && uniform; }
};

namespace detail {

inline Mat fit_blocks(const PansuProblem& p, const std::vector<Vec>& probes, const PansuOptions& opt) {
  const auto& sa = p.source_algebra();
  const auto& ta = p.target_algebra();
  const int k = opt.ladder.count() - 1;
  const double t = opt.ladder[k];
  std::vector<Vec> values;
  for (const Vec& v : probes) {
    Vec y = p.rescaled(v, t);
    if (opt.extrapolate) {
      const double t2 = opt.ladder[k - 1];
      y = (t2 * y - t * p.rescaled(v, t2)) / (t2 - t);
    }
    values.push_back(std::move(y));
  }
  Mat L = Mat::Zero(ta.dim(), sa.dim());
  for (int j = 0; j < ta.dim(); ++j) {
    std::vector<int> cols;
    for (int i = 0; i < sa.dim(); ++i)
      if (sa.degree(i) == ta.degree(j)) cols.push_back(i);
    if (cols.empty()) continue;
    Mat A(static_cast<Eigen::Index>(probes.size()), static_cast<Eigen::Index>(cols.size()));
    Vec b(static_cast<Eigen::Index>(probes.size()));
    for (std::size_t r = 0; r < probes.size(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c)
        A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = probes[r][cols[c]];
      b[static_cast<Eigen::Index>(r)] = values[r][j];
    }
    const Vec x = A.colPivHouseholderQr().solve(b);
    for (std::size_t c = 0; c < cols.size(); ++c) L(j, cols[c]) = x[static_cast<Eigen::Index>(c)];
  }
  return L;
}

struct ProbeLadder {
  std::vector<double> max, mean;
  /// Probes skipped per rung because an intermediate point left a chart.
  std::vector<int> skipped;
};

/// Per rung, max and mean over the admissible probes of `residual(v, t)`;
/// NaN when no probe is admissible.
template <class F>
ProbeLadder probe_ladder(const EpsilonLadder& ladder, const std::vector<Vec>& probes, const F& residual) {
  ProbeLadder out;
  for (double t : ladder.values()) {
    double mx = 0.0, sum = 0.0;
    int used = 0;
    for (const Vec& v : probes) {
      try {
        const double r = residual(v, t);
        mx = std::max(mx, r);
        sum += r;
        ++used;
      } catch (const OutOfChart&) {
      } catch (const NoConvergence&) {
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.max.push_back(used > 0 ? mx : nan);
    out.mean.push_back(used > 0 ? sum / used : nan);
    out.skipped.push_back(static_cast<int>(probes.size()) - used);
  }
  return out;
}

/// max/mean at the smallest rung stays within `factor` of max/mean at the largest.
inline bool uniform_decay(const ProbeLadder& p, double floor, double factor) {
  const double m0 = p.mean.front(), m1 = p.mean.back();
  if (p.max.back() < floor) return true;
  if (!(m0 > 0.0 && m1 > 0.0)) return false;
  const double drift = (p.max.back() / m1) / (p.max.front() / m0);
  return drift <= factor && drift >= 1.0 / factor;
}

inline ConvergenceReport residual_report(const EpsilonLadder& ladder, const ProbeLadder& p, const PansuOptions& opt) {
  return analyze_errors(ladder, p.max, p.max, {opt.tolerance, opt.noise_floor});
}

}  // namespace detail

/// Fits the degree-blocked L at the smallest rung and reports the item 1 residual ladder.
inline DifferentialResult pansu_differential(const PansuProblem& p, const PansuOptions& opt = {}) {
  if (opt.ladder.count() < 2) throw ConfigError("pansu: ladder too short");
  const auto probes = p.probes(opt);
  HomogeneousHom L{detail::fit_blocks(p, probes, opt), p.source_algebra(), p.target_algebra()};
  const auto& ta = p.target_algebra();
  const auto pl = detail::probe_ladder(opt.ladder, probes, [&](const Vec& v, double t) {
    return ta.resolved_distance(p.rescaled(v, t), L(v));
  });
  DifferentialResult r{L, detail::residual_report(opt.ladder, pl, opt), pl.mean, true, p.image_base(), 0.0,
                       opt.min_order};
  r.uniform = detail::uniform_decay(pl, opt.noise_floor, opt.uniformity_factor);
  Rng rng(opt.seed + 1);
  r.hom_residual = check_homogeneous_hom(L, 100, rng, opt.probe_radius, opt.hom_tolerance).hom_residual;
  return r;
}

inline DifferentialResult pansu_differential(const Chart& source, const Frame& target, const PolyMap& f,
                                             const PansuOptions& opt = {}) {
  return pansu_differential(PansuProblem(source, target, f), opt);
}

// -- the five characterizations ------------------------------------------------------

struct EquivalenceItem {
  int item = 0;
  std::string description;
  ConvergenceReport report;
  bool uniform = true;
  bool vanishing = false;
};

struct EquivalenceReport {
  std::array<EquivalenceItem, 5> items;

  bool all_vanish() const {
    return std::all_of(items.begin(), items.end(), [](const EquivalenceItem& i) { return i.vanishing; });
  }
  bool none_vanish() const {
    return std::none_of(items.begin(), items.end(), [](const EquivalenceItem& i) { return i.vanishing; });
  }
  /// All five agree, as the equivalence demands.
  bool consistent() const { return all_vanish() || none_vanish(); }
  /// Largest gap between fitted orders among items with a finite fit.
  double order_spread() const {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& i : items)
      if (std::isfinite(i.report.fitted_order)) {
        lo = std::min(lo, i.report.fitted_order);
        hi = std::max(hi, i.report.fitted_order);
      }
    return hi >= lo ? hi - lo : 0.0;
  }
};

/// Residual ladders of items 1-5 for the candidate L on the probe set. Items
/// 2-4 are ratios at v_t = exp_g(delta_t v), the point approaching g.
inline EquivalenceReport check_equivalences(const PansuProblem& p, const HomogeneousHom& L, const PansuOptions& opt = {}) {
  const auto probes = p.probes(opt);
  const auto& sa = p.source_algebra();
  const auto& ta = p.target_algebra();
  const Chart& dst = p.target();
  auto d_y = [&](const Vec& v, double t) {
    const Vec lp = exp_map(dst, ta.dilate(L(v), t));
    return dist_inf_resolved(dst.frame(), p.image_point(v, t), lp, dst.options());
  };
  // d_X(g, v_t) and d^g(g, v_t) coincide: both are the graded norm of delta_t v.
  auto d_x = [&](const Vec& v, double t) { return sa.norm(sa.dilate(v, t)); };
  auto d_g = d_x;

  using Residual = std::function<double(const Vec&, double)>;
  const std::array<std::pair<std::string, Residual>, 5> forms{{
      {"d^{f(g)}(tilde delta_{1/t} f(delta_t v), L v)",
       [&](const Vec& v, double t) { return ta.resolved_distance(p.rescaled(v, t), L(v)); }},
      {"d^{f(g)}(f(v_t), L(v_t)) / d_X(g, v_t)",
       [&](const Vec& v, double t) { return ta.resolved_distance(p.image_coords(v, t), ta.dilate(L(v), t)) / d_x(v, t); }},
      {"d_Y(f(v_t), L(v_t)) / d^g(g, v_t)", [&](const Vec& v, double t) { return d_y(v, t) / d_g(v, t); }},
      {"d_Y(f(v_t), L(v_t)) / d_X(g, v_t)", [&](const Vec& v, double t) { return d_y(v, t) / d_x(v, t); }},
      {"d_Y(f(delta_t v), L(delta_t v)) / t", [&](const Vec& v, double t) { return d_y(v, t) / t; }},
  }};

  EquivalenceReport out;
  for (std::size_t k = 0; k < forms.size(); ++k) {
    const auto pl = detail::probe_ladder(opt.ladder, probes, forms[k].second);
    auto& item = out.items[k];
    item.item = static_cast<int>(k) + 1;
    item.description = forms[k].first;
    item.report = detail::residual_report(opt.ladder, pl, opt);
    item.uniform = detail::uniform_decay(pl, opt.noise_floor, opt.uniformity_factor);
    item.vanishing = item.report.status != LimitStatus::Diverging &&
                     (item.report.at_floor() || item.report.fitted_order > opt.min_order);
  }
  return out;
}

inline EquivalenceReport check_equivalences(const Chart& source, const Frame& target, const PolyMap& f,
                                            const HomogeneousHom& L, const PansuOptions& opt = {}) {
  return check_equivalences(PansuProblem(source, target, f), L, opt);
}

// -- chain rule ------------------------------------------------------------------------

struct ChainRuleReport {
  DifferentialResult df, dphi, dcomposed;
  Mat product;
  double residual = 0.0;
  double tolerance = 1e-4;

  bool pass() const { return residual <= tolerance; }
};

/// D(phi o f)(g) against D phi(f(g)) D f(g); X -> Y -> Z given by the three frames.
inline ChainRuleReport chain_rule_check(const Chart& source, const Frame& middle, const Frame& target, const PolyMap& f,
                                        const PolyMap& phi, const PansuOptions& opt = {}, double tolerance = 1e-4) {
  const Chart mid(middle, f(source.base()), source.options());
  ChainRuleReport r{pansu_differential(source, middle, f, opt), pansu_differential(mid, target, phi, opt),
                    pansu_differential(source, target, phi.after(f), opt), Mat(), 0.0, tolerance};
  r.product = r.dphi.L.matrix * r.df.L.matrix;
  r.residual = (r.dcomposed.L.matrix - r.product).cwiseAbs().maxCoeff();
  return r;
}

}  // namespace carnot
