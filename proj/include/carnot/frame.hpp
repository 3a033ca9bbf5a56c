#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "carnot/errors.hpp"
#include "carnot/polynomial.hpp"
#include "carnot/types.hpp"

namespace carnot {

/// A weighted polynomial frame X_1..X_N on an open set of R^N.
///
/// Field i has components `coefficient(i, k)`, k = 0..N-1, so that
/// X_i = sum_k coefficient(i,k) d/dx_{k+1}. First partial derivatives are
/// differentiated symbolically once at construction.
///
/// The constructor rejects malformed input (sizes, degree range, ordering).
/// Whether the declared depth is actually reached is a regularity question
/// and is reported by validate_regularity instead.
class Frame {
public:
  Frame(std::string name, int depth, std::vector<int> degrees,
        std::vector<std::vector<Polynomial>> fields, double alpha = 1.0,
        double coordinate_radius = 1.0)
      : name_(std::move(name)),
        depth_(depth),
        degrees_(std::move(degrees)),
        fields_(std::move(fields)),
        alpha_(alpha),
        radius_(coordinate_radius) {
    const std::size_t n = fields_.size();
    if (n == 0) throw ConfigError("frame '" + name_ + "': empty field list");
    if (depth_ < 1) throw ConfigError("frame '" + name_ + "': depth must be positive");
    if (degrees_.size() != n)
      throw ConfigError("frame '" + name_ + "': expected " + std::to_string(n) + " degrees, got " +
                        std::to_string(degrees_.size()));
    for (std::size_t i = 0; i < n; ++i) {
      if (fields_[i].size() != n)
        throw ConfigError("frame '" + name_ + "': field " + std::to_string(i + 1) + " has " +
                          std::to_string(fields_[i].size()) + " components, expected " +
                          std::to_string(n));
      for (const auto& p : fields_[i])
        if (p.num_vars() != n) throw ConfigError("frame '" + name_ + "': polynomial arity mismatch");
      if (degrees_[i] < 1 || degrees_[i] > depth_)
        throw ConfigError("frame '" + name_ + "': degree of field " + std::to_string(i + 1) +
                          " outside [1, depth]");
      if (i > 0 && degrees_[i] < degrees_[i - 1])
        throw ConfigError("frame '" + name_ + "': degrees must be nondecreasing");
    }
    if (degrees_.front() != 1) throw ConfigError("frame '" + name_ + "': first degree must be 1");
    if (!(alpha_ > 0.0 && alpha_ <= 1.0)) throw ConfigError("frame '" + name_ + "': alpha must lie in (0, 1]");
    if (!(radius_ > 0.0)) throw ConfigError("frame '" + name_ + "': coordinate_radius must be positive");

    layer_dims_.assign(static_cast<std::size_t>(depth_), 0);
    for (int m = 1; m <= depth_; ++m)
      layer_dims_[static_cast<std::size_t>(m - 1)] =
          static_cast<int>(std::count_if(degrees_.begin(), degrees_.end(), [m](int d) { return d <= m; }));

    jac_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      jac_[i].resize(n * n);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) jac_[i][k * n + l] = fields_[i][k].derivative(l);
    }
  }

  /// Builds a frame from coefficient strings in x1..xN (see parse_polynomial).
  static Frame parse(std::string name, int depth, std::vector<int> degrees,
                     const std::vector<std::vector<std::string>>& fields, double alpha = 1.0,
                     double coordinate_radius = 1.0) {
    const std::size_t n = fields.size();
    if (n == 0) throw ConfigError("frame '" + name + "': empty field list");
    std::vector<std::vector<Polynomial>> polys(n);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& s : fields[i]) polys[i].push_back(parse_polynomial(s, n));
    return Frame(std::move(name), depth, std::move(degrees), std::move(polys), alpha, coordinate_radius);
  }

  const std::string& name() const { return name_; }
  int dim() const { return static_cast<int>(fields_.size()); }
  int depth() const { return depth_; }
  const std::vector<int>& degrees() const { return degrees_; }
  int degree(int i) const { return degrees_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& layer_dims() const { return layer_dims_; }
  double alpha() const { return alpha_; }
  double coordinate_radius() const { return radius_; }
  const Polynomial& coefficient(int i, int k) const {
    return fields_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }

  /// True when the top declared layer is populated (deg X_N = M).
  bool layers_consistent() const { return degrees_.back() == depth_; }

  Frame with_radius(double r) const {
    return Frame(name_, depth_, degrees_, fields_, alpha_, r);
  }
  Frame with_degrees(std::string name, int depth, std::vector<int> degrees) const {
    return Frame(std::move(name), depth, std::move(degrees), fields_, alpha_, radius_);
  }

  /// The same fields in coordinates shifted so that `offset` becomes the origin.
  Frame translated(const Vec& offset) const {
    const int n = dim();
    if (offset.size() != n) throw ConfigError("translation dimension mismatch");
    std::vector<Polynomial> shift;
    for (int k = 0; k < n; ++k)
      shift.push_back(Polynomial::variable(static_cast<std::size_t>(n), static_cast<std::size_t>(k)) +
                      Polynomial::constant(static_cast<std::size_t>(n), offset[k]));
    auto fields = fields_;
    for (auto& f : fields)
      for (auto& c : f) c = c.compose(shift);
    return Frame(name_, depth_, degrees_, std::move(fields), alpha_, radius_);
  }

  /// X_i(p).
  Vec field(int i, const Vec& p) const {
    const int n = dim();
    Vec out(n);
    const auto x = as_span(p);
    for (int k = 0; k < n; ++k) out[k] = coefficient(i, k).eval(x);
    return out;
  }

  /// Matrix whose column i is X_i(p).
  Mat values(const Vec& p) const {
    const int n = dim();
    Mat m(n, n);
    const auto x = as_span(p);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) m(k, i) = coefficient(i, k).eval(x);
    return m;
  }

  /// DX_i(p): entry (k, l) is the derivative of component k along x_{l+1}.
  Mat field_jacobian(int i, const Vec& p) const {
    const int n = dim();
    Mat m(n, n);
    const auto x = as_span(p);
    const auto& J = jac_[static_cast<std::size_t>(i)];
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) m(k, l) = J[static_cast<std::size_t>(k * n + l)].eval(x);
    return m;
  }

  /// sum_i c_i X_i(p).
  Vec combination(const Vec& c, const Vec& p) const {
    const int n = dim();
    Vec out = Vec::Zero(n);
    const auto x = as_span(p);
    for (int i = 0; i < n; ++i) {
      if (c[i] == 0.0) continue;
      for (int k = 0; k < n; ++k) out[k] += c[i] * coefficient(i, k).eval(x);
    }
    return out;
  }

  /// Jacobian of p -> sum_i c_i X_i(p).
  Mat combination_jacobian(const Vec& c, const Vec& p) const {
    const int n = dim();
    Mat m = Mat::Zero(n, n);
    const auto x = as_span(p);
    for (int i = 0; i < n; ++i) {
      if (c[i] == 0.0) continue;
      const auto& J = jac_[static_cast<std::size_t>(i)];
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const auto& q = J[static_cast<std::size_t>(k * n + l)];
          if (!q.is_zero()) m(k, l) += c[i] * q.eval(x);
        }
    }
    return m;
  }

private:
  std::string name_;
  int depth_;
  std::vector<int> degrees_;
  std::vector<std::vector<Polynomial>> fields_;
  double alpha_;
  double radius_;
  std::vector<int> layer_dims_;
  std::vector<std::vector<Polynomial>> jac_;
};

// ---------------------------------------------------------------------------
// Built-in frames

inline Frame heisenberg_frame() {
  return Frame::parse("heisenberg", 2, {1, 1, 2},
                      {{"1", "0", "-x2/2"}, {"0", "1", "x1/2"}, {"0", "0", "1"}});
}

inline Frame engel_frame() {
  return Frame::parse("engel", 3, {1, 1, 2, 3},
                      {{"1", "0", "0", "0"}, {"0", "1", "x1", "x3"}, {"0", "0", "1", "0"}, {"0", "0", "0", "1"}});
}

inline Frame abelian_frame(int n) {
  if (n < 1) throw ConfigError("abelian frame needs a positive dimension");
  std::vector<std::vector<std::string>> f(static_cast<std::size_t>(n),
                                          std::vector<std::string>(static_cast<std::size_t>(n), "0"));
  for (int i = 0; i < n; ++i) f[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = "1";
  return Frame::parse("abelian:" + std::to_string(n), 1, std::vector<int>(static_cast<std::size_t>(n), 1), f);
}

/// Grushin-type field x1^2/2 d/dx3 lifted by the Heisenberg term x1 d/dx3 so
/// that the frame is regular everywhere. Its structure constants vary
/// (c_123 = 1 + x1), so the frame differs from its nilpotentization away from
/// the base point.
inline Frame grushin_regularized_frame() {
  return Frame::parse("grushin-regularized", 2, {1, 1, 2},
                      {{"1", "0", "0"}, {"0", "1", "x1 + x1^2/2"}, {"0", "0", "1"}});
}

/// Resolves "heisenberg", "engel", "abelian:<N>" and "grushin-regularized".
inline bool is_builtin_frame(const std::string& name) {
  return name == "heisenberg" || name == "engel" || name == "grushin-regularized" ||
         name.rfind("abelian:", 0) == 0;
}

inline Frame builtin_frame(const std::string& name) {
  if (name == "heisenberg") return heisenberg_frame();
  if (name == "engel") return engel_frame();
  if (name == "grushin-regularized") return grushin_regularized_frame();
  if (name.rfind("abelian:", 0) == 0) {
    const std::string tail = name.substr(8);
    std::size_t used = 0;
    int n = 0;
    try {
      n = std::stoi(tail, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad abelian dimension in '" + name + "'");
    }
    if (used != tail.size()) throw ConfigError("bad abelian dimension in '" + name + "'");
    return abelian_frame(n);
  }
  throw ConfigError("unknown built-in frame '" + name + "'");
}

// ---------------------------------------------------------------------------
// Pointwise operations

struct FrameEvaluation {
  Mat values;
  double determinant = 0.0;
  double condition = 0.0;
};

inline constexpr double kSingularDeterminant = 1e-12;

/// Field matrix at p together with its determinant and 2-norm condition number.
inline FrameEvaluation eval_frame(const Frame& frame, const Vec& p) {
  if (!p.allFinite()) throw ConfigError("eval_frame: non-finite point");
  FrameEvaluation ev;
  ev.values = frame.values(p);
  ev.determinant = ev.values.determinant();
  Eigen::JacobiSVD<Mat> svd(ev.values);
  const auto& s = svd.singularValues();
  ev.condition = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : INFINITY;
  if (std::abs(ev.determinant) < kSingularDeterminant) {
    std::ostringstream os;
    os << "frame '" << frame.name() << "' is singular at (" << p.transpose() << "), det = " << ev.determinant;
    throw SingularFrame(os.str());
  }
  return ev;
}

/// [X_i, X_j](p) = (DX_j) X_i - (DX_i) X_j.
inline Vec bracket(const Frame& frame, int i, int j, const Vec& p) {
  if (i == j) return Vec::Zero(frame.dim());
  return frame.field_jacobian(j, p) * frame.field(i, p) - frame.field_jacobian(i, p) * frame.field(j, p);
}

/// c_ijk(g) with [X_i, X_j](g) = sum_k c_ijk(g) X_k(g).
struct StructureField {
  Vec base_point;
  int n = 0;
  std::vector<double> c;
  double residual_grading = 0.0;

  double operator()(int i, int j, int k) const { return c[static_cast<std::size_t>((i * n + j) * n + k)]; }
};

struct StructureOptions {
  double grading_tolerance = 1e-8;
  bool enforce_grading = true;
};

inline StructureField structure_constants(const Frame& frame, const Vec& g, const StructureOptions& opt = {}) {
  const int n = frame.dim();
  const auto ev = eval_frame(frame, g);
  Eigen::PartialPivLU<Mat> lu(ev.values);
  StructureField s;
  s.base_point = g;
  s.n = n;
  s.c.assign(static_cast<std::size_t>(n * n * n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Vec coef = lu.solve(bracket(frame, i, j, g));
      for (int k = 0; k < n; ++k) {
        s.c[static_cast<std::size_t>((i * n + j) * n + k)] = coef[k];
        s.c[static_cast<std::size_t>((j * n + i) * n + k)] = -coef[k];
        if (frame.degree(k) > frame.degree(i) + frame.degree(j))
          s.residual_grading = std::max(s.residual_grading, std::abs(coef[k]));
      }
    }
  if (opt.enforce_grading && s.residual_grading > opt.grading_tolerance) {
    std::ostringstream os;
    os << "frame '" << frame.name() << "' violates the grading at (" << g.transpose()
       << "): residual " << s.residual_grading;
    throw GradingViolation(os.str());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Regularity report

struct RegularityOptions {
  double grading_tolerance = 1e-8;
  double span_cutoff = 1e-10;
};

struct RegularityEntry {
  Vec point;
  bool nonsingular = false;
  double determinant = 0.0;
  double condition = 0.0;
  std::vector<int> layer_ranks;  ///< rank of the first dim H_m columns
  bool span_ok = false;
  double grading_residual = 0.0;
  bool grading_ok = false;
  bool pass = false;
};

struct RegularityReport {
  bool layers_consistent = false;
  std::string layer_message;
  std::vector<RegularityEntry> entries;
  double max_residual = 0.0;
  bool pass = false;
};

inline RegularityReport validate_regularity(const Frame& frame, const std::vector<Vec>& points,
                                            const RegularityOptions& opt = {}) {
  if (points.empty()) throw ConfigError("validate_regularity: empty sample set");
  RegularityReport rep;
  rep.layers_consistent = frame.layers_consistent();
  if (!rep.layers_consistent) {
    std::ostringstream os;
    os << "declared depth " << frame.depth() << " but highest degree is " << frame.degrees().back()
       << "; layer_dims = (";
    for (std::size_t m = 0; m < frame.layer_dims().size(); ++m)
      os << (m ? "," : "") << frame.layer_dims()[m];
    os << ") never reaches a populated top layer";
    rep.layer_message = os.str();
  }
  rep.pass = rep.layers_consistent;
  for (const auto& p : points) {
    RegularityEntry e;
    e.point = p;
    const Mat vals = frame.values(p);
    e.determinant = vals.determinant();
    e.nonsingular = std::abs(e.determinant) >= kSingularDeterminant;
    {
      Eigen::JacobiSVD<Mat> svd(vals);
      const auto& s = svd.singularValues();
      e.condition = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : INFINITY;
    }
    e.span_ok = true;
    int prev_dim = -1;
    for (int d : frame.layer_dims()) {
      int rank = 0;
      if (d > 0) {
        Eigen::JacobiSVD<Mat> svd(vals.leftCols(d));
        const auto& s = svd.singularValues();
        for (int k = 0; k < s.size(); ++k) rank += s[k] > opt.span_cutoff ? 1 : 0;
      }
      e.layer_ranks.push_back(rank);
      e.span_ok = e.span_ok && rank == d && d >= prev_dim;
      prev_dim = d;
    }
    e.span_ok = e.span_ok && frame.layer_dims().back() == frame.dim();
    if (e.nonsingular) {
      const auto s = structure_constants(frame, p, {opt.grading_tolerance, false});
      e.grading_residual = s.residual_grading;
      e.grading_ok = s.residual_grading <= opt.grading_tolerance;
    }
    e.pass = e.nonsingular && e.span_ok && e.grading_ok;
    rep.max_residual = std::max(rep.max_residual, e.grading_residual);
    rep.pass = rep.pass && e.pass;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

}  // namespace carnot
