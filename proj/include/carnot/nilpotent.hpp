#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "carnot/bch.hpp"
#include "carnot/errors.hpp"
#include "carnot/frame.hpp"
#include "carnot/graded.hpp"
#include "carnot/types.hpp"

namespace carnot {

/// Graded nilpotent Lie algebra on R^N with basis e_1..e_N.
///
/// [e_i, e_j] = sum_k c_ijk e_k with c_ijk = 0 unless deg_i + deg_j = deg_k.
/// Group elements are first-kind exponential coordinates; the product is the
/// BCH series, which is a polynomial because brackets of weight > depth vanish.
class GradedAlgebra {
public:
  GradedAlgebra(std::vector<int> degrees, int depth, std::vector<double> c)
      : n_(static_cast<int>(degrees.size())), degrees_(std::move(degrees)), depth_(depth), c_(std::move(c)) {
    if (n_ == 0) throw ConfigError("algebra of dimension 0");
    if (c_.size() != static_cast<std::size_t>(n_ * n_ * n_)) throw ConfigError("structure tensor has wrong size");
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k) {
          const double v = (*this)(i, j, k);
          if (v != 0.0 && degree(i) + degree(j) != degree(k)) {
            std::ostringstream os;
            os << "c[" << i + 1 << "," << j + 1 << "," << k + 1 << "] = " << v << " breaks the grading";
            throw GradingViolation(os.str());
          }
          if (std::abs(v + (*this)(j, i, k)) > 1e-10) throw ConfigError("structure tensor is not antisymmetric");
          if (i < j && v != 0.0) nnz_.push_back({i, j, k, v});
        }
    const double jac = jacobi_residual();
    if (jac > 1e-9) {
      std::ostringstream os;
      os << "Jacobi identity fails with residual " << jac;
      throw JacobiViolation(os.str());
    }
    if (!lower_central_series_vanishes())
      throw ConfigError("lower central series does not vanish by the declared depth");
  }

  int dim() const { return n_; }
  int depth() const { return depth_; }
  const std::vector<int>& degrees() const { return degrees_; }
  int degree(int i) const { return degrees_[static_cast<std::size_t>(i)]; }
  double operator()(int i, int j, int k) const { return c_[static_cast<std::size_t>((i * n_ + j) * n_ + k)]; }
  const std::vector<double>& constants() const { return c_; }
  bool is_abelian() const { return nnz_.empty(); }

  Vec bracket(const Vec& a, const Vec& b) const {
    Vec out = Vec::Zero(n_);
    for (const auto& [i, j, k, v] : nnz_) out[k] += v * (a[i] * b[j] - a[j] * b[i]);
    return out;
  }

  /// Matrix of ad_x = [x, .].
  Mat ad(const Vec& x) const {
    Mat m = Mat::Zero(n_, n_);
    for (const auto& [i, j, k, v] : nnz_) {
      m(k, j) += v * x[i];
      m(k, i) -= v * x[j];
    }
    return m;
  }

  double jacobi_residual() const {
    double worst = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        for (int k = j + 1; k < n_; ++k) {
          const Vec ei = Vec::Unit(n_, i), ej = Vec::Unit(n_, j), ek = Vec::Unit(n_, k);
          const Vec s = bracket(ei, bracket(ej, ek)) + bracket(ej, bracket(ek, ei)) + bracket(ek, bracket(ei, ej));
          worst = std::max(worst, sup_norm(s));
        }
    return worst;
  }

  /// g^{k+1} = [g, g^k]; true when g^{depth+1} = 0.
  bool lower_central_series_vanishes() const {
    Mat span = Mat::Identity(n_, n_);
    for (int step = 0; step < depth_; ++step) {
      Mat next(n_, n_ * static_cast<int>(span.cols()));
      int col = 0;
      for (int i = 0; i < n_; ++i) {
        const Mat adi = ad(Vec::Unit(n_, i));
        for (int c = 0; c < span.cols(); ++c) next.col(col++) = adi * span.col(c);
      }
      if (next.cols() == 0 || next.cwiseAbs().maxCoeff() <= 1e-12) return true;
      Eigen::JacobiSVD<Mat> svd(next, Eigen::ComputeThinU);
      int rank = 0;
      for (int k = 0; k < svd.singularValues().size(); ++k) rank += svd.singularValues()[k] > 1e-10 ? 1 : 0;
      if (rank == 0) return true;
      span = svd.matrixU().leftCols(rank);
    }
    return span.cols() == 0;
  }

  // -- group structure in exponential coordinates ---------------------------

  /// a * b = BCH(a, b), i.e. flow b from the point a.
  Vec product(const Vec& a, const Vec& b) const {
    if (depth_ > bch::kMaxWeight)
      throw UnsupportedDepth("BCH expansion is tabulated up to weight " + std::to_string(bch::kMaxWeight));
    Vec z = a + b;
    if (nnz_.empty()) return z;
    const auto& table = bch::table();
    for (int w = 2; w <= depth_; ++w)
      for (const auto& term : table[static_cast<std::size_t>(w - 1)]) {
        const auto& word = term.word;
        Vec acc = word.back() ? b : a;
        for (std::size_t p = word.size() - 1; p-- > 0;) acc = bracket(word[p] ? b : a, acc);
        z += term.coefficient.value() * acc;
      }
    return z;
  }

  Vec inverse(const Vec& a) const { return -a; }
  Vec identity() const { return Vec::Zero(n_); }
  Vec dilate(const Vec& a, double eps) const { return graded_scale(a, degrees_, eps); }
  double norm(const Vec& a) const { return graded_norm(a, degrees_); }
  /// d^g_inf(a, b) = |a^{-1} * b|.
  double distance(const Vec& a, const Vec& b) const { return norm(product(inverse(a), b)); }

  /// distance(a, b) with components of a^{-1}*b below rel * s^deg set to zero,
  /// s the larger norm of a and b. Two computed points that agree to working
  /// precision are then at distance 0 instead of (roundoff)^{1/deg}.
  double resolved_distance(const Vec& a, const Vec& b, double rel = 1e-12) const {
    Vec z = product(inverse(a), b);
    const double s = std::max(norm(a), norm(b));
    for (int k = 0; k < n_; ++k)
      if (std::abs(z[k]) <= rel * std::pow(s, degree(k))) z[k] = 0.0;
    return norm(z);
  }

  /// d/dt (x * t e_i) at t = 0 = (ad_x / (1 - e^{-ad_x})) e_i.
  Vec left_invariant_field(int i, const Vec& x) const {
    // Bernoulli numbers B_n / n! with B_1 = +1/2
    static constexpr double beta[] = {1.0, 0.5, 1.0 / 12, 0.0, -1.0 / 720, 0.0, 1.0 / 30240};
    Vec term = Vec::Unit(n_, i);
    Vec out = term;
    if (nnz_.empty()) return out;
    const Mat A = ad(x);
    for (int k = 1; k < depth_ && k < 7; ++k) {
      term = A * term;
      out += beta[k] * term;
    }
    return out;
  }

private:
  int n_;
  std::vector<int> degrees_;
  int depth_;
  std::vector<double> c_;
  std::vector<std::tuple<int, int, int, double>> nnz_;
};

/// Keeps c_ijk(g) with deg_i + deg_j = deg_k and zeroes the rest.
inline GradedAlgebra nilpotentize(const StructureField& s, const std::vector<int>& degrees, int depth,
                                  bool enforce_grading = true, double grading_tolerance = 1e-8) {
  if (enforce_grading && s.residual_grading > grading_tolerance) {
    std::ostringstream os;
    os << "cannot nilpotentize: grading residual " << s.residual_grading;
    throw GradingViolation(os.str());
  }
  const int n = s.n;
  std::vector<double> c(static_cast<std::size_t>(n * n * n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::size_t d = static_cast<std::size_t>(i), e = static_cast<std::size_t>(j),
                          f = static_cast<std::size_t>(k);
        if (degrees[d] + degrees[e] == degrees[f]) c[(d * n + e) * n + f] = s(i, j, k);
      }
  // exact antisymmetry
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const auto ij = static_cast<std::size_t>((i * n + j) * n + k), ji = static_cast<std::size_t>((j * n + i) * n + k);
        c[ji] = -c[ij];
      }
  return GradedAlgebra(degrees, depth, std::move(c));
}

inline GradedAlgebra nilpotentize(const Frame& frame, const Vec& g, bool enforce_grading = true) {
  return nilpotentize(structure_constants(frame, g, {1e-8, enforce_grading}), frame.degrees(), frame.depth(),
                      enforce_grading);
}

/// First-kind coordinates in the tangent group of an algebra.
struct GroupElement {
  Vec x;
  const GradedAlgebra* algebra = nullptr;
};

namespace detail {
inline const GradedAlgebra& common_algebra(const GroupElement& a, const GroupElement& b) {
  if (a.algebra == nullptr || a.algebra != b.algebra) throw ConfigError("group elements belong to different algebras");
  return *a.algebra;
}
}  // namespace detail

inline GroupElement bch_product(const GroupElement& a, const GroupElement& b) {
  const auto& alg = detail::common_algebra(a, b);
  return {alg.product(a.x, b.x), &alg};
}
inline GroupElement group_inverse(const GroupElement& a) { return {-a.x, a.algebra}; }
inline GroupElement homogeneous_dilation(const GroupElement& a, double eps) {
  return {a.algebra->dilate(a.x, eps), a.algebra};
}
inline double dist_inf_group(const GroupElement& a, const GroupElement& b) {
  return detail::common_algebra(a, b).distance(a.x, b.x);
}
inline double homogeneous_norm(const GroupElement& a) { return a.algebra->norm(a.x); }
inline Vec nilpotent_field(const GradedAlgebra& alg, int i, const Vec& x) { return alg.left_invariant_field(i, x); }

/// Largest |a*b| / (|a| + |b|) over `samples` random pairs in the unit graded box.
inline double estimate_triangle_constant(const GradedAlgebra& alg, int samples, Rng& rng, double radius = 1.0) {
  double c = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Vec a = rng.graded_box(alg.degrees(), radius);
    const Vec b = rng.graded_box(alg.degrees(), radius);
    const double denom = alg.norm(a) + alg.norm(b);
    if (denom > 0.0) c = std::max(c, alg.norm(alg.product(a, b)) / denom);
  }
  return c;
}

}  // namespace carnot
