#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "carnot/convergence.hpp"
#include "carnot/limits.hpp"
#include "carnot/nilpotent.hpp"

namespace carnot {

/// Letters of a word: group elements in group mode, chart points in limit mode.
using Word = std::vector<Vec>;

/// Full binary tree over an ordered run of leaves.
class Tree {
public:
  static Tree leaf() { return Tree(); }
  static Tree join(Tree l, Tree r) {
    Tree t;
    t.left_ = std::make_shared<const Tree>(std::move(l));
    t.right_ = std::make_shared<const Tree>(std::move(r));
    t.leaves_ = t.left_->leaves_ + t.right_->leaves_;
    return t;
  }

  bool is_leaf() const { return left_ == nullptr; }
  int leaves() const { return leaves_; }
  const Tree& left() const { return *left_; }
  const Tree& right() const { return *right_; }

  /// Parenthesized form over letters a, b, c, ...
  std::string to_string() const {
    int next = 0;
    return render(next);
  }

private:
  std::string render(int& next) const {
    if (is_leaf()) return std::string(1, static_cast<char>('a' + next++));
    const std::string l = left_->render(next);
    return "(" + l + right_->render(next) + ")";
  }

  std::shared_ptr<const Tree> left_, right_;
  int leaves_ = 1;
};

/// Every parenthesization of n letters (Catalan(n-1) trees).
inline std::vector<Tree> all_trees(int n) {
  if (n < 1) throw ConfigError("trees need at least one leaf");
  std::vector<std::vector<Tree>> by(static_cast<std::size_t>(n + 1));
  by[1].push_back(Tree::leaf());
  for (int m = 2; m <= n; ++m)
    for (int k = 1; k < m; ++k)
      for (const Tree& l : by[static_cast<std::size_t>(k)])
        for (const Tree& r : by[static_cast<std::size_t>(m - k)]) by[static_cast<std::size_t>(m)].push_back(Tree::join(l, r));
  return by[static_cast<std::size_t>(n)];
}

inline Tree left_comb(int n) {
  Tree t = Tree::leaf();
  for (int k = 1; k < n; ++k) t = Tree::join(t, Tree::leaf());
  return t;
}

inline Tree right_comb(int n) {
  Tree t = Tree::leaf();
  for (int k = 1; k < n; ++k) t = Tree::join(Tree::leaf(), t);
  return t;
}

namespace detail {
template <class Mul>
Vec fold(const Tree& t, const Word& w, std::size_t& next, const Mul& mul) {
  if (t.is_leaf()) return w[next++];
  const Vec l = fold(t.left(), w, next, mul);
  const Vec r = fold(t.right(), w, next, mul);
  return mul(l, r);
}
}  // namespace detail

/// Multiplies the letters along the tree with `mul`.
template <class Mul>
Vec fold_tree(const Tree& t, const Word& w, const Mul& mul) {
  if (w.empty() || static_cast<int>(w.size()) != t.leaves()) throw ConfigError("tree and word sizes differ");
  std::size_t next = 0;
  return detail::fold(t, w, next, mul);
}

/// s_n = base / n * c^{-(n-1)} with c the triangle constant of the homogeneous norm.
struct ScaleSchedule {
  double triangle_constant = 1.0;
  double base = 0.1;

  double operator()(int n) const {
    if (n < 1) throw ConfigError("scale schedule: n must be positive");
    return base / n * std::pow(triangle_constant, -(n - 1));
  }
};

/// Schedule from the triangle constant estimated over `samples` pairs (never below 1).
inline ScaleSchedule scale_schedule(const GradedAlgebra& alg, int samples, Rng& rng) {
  return {std::max(1.0, estimate_triangle_constant(alg, samples, rng)), 0.1};
}

/// delta_{1/s} of the tree product of delta_s(letters), in the tangent group.
inline Vec scaled_product(const GradedAlgebra& alg, const Word& w, const Tree& t, double s) {
  Word scaled;
  for (const Vec& u : w) scaled.push_back(alg.dilate(u, s));
  const Vec p = fold_tree(t, scaled, [&alg](const Vec& a, const Vec& b) { return alg.product(a, b); });
  return alg.dilate(p, 1.0 / s);
}

/// The same with Sigma_eps at the chart base as multiplication and Delta as dilation.
/// Letters and result are chart points.
inline Vec scaled_product(const Chart& chart, const Word& w, const Tree& t, double s, double eps) {
  try {
    Word scaled;
    for (const Vec& u : w) scaled.push_back(dilation_delta_cap(chart, u, s));
    const Vec p = fold_tree(t, scaled, [&](const Vec& a, const Vec& b) { return sigma_eps(chart, a, b, eps); });
    return dilation_delta_cap(chart, p, 1.0 / s);
  } catch (const OutOfChart& e) {
    throw OutOfDomain(std::string("scaled product left the admissible ball: ") + e.what());
  }
}

/// Word quasimetric: d^g of the scaled left-comb products, divided by s_{max(m,n)}.
/// Coordinate differences at roundoff level are dropped before the root is taken.
inline double word_distance(const GradedAlgebra& alg, const Word& w1, const Word& w2, const ScaleSchedule& sched) {
  if (w1.empty() || w2.empty()) throw ConfigError("words must be nonempty");
  const double s = sched(static_cast<int>(std::max(w1.size(), w2.size())));
  auto scaled = [&](const Word& w) {
    Word out;
    for (const Vec& u : w) out.push_back(alg.dilate(u, s));
    return fold_tree(left_comb(static_cast<int>(w.size())), out,
                     [&alg](const Vec& a, const Vec& b) { return alg.product(a, b); });
  };
  return alg.resolved_distance(scaled(w1), scaled(w2)) / s;
}

/// Replaces letters k and k+1 by their product.
inline Word contract_at(const GradedAlgebra& alg, const Word& w, std::size_t k) {
  if (k + 1 >= w.size()) throw ConfigError("contraction index out of range");
  Word out(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(k));
  out.push_back(alg.product(w[k], w[k + 1]));
  out.insert(out.end(), w.begin() + static_cast<std::ptrdiff_t>(k + 2), w.end());
  return out;
}

/// delta_s applied k times.
inline Vec contractibility_witness(const GradedAlgebra& alg, double s, const Vec& a, int iterations) {
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("contraction factor must lie in (0, 1)");
  if (iterations < 0) throw ConfigError("iteration count must be nonnegative");
  Vec x = a;
  for (int k = 0; k < iterations; ++k) x = alg.dilate(x, s);
  return x;
}

/// For each step h: max over eps in a uniform grid of (0, 1] of d^g(delta_eps u, delta_{eps+h} u).
inline std::vector<double> path_modulus(const GradedAlgebra& alg, const Vec& u, const std::vector<double>& steps,
                                        int grid = 100) {
  std::vector<double> out;
  for (double h : steps) {
    double m = 0.0;
    for (int k = 1; k <= grid; ++k) {
      const double e = static_cast<double>(k) / grid;
      m = std::max(m, alg.distance(alg.dilate(u, e), alg.dilate(u, e + h)));
    }
    out.push_back(m);
  }
  return out;
}

// -- associativity sweeps ----------------------------------------------------

struct AssociativityReport {
  int n = 0;
  int trials = 0;
  int trees = 0;
  double scale = 0.0;
  double eps = std::numeric_limits<double>::quiet_NaN();  // NaN in group mode
  /// Largest sup-norm gap between a tree product and the first tree's, per trial.
  std::vector<double> spread;
  double tolerance = 0.0;

  double max_spread() const { return spread.empty() ? 0.0 : *std::max_element(spread.begin(), spread.end()); }
  bool pass() const { return max_spread() <= tolerance; }
};

/// Random words from the graded box of radius `radius`, all trees compared in the group.
inline AssociativityReport check_associativity(const GradedAlgebra& alg, int n, int trials, Rng& rng,
                                               const ScaleSchedule& sched, double radius = 1.0,
                                               double tolerance = 1e-9) {
  AssociativityReport r;
  r.n = n;
  r.trials = trials;
  r.scale = sched(n);
  r.tolerance = tolerance;
  const auto trees = all_trees(n);
  r.trees = static_cast<int>(trees.size());
  for (int t = 0; t < trials; ++t) {
    Word w;
    for (int k = 0; k < n; ++k) w.push_back(rng.graded_box(alg.degrees(), radius));
    const Vec ref = scaled_product(alg, w, trees.front(), r.scale);
    double gap = 0.0;
    for (const Tree& tr : trees) gap = std::max(gap, sup_norm(scaled_product(alg, w, tr, r.scale) - ref));
    r.spread.push_back(gap);
  }
  return r;
}

namespace detail {
inline std::vector<Word> limit_words(const Chart& chart, int n, int trials, Rng& rng, double radius) {
  const double rr = radius * chart.coordinate_radius();
  std::vector<Word> words;
  for (int t = 0; t < trials; ++t) {
    Word w;
    for (int k = 0; k < n; ++k) w.push_back(exp_map(chart, rng.graded_box(chart.frame().degrees(), rr)));
    words.push_back(std::move(w));
  }
  return words;
}

inline double limit_spread(const Chart& chart, const Word& w, const std::vector<Tree>& trees, double s, double eps) {
  std::vector<Vec> prods;
  for (const Tree& tr : trees) prods.push_back(normal_coords(chart, scaled_product(chart, w, tr, s, eps)).v);
  double gap = 0.0;
  for (const Vec& p : prods) gap = std::max(gap, sup_norm(p - prods.front()));
  return gap;
}
}  // namespace detail

/// Limit mode: letters are exp of random graded-box coordinates at the chart base,
/// products are Sigma_eps; gaps are measured in normal coordinates at the base.
inline AssociativityReport check_associativity(const Chart& chart_x, int n, int trials, Rng& rng,
                                               const ScaleSchedule& sched, double eps, double radius = 0.1,
                                               double tolerance = 1e-3) {
  const Chart chart = chart_x.centered();
  AssociativityReport r;
  r.n = n;
  r.trials = trials;
  r.scale = sched(n);
  r.eps = eps;
  r.tolerance = tolerance;
  const auto trees = all_trees(n);
  r.trees = static_cast<int>(trees.size());
  for (const Word& w : detail::limit_words(chart, n, trials, rng, radius))
    r.spread.push_back(detail::limit_spread(chart, w, trees, r.scale, eps));
  return r;
}

/// Largest tree spread per rung over a fixed set of random words; the reference is 0.
inline ConvergenceReport associativity_ladder(const Chart& chart_x, int n, int trials, Rng& rng,
                                              const ScaleSchedule& sched, const EpsilonLadder& ladder,
                                              double radius = 0.1, const ConvergenceOptions& opt = {}) {
  const Chart chart = chart_x.centered();
  const auto trees = all_trees(n);
  const auto words = detail::limit_words(chart, n, trials, rng, radius);
  std::vector<double> gaps;
  for (double eps : ladder.values()) {
    double g = 0.0;
    for (const Word& w : words) g = std::max(g, detail::limit_spread(chart, w, trees, sched(n), eps));
    gaps.push_back(g);
  }
  return analyze_errors(ladder, gaps, gaps, opt);
}

}  // namespace carnot
