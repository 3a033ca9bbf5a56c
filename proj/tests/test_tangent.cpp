#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "carnot/tangent.hpp"

using namespace carnot;

namespace {

GradedAlgebra heisenberg() { return nilpotentize(heisenberg_frame(), Vec::Zero(3)); }
GradedAlgebra engel() { return nilpotentize(engel_frame(), Vec::Zero(4)); }

// Heisenberg product written out by hand; independent of the BCH tables.
Vec heis(const Vec& a, const Vec& b) {
  return Vec{{a[0] + b[0], a[1] + b[1], a[2] + b[2] + 0.5 * (a[0] * b[1] - a[1] * b[0])}};
}

}  // namespace

TEST(Trees, CatalanCountsAndDistinctShapes) {
  const int catalan[] = {1, 1, 2, 5, 14, 42};
  for (int n = 1; n <= 6; ++n) {
    const auto trees = all_trees(n);
    EXPECT_EQ(static_cast<int>(trees.size()), catalan[n - 1]);
    std::set<std::string> shapes;
    for (const Tree& t : trees) {
      EXPECT_EQ(t.leaves(), n);
      shapes.insert(t.to_string());
    }
    EXPECT_EQ(static_cast<int>(shapes.size()), catalan[n - 1]);
  }
  EXPECT_EQ(left_comb(4).to_string(), "(((ab)c)d)");
  EXPECT_EQ(right_comb(4).to_string(), "(a(b(cd)))");
  EXPECT_THROW(all_trees(0), ConfigError);
}

TEST(ScaledProduct, SingleLetterAndPair) {
  const auto alg = heisenberg();
  const Vec u{{0.3, -0.2, 0.7}}, v{{-0.4, 0.5, 0.1}};
  EXPECT_LE(sup_norm(scaled_product(alg, {u}, Tree::leaf(), 0.05) - u), 1e-15);
  const Tree pair = Tree::join(Tree::leaf(), Tree::leaf());
  EXPECT_LE(sup_norm(scaled_product(alg, {u, v}, pair, 0.05) - heis(u, v)), 1e-12);
  EXPECT_THROW(scaled_product(alg, {u, v}, Tree::leaf(), 0.05), ConfigError);
}

TEST(ScaledProduct, FourLettersLeftAndRightCombAgree) {
  const auto alg = heisenberg();
  Rng rng(4);
  Word w;
  for (int k = 0; k < 4; ++k) w.push_back(rng.graded_box({1, 1, 2}, 1.0));
  const Vec expected = heis(heis(heis(w[0], w[1]), w[2]), w[3]);
  EXPECT_LE(sup_norm(scaled_product(alg, w, left_comb(4), 0.02) - expected), 1e-10);
  EXPECT_LE(sup_norm(scaled_product(alg, w, right_comb(4), 0.02) - expected), 1e-10);
}

TEST(ScaledProduct, FullSweepGroupMode) {
  for (const auto& alg : {heisenberg(), engel()}) {
    Rng rng(42);
    const auto sched = scale_schedule(alg, 10000, rng);
    for (int n : {3, 4, 5}) {
      const auto r = check_associativity(alg, n, 100, rng, sched);
      EXPECT_EQ(r.spread.size(), 100u);
      EXPECT_TRUE(r.pass()) << "n = " << n << " spread " << r.max_spread();
    }
  }
}

TEST(ScaledProduct, LimitModeOnTheManifold) {
  for (const Frame& f : {heisenberg_frame(), engel_frame()}) {
    const Chart chart(f, Vec::Zero(f.dim()));
    const auto alg = tangent_algebra(chart);
    Rng rng(42);
    const auto sched = scale_schedule(alg, 2000, rng);
    const auto r = check_associativity(chart, 4, 10, rng, sched, EpsilonLadder().smallest());
    EXPECT_TRUE(r.pass()) << f.name() << " " << r.max_spread();
    const auto ladder = associativity_ladder(chart, 3, 4, rng, sched, EpsilonLadder());
    EXPECT_TRUE(ladder.converged()) << f.name();
    EXPECT_GT(ladder.fitted_order, 0.5);
  }
}

TEST(ScaledProduct, LimitModeReportsLeavingTheDomain) {
  const Chart chart(heisenberg_frame(), Vec::Zero(3));
  const Word w(3, Vec{{0.9, 0.9, 0.0}});
  EXPECT_THROW(scaled_product(chart, w, left_comb(3), 0.9, 0.5), OutOfDomain);
}

TEST(ScaleSchedule, FormulaAndFloor) {
  const ScaleSchedule s{2.0, 0.1};
  EXPECT_DOUBLE_EQ(s(1), 0.1);
  EXPECT_DOUBLE_EQ(s(3), 0.1 / 3 / 4);
  Rng rng(1);
  EXPECT_GE(scale_schedule(nilpotentize(abelian_frame(3), Vec::Zero(3)), 100, rng).triangle_constant, 1.0);
}

TEST(WordDistance, Examples) {
  const auto alg = heisenberg();
  Rng rng(7);
  const auto sched = scale_schedule(alg, 5000, rng);
  const Vec u{{0.3, -0.2, 0.1}}, v{{-0.1, 0.4, -0.3}};
  EXPECT_EQ(word_distance(alg, {u, v}, {u, v}, sched), 0.0);
  EXPECT_NEAR(word_distance(alg, {u}, {v}, sched), alg.distance(u, v), 1e-12);
  EXPECT_LE(word_distance(alg, {u, alg.inverse(u)}, {alg.identity()}, sched), 1e-12);
}

TEST(WordDistance, ContractionsCollapse) {
  for (const auto& alg : {heisenberg(), engel()}) {
    Rng rng(11);
    const auto sched = scale_schedule(alg, 5000, rng);
    for (int t = 0; t < 50; ++t) {
      Word w;
      for (int k = 0; k < 5; ++k) w.push_back(rng.graded_box(alg.degrees(), 1.0));
      for (std::size_t k = 0; k + 1 < w.size(); ++k) EXPECT_LE(word_distance(alg, w, contract_at(alg, w, k), sched), 1e-9);
    }
  }
}

TEST(WordDistance, GeneralizedTriangleInequality) {
  const auto alg = heisenberg();
  Rng rng(12);
  const auto sched = scale_schedule(alg, 5000, rng);
  double q = 0.0;
  for (int t = 0; t < 500; ++t) {
    Word a, b, c;
    for (int k = 0; k < 2; ++k) {
      a.push_back(rng.graded_box({1, 1, 2}, 1.0));
      b.push_back(rng.graded_box({1, 1, 2}, 1.0));
      c.push_back(rng.graded_box({1, 1, 2}, 1.0));
    }
    const double ab = word_distance(alg, a, b, sched), bc = word_distance(alg, b, c, sched);
    q = std::max(q, word_distance(alg, a, c, sched) / (ab + bc));
  }
  EXPECT_TRUE(std::isfinite(q));
  EXPECT_LE(q, 2.0);
}

TEST(Contractibility, Examples) {
  const auto alg = heisenberg();
  const Vec a{{1.0, 1.0, 1.0}};
  EXPECT_EQ(contractibility_witness(alg, 0.5, a, 0), a);
  const Vec expected{{std::pow(2.0, -10), std::pow(2.0, -10), std::pow(4.0, -10)}};
  EXPECT_LE(sup_norm(contractibility_witness(alg, 0.5, a, 10) - expected), 1e-18);
  for (int k = 0; k < 12; ++k)
    EXPECT_NEAR(alg.norm(contractibility_witness(alg, 0.5, a, k)), std::pow(0.5, k) * alg.norm(a), 1e-15);
  EXPECT_THROW(contractibility_witness(alg, 1.0, a, 1), ConfigError);
}

TEST(Contractibility, DilationPathIsContinuous) {
  const auto alg = engel();
  const auto m = path_modulus(alg, Vec{{0.5, -0.7, 0.3, 0.9}}, {1e-1, 1e-2, 1e-3, 1e-4});
  // Hoelder of exponent 1/M = 1/3 in the step: each decade of h shrinks the modulus by about 10^{-1/3}.
  for (std::size_t k = 1; k < m.size(); ++k) EXPECT_LT(m[k], 0.55 * m[k - 1]);
  EXPECT_LT(m.back(), 0.1);
}
