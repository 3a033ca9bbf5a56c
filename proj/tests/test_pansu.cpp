#include <gtest/gtest.h>

#include <cmath>

#include "carnot/pansu.hpp"

using namespace carnot;

namespace {

GradedAlgebra heis_alg() { return nilpotentize(heisenberg_frame(), Vec::Zero(3)); }

Mat heis_linear(double a, double b, double c, double d) {
  Mat m = Mat::Zero(3, 3);
  m << a, b, 0, c, d, 0, 0, 0, a * d - b * c;
  return m;
}

const Chart& heis_chart() {
  static const Chart c(heisenberg_frame(), Vec::Zero(3));
  return c;
}

}  // namespace

TEST(PolyMap, ParseEvaluateCompose) {
  const PolyMap f = parse_map("x1 + x2; x2; x3 + x1*x2/2", 3);
  EXPECT_EQ(f.target_dim(), 3);
  const Vec x{{0.5, -1.0, 2.0}};
  EXPECT_LE(sup_norm(f(x) - Vec{{-0.5, -1.0, 1.75}}), 1e-15);
  const PolyMap g = builtin_map("heis-dilation:2", 3);
  EXPECT_LE(sup_norm(g.after(f)(x) - g(f(x))), 1e-14);
  const PolyMap r = f.recentered(x);
  EXPECT_LE(sup_norm(r(Vec::Zero(3))), 1e-15);
  EXPECT_LE(sup_norm(r(Vec{{0.1, 0.2, 0.3}}) - (f(x + Vec{{0.1, 0.2, 0.3}}) - f(x))), 1e-14);
  EXPECT_THROW(parse_map("x1 +; x2", 2), ConfigError);
  EXPECT_THROW(builtin_map("heis-linear:1,2,3", 3), ConfigError);
  EXPECT_THROW(builtin_map("heis-shear", 4), ConfigError);
  EXPECT_THROW(g.after(builtin_map("identity", 2)), ConfigError);
}

TEST(HomogeneousHom, IdentityAndDilationPass) {
  const auto alg = heis_alg();
  Rng rng(1);
  EXPECT_TRUE(check_homogeneous_hom({Mat::Identity(3, 3), alg, alg}, 200, rng).pass());
  const double l = 1.7;
  const auto d = check_homogeneous_hom({Vec{{l, l, l * l}}.asDiagonal(), alg, alg}, 200, rng);
  EXPECT_TRUE(d.pass());
  EXPECT_LE(d.hom_residual, 1e-12);
}

TEST(HomogeneousHom, OffBlockEntryFails) {
  const auto alg = heis_alg();
  Mat m = Mat::Identity(3, 3);
  m(2, 0) = 0.3;
  Rng rng(2);
  const auto c = check_homogeneous_hom({m, alg, alg}, 50, rng);
  EXPECT_FALSE(c.blocks_ok());
  EXPECT_FALSE(c.pass());
  EXPECT_DOUBLE_EQ(c.block_violation, 0.3);
  EXPECT_EQ(block_violation(project_blocks(m, alg.degrees(), alg.degrees()), alg.degrees(), alg.degrees()), 0.0);
}

TEST(HomogeneousHom, NonAutomorphismFailsTheProductTest) {
  const auto alg = heis_alg();
  Mat m = heis_linear(1.2, 0.3, -0.4, 0.9);
  m(2, 2) = 1.0;  // the centre must scale by the determinant
  Rng rng(3);
  EXPECT_GT(check_homogeneous_hom({m, alg, alg}, 50, rng).hom_residual, 1e-4);
}

TEST(HomogeneousHom, BlockMatricesCommuteWithDilations) {
  const auto alg = nilpotentize(engel_frame(), Vec::Zero(4));
  Mat m = Mat::Zero(4, 4);
  m << 1, 2, 0, 0, -1, 3, 0, 0, 0, 0, 5, 0, 0, 0, 0, 7;
  Rng rng(4);
  EXPECT_LE(check_homogeneous_hom({m, alg, alg}, 50, rng).commutation_residual, 1e-15);
  for (double t : {0.5, 0.1, 0.01}) {
    Vec s(4);
    for (int i = 0; i < 4; ++i) s[i] = std::pow(t, alg.degree(i));
    const Mat lhs = s.asDiagonal() * m, rhs = m * s.asDiagonal();
    EXPECT_TRUE(lhs == rhs);
  }
}

TEST(PansuDifferential, IdentityMap) {
  const auto d = pansu_differential(heis_chart(), heisenberg_frame(), builtin_map("identity", 3));
  EXPECT_LE((d.L.matrix - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(d.report.at_floor());
  EXPECT_TRUE(d.differentiable());
}

TEST(PansuDifferential, AutomorphismRecovered) {
  for (const auto& [name, m] : {std::pair{std::string("heis-linear:1.2,0.3,-0.4,0.9"), heis_linear(1.2, 0.3, -0.4, 0.9)},
                                std::pair{std::string("heis-dilation:1.5"), heis_linear(1.5, 0, 0, 1.5)},
                                std::pair{std::string("heis-shear"), heis_linear(1, 1, 0, 1)}}) {
    const auto d = pansu_differential(heis_chart(), heisenberg_frame(), builtin_map(name, 3));
    EXPECT_LE((d.L.matrix - m).cwiseAbs().maxCoeff(), 1e-6) << name;
    EXPECT_TRUE(d.differentiable()) << name;
    EXPECT_LE(d.hom_residual, 1e-8) << name;
  }
}

TEST(PansuDifferential, PerturbedShearHasPositiveOrder) {
  const auto d = pansu_differential(heis_chart(), heisenberg_frame(), builtin_map("heis-shear-perturbed", 3));
  EXPECT_LE((d.L.matrix - heis_linear(1, 1, 0, 1)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GT(d.report.fitted_order, 0.0);
  // x1^3 in the degree-2 coordinate leaves a third-coordinate error of order t, i.e. t^{1/2} in d^{f(g)}
  EXPECT_NEAR(d.report.fitted_order, 0.5, 0.05);
  EXPECT_TRUE(d.differentiable());
}

TEST(PansuDifferential, OffOriginIdentityOnVariableFrame) {
  const Chart c(grushin_regularized_frame(), Vec{{0.1, 0.2, 0.0}});
  const auto d = pansu_differential(c, grushin_regularized_frame(), builtin_map("identity", 3));
  EXPECT_LE((d.L.matrix - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_TRUE(d.differentiable());
}

TEST(PansuDifferential, NonContactMapIsNotDifferentiable) {
  // x1*x2 enters the degree-2 coordinate with a first-order mixed term that no homomorphism absorbs
  const Chart c(heisenberg_frame(), Vec::Zero(3));
  const auto d = pansu_differential(c, heisenberg_frame(), parse_map("x1; x2; x3 + x1*x2 + x1", 3));
  EXPECT_FALSE(d.differentiable());
}

TEST(PansuDifferential, SeedDoesNotChangeTheFit) {
  PansuOptions a, b;
  b.seed = 7;
  const auto f = builtin_map("heis-shear-perturbed", 3);
  const auto da = pansu_differential(heis_chart(), heisenberg_frame(), f, a);
  const auto db = pansu_differential(heis_chart(), heisenberg_frame(), f, b);
  EXPECT_LE((da.L.matrix - db.L.matrix).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Equivalences, IdentityAllFiveVanish) {
  const PansuProblem p(heis_chart(), heisenberg_frame(), builtin_map("identity", 3));
  const auto e = check_equivalences(p, pansu_differential(p).L);
  EXPECT_TRUE(e.all_vanish());
  for (const auto& i : e.items) EXPECT_TRUE(i.report.converged());
}

TEST(Equivalences, AutomorphismOrdersAgree) {
  for (const std::string name : {"heis-linear:1.2,0.3,-0.4,0.9", "heis-shear-perturbed"}) {
    const PansuProblem p(heis_chart(), heisenberg_frame(), builtin_map(name, 3));
    const auto e = check_equivalences(p, pansu_differential(p).L);
    EXPECT_TRUE(e.all_vanish()) << name;
    EXPECT_LE(e.order_spread(), 0.2) << name;
  }
}

TEST(Equivalences, WrongDifferentialFailsAllFive) {
  for (const std::string name : {"heis-linear:1.2,0.3,-0.4,0.9", "heis-shear-perturbed"}) {
    const PansuProblem p(heis_chart(), heisenberg_frame(), builtin_map(name, 3));
    HomogeneousHom wrong = pansu_differential(p).L;
    wrong.matrix.topLeftCorner(2, 2).transposeInPlace();
    const auto e = check_equivalences(p, wrong);
    EXPECT_TRUE(e.none_vanish()) << name;
    EXPECT_TRUE(e.consistent());
  }
}

TEST(ChainRule, IdentityAndDilations) {
  const Frame& h = heisenberg_frame();
  const auto id = builtin_map("identity", 3);
  const auto ci = chain_rule_check(heis_chart(), h, h, id, id);
  EXPECT_LE((ci.product - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(ci.pass());

  const auto cd = chain_rule_check(heis_chart(), h, h, builtin_map("heis-dilation:1.5", 3), builtin_map("heis-dilation:0.8", 3));
  EXPECT_TRUE(cd.pass());
  EXPECT_LE((cd.dcomposed.L.matrix - heis_linear(1.2, 0, 0, 1.2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ChainRule, ComposedAutomorphisms) {
  const Frame& h = heisenberg_frame();
  const auto c = chain_rule_check(heis_chart(), h, h, builtin_map("heis-linear:1.2,0.3,-0.4,0.9", 3),
                                  builtin_map("heis-shear", 3));
  EXPECT_TRUE(c.pass()) << c.residual;
  EXPECT_LE((c.product - heis_linear(1, 1, 0, 1) * heis_linear(1.2, 0.3, -0.4, 0.9)).cwiseAbs().maxCoeff(), 1e-5);
  const auto p = chain_rule_check(heis_chart(), h, h, builtin_map("heis-shear-perturbed", 3),
                                  builtin_map("heis-linear:0.7,-0.2,0.5,1.1", 3));
  EXPECT_LE(p.residual, 1e-4);
}
