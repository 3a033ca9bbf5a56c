#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "carnot/limits.hpp"

using namespace carnot;

namespace {

Frame mislabeled() { return heisenberg_frame().with_degrees("mislabeled", 3, {1, 1, 3}); }

ChartOptions lenient() {
  ChartOptions o;
  o.enforce_grading = false;
  return o;
}

}  // namespace

TEST(EpsilonLadder, GeometricAndValidated) {
  const EpsilonLadder l;
  ASSERT_EQ(l.count(), 10);
  EXPECT_EQ(l[0], 0.5);
  for (int k = 0; k + 1 < l.count(); ++k) EXPECT_DOUBLE_EQ(l[k + 1], 0.5 * l[k]);
  EXPECT_NEAR(l.smallest(), 9.765625e-4, 1e-18);
  EXPECT_THROW(EpsilonLadder(0.5, 0.5, 4), ConfigError);
  EXPECT_THROW(EpsilonLadder(1.5, 0.5, 10), ConfigError);
  EXPECT_THROW(EpsilonLadder(0.5, 1.0, 10), ConfigError);
}

TEST(EstimateLimit, ConstantSequenceConverges) {
  const EpsilonLadder l;
  const Vec ref{{1.0, 2.0}};
  const auto r = estimate_limit(l, std::vector<Vec>(10, ref), ref);
  for (double e : r.errors) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(r.status, LimitStatus::Converged);
  EXPECT_TRUE(std::isinf(r.fitted_order));
  EXPECT_EQ(r.limit_estimate, ref);
}

TEST(EstimateLimit, RecoversSyntheticOrder) {
  const EpsilonLadder l;
  std::vector<Vec> seq;
  for (double e : l.values()) seq.push_back(Vec{{std::pow(e, 1.5)}});
  const auto r = estimate_limit(l, seq, Vec::Zero(1));
  EXPECT_NEAR(r.fitted_order, 1.5, 0.01);
  EXPECT_LT(r.fit_residual, 1e-12);
  EXPECT_EQ(r.fit_points, 10);
  EXPECT_EQ(r.status, LimitStatus::Converged);
}

TEST(EstimateLimit, GrowingErrorsDiverge) {
  const EpsilonLadder l;
  std::vector<Vec> seq;
  for (double e : l.values()) seq.push_back(Vec{{1.0 / e}});
  const auto r = estimate_limit(l, seq, Vec::Zero(1));
  EXPECT_EQ(r.status, LimitStatus::Diverging);
  EXPECT_NEAR(r.fitted_order, -1.0, 1e-12);
}

TEST(EstimateLimit, FlatErrorIsNotConvergence) {
  const EpsilonLadder l;
  const auto r = analyze_errors(l, std::vector<double>(10, 0.0), std::vector<double>(10, 1e-4));
  EXPECT_EQ(r.status, LimitStatus::NotConverged);
  EXPECT_NEAR(r.fitted_order, 0.0, 1e-12);
}

TEST(EstimateLimit, FloorRungsAreLeftOutOfTheFit) {
  const EpsilonLadder l;
  std::vector<double> e;
  for (double x : l.values()) e.push_back(std::pow(x, 4));
  const auto r = analyze_errors(l, e, e);
  EXPECT_EQ(r.fit_points, 7);
  EXPECT_NEAR(r.fitted_order, 4.0, 1e-9);
  EXPECT_TRUE(r.converged());
}

TEST(Combinations, FixedPoints) {
  const Chart chart(grushin_regularized_frame(), Vec{{0.1, 0.0, -0.1}});
  const Vec& x = chart.base();
  const Vec u = exp_map(chart, Vec{{0.2, -0.1, 0.03}});
  for (double eps : {0.5, 0.1, 0.01}) {
    EXPECT_LE(sup_norm(sigma_eps(chart, x, u, eps) - u), 1e-10);
    EXPECT_EQ(sigma_eps(chart, x, x, eps), x);
    EXPECT_LE(sup_norm(inv_eps(chart, u, eps) - lambda_eps(chart, u, x, eps)), 1e-12);
  }
}

TEST(Combinations, HeisenbergLimitsAreGroupOperations) {
  const Chart chart(heisenberg_frame(), Vec::Zero(3));
  const auto alg = tangent_algebra(chart);
  Rng rng(21);
  for (int s = 0; s < 10; ++s) {
    const Vec u = rng.graded_box({1, 1, 2}, 0.25), v = rng.graded_box({1, 1, 2}, 0.25);
    double prev = INFINITY;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
      const double e = sup_norm(sigma_eps(chart, u, v, eps) - alg.product(u, v));
      EXPECT_LT(e, prev);
      EXPECT_LE(e, eps);  // Sigma_eps(u, v) = u * delta_eps(u)^{-1} * v here
      prev = e;
    }
    const double eps = 1e-3;
    EXPECT_LE(sup_norm(inv_eps(chart, u, eps) + u), 2 * eps);
    EXPECT_LE(sup_norm(lambda_eps(chart, u, v, eps) - alg.product(-u, v)), 2 * eps);
    EXPECT_LE(sup_norm(lambda_eps(chart, u, v, eps) - sigma_eps(chart, inv_eps(chart, u, eps), v, eps)), 2 * eps);
  }
}

TEST(Combinations, AbelianSigmaHasExactFormula) {
  // Delta^y_eps v = y + eps (v - y), so Sigma_eps(u, v) = u + v - eps u
  const Chart chart(abelian_frame(2), Vec::Zero(2));
  const Vec u{{0.2, -0.1}}, v{{0.05, 0.3}};
  EXPECT_LE(sup_norm(sigma_eps(chart, u, v, 0.1) - (u + v - 0.1 * u)), 1e-15);
}

TEST(Combinations, OutOfChartPropagates) {
  const Chart chart(heisenberg_frame(), Vec::Zero(3));
  EXPECT_THROW(sigma_eps(chart, Vec{{0.9, 0.9, 0}}, Vec{{0.9, 0.9, 0}}, 1e-3), OutOfChart);
}

TEST(LocalApproximation, LeftInvariantFramesMatchTheirTangentGroup) {
  for (const Frame& f : {heisenberg_frame(), engel_frame()}) {
    const Chart chart(f, Vec::Zero(f.dim()));
    Rng rng(42);
    const auto r = check_local_approximation(chart, EpsilonLadder(), 50, rng);
    EXPECT_TRUE(r.converged()) << f.name();
    for (double e : r.errors) EXPECT_LT(e, 1e-9);
    EXPECT_GE(r.fitted_order, 1.0 + f.alpha() / f.depth() - 0.15);
  }
}

TEST(LocalApproximation, AbelianIsIdenticallyZero) {
  const Chart chart(abelian_frame(3), Vec{{0.1, 0.2, 0.3}});
  Rng rng(1);
  const auto r = check_local_approximation(chart, EpsilonLadder(), 20, rng);
  for (double e : r.errors) EXPECT_LE(e, 1e-15);
}

TEST(LocalApproximation, GrushinOrderMeetsTheBound) {
  const Chart chart(grushin_regularized_frame(), Vec::Zero(3));
  Rng rng(42);
  const auto r = check_local_approximation(chart, EpsilonLadder(), 50, rng);
  EXPECT_EQ(r.fit_points, 10);
  EXPECT_GE(r.fitted_order, 1.5 - 0.15);
  EXPECT_TRUE(r.converged());
}

TEST(LocalApproximation, OffOriginBaseStaysAtTheFloor) {
  const Chart chart(engel_frame(), Vec{{0.3, -0.2, 0.1, 0.25}});
  Rng rng(3);
  const auto r = check_local_approximation(chart, EpsilonLadder(), 10, rng);
  EXPECT_TRUE(r.at_floor());
}

TEST(IntegralLines, TrivialCasesVanish) {
  const Chart chart(grushin_regularized_frame(), Vec{{0.1, 0.1, 0.0}});
  const auto same = check_integral_line_divergence(chart, chart.base(), Vec::Zero(3), EpsilonLadder());
  for (double e : same.report.errors) EXPECT_EQ(e, 0.0);

  const Chart flat(abelian_frame(3), Vec::Zero(3));
  const auto ab = check_integral_line_divergence(flat, Vec{{0.1, 0.2, 0.3}}, Vec{{0.5, -0.5, 0.5}}, EpsilonLadder());
  for (double e : ab.raw) EXPECT_LE(e, 1e-10);
  EXPECT_TRUE(ab.bounded);
}

TEST(IntegralLines, HeisenbergRatioBounded) {
  const Chart chart(heisenberg_frame(), Vec::Zero(3));
  const auto r = check_integral_line_divergence(chart, Vec{{0.1, 0.1, 0.0}}, Vec{{0.5, 0.5, 0.5}}, EpsilonLadder());
  EXPECT_TRUE(r.bounded);
  EXPECT_LT(r.spread, 3.0);
}

TEST(IntegralLines, GrushinDivergenceAgreesWithDirectFlowComparison) {
  // At u = 0 the nilpotentized X2 is d2 + x1 d3 in exponential coordinates while X2 carries
  // the extra x1^2/2 d3; only the third coordinate can separate.
  const Chart chart(grushin_regularized_frame(), Vec::Zero(3));
  const Vec v{{0.1, 0.1, 0.0}}, w{{0.0, 1.0, 0.0}};
  const auto r = check_integral_line_divergence(chart, v, w, EpsilonLadder());
  const auto alg = tangent_algebra(chart);
  const double eps = EpsilonLadder()[4];
  const Vec we = graded_scale(w, {1, 1, 2}, eps);
  const Vec a = normal_coords(chart, flow(chart.frame(), we, v, 1.0)).v;
  const Vec b = alg.product(normal_coords(chart, v).v, we);
  EXPECT_NEAR(r.report.errors[4], alg.distance(a, b), 1e-12);
  EXPECT_GT(r.report.errors[4], 1e-4);
}

TEST(Distortion, IdentityAndScaling) {
  Rng rng(5);
  std::vector<Vec> pts;
  for (int s = 0; s < 12; ++s) pts.push_back(rng.uniform_vec(2, -1, 1));
  const Quasimetric d = [](const Vec& a, const Vec& b) { return (a - b).norm(); };
  EXPECT_EQ(distortion({pts, d, pts, d}), 0.0);

  const double lambda = 1.7;
  const Quasimetric scaled = [&](const Vec& a, const Vec& b) { return lambda * d(a, b); };
  double diam = 0.0;
  for (const Vec& a : pts)
    for (const Vec& b : pts) diam = std::max(diam, d(a, b));
  EXPECT_NEAR(distortion({pts, d, pts, scaled}), (lambda - 1) * diam, 1e-14);
  EXPECT_THROW(distortion({{}, d, {}, d}), ConfigError);
}

TEST(Distortion, RescaledSpacesApproachTheCone) {
  const Chart chart(grushin_regularized_frame(), Vec::Zero(3));
  const auto alg = tangent_algebra(chart);
  Rng rng(6);
  std::vector<Vec> pts;
  const Box b = box(chart, 0.5);
  for (int s = 0; s < 8; ++s) pts.push_back(b.sample(rng));
  const EpsilonLadder l;
  std::vector<double> d;
  for (double eps : l.values()) d.push_back(rescaled_distortion(chart, alg, pts, eps));
  const auto r = analyze_errors(l, d, d);
  EXPECT_TRUE(r.converged());
  EXPECT_GT(r.fitted_order, 0.5);
}

TEST(AxiomSuite, BuiltinsPass) {
  for (const Frame& f : {heisenberg_frame(), engel_frame(), abelian_frame(3), grushin_regularized_frame()}) {
    const auto rep = run_axiom_suite(Chart(f, Vec::Zero(f.dim())));
    for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << f.name() << " " << c.id << " " << c.status << " " << c.note;
  }
}

TEST(AxiomSuite, AbelianA3ResidualsVanish) {
  const auto rep = run_axiom_suite(Chart(abelian_frame(3), Vec::Zero(3)));
  for (const char* id : {"A3.limit", "A3.distortion", "A3.cone"})
    for (const auto& row : rep.find(id)->rows) EXPECT_LE(row.error, 1e-15) << id;
}

TEST(AxiomSuite, OffOriginBase) {
  const auto rep = run_axiom_suite(Chart(engel_frame(), Vec{{0.2, -0.1, 0.05, 0.1}}));
  EXPECT_TRUE(rep.all_pass());
}

TEST(AxiomSuite, MislabeledDegreesDivergeInA3) {
  const auto rep = run_axiom_suite(Chart(mislabeled(), Vec::Zero(3), lenient()));
  EXPECT_FALSE(rep.all_pass());
  const auto* a3 = rep.find("A3.limit");
  ASSERT_NE(a3, nullptr);
  EXPECT_EQ(a3->status, "DIVERGING");
  EXPECT_FALSE(rep.find("regularity")->pass);
}

TEST(AxiomSuite, ChecksCarryTolerances) {
  const auto rep = run_axiom_suite(Chart(heisenberg_frame(), Vec::Zero(3)));
  for (const auto& c : rep.checks) {
    EXPECT_FALSE(c.rows.empty()) << c.id;
    EXPECT_GE(c.tolerance, 0.0);
  }
  EXPECT_EQ(rep.find("A3.limit")->rows.size(), 10u);
}

TEST(FrameTranslation, PreservesGeometry) {
  const Frame g = grushin_regularized_frame();
  const Vec y{{0.3, -0.2, 0.1}};
  const Frame t = g.translated(y);
  Rng rng(9);
  for (int s = 0; s < 10; ++s) {
    const Vec p = rng.uniform_vec(3, -0.5, 0.5);
    EXPECT_LE((t.values(p) - g.values(Vec(p + y))).cwiseAbs().maxCoeff(), 1e-15);
  }
  const Chart c(g, y);
  const Chart cc = c.centered();
  EXPECT_EQ(cc.base(), Vec::Zero(3));
  EXPECT_NEAR(cc.structure()(0, 1, 2), c.structure()(0, 1, 2), 1e-15);
  const Vec v{{0.2, 0.1, -0.05}};
  EXPECT_LE(sup_norm(exp_map(cc, v) + y - exp_map(c, v)), 1e-14);
}

TEST(ResolvedDistance, DropsRoundoffOnly) {
  const auto alg = nilpotentize(engel_frame(), Vec::Zero(4));
  const Vec a{{0.1, 0.1, 0.01, 0.001}};
  Vec b = a;
  b[3] += 4e-19;  // two ulps
  EXPECT_GT(alg.distance(a, b), 1e-7);
  EXPECT_EQ(alg.resolved_distance(a, b), 0.0);
  b[3] += 1e-6;
  EXPECT_NEAR(alg.resolved_distance(a, b), alg.distance(a, b), 1e-15);
}
