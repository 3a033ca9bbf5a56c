// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "carnot/limits.hpp"
#include "carnot/pansu.hpp"
#include "carnot/report.hpp"
#include "carnot/tangent.hpp"

using namespace carnot;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && dt > budget_s) {
    o.pass = false;
    o.detail += "; over the " + fmt(budget_s) + " s budget";
  }
  if (!o.pass) ++failures;
  std::printf("criterion %2d %s  %s: %s (%.2f s)\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(), dt);
  std::fflush(stdout);
}

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

GradedAlgebra algebra(const Frame& f) { return tangent_algebra(Chart(f, Vec::Zero(f.dim()))); }

/// Axiom suites at the origin with default configuration, computed once.
const SuiteReport& suite(const std::string& name) {
  static std::map<std::string, SuiteReport> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    const Frame f = name == "mislabeled" ? Frame::parse("heisenberg-mislabeled", 3, {1, 1, 3},
                                                        {{"1", "0", "-0.5*x2"}, {"0", "1", "0.5*x1"}, {"0", "0", "1"}})
                                         : builtin_frame(name);
    ChartOptions opt;
    opt.enforce_grading = false;
    it = cache.emplace(name, run_axiom_suite(Chart(f, Vec::Zero(f.dim()), opt))).first;
  }
  return it->second;
}

const CheckResult& check(const std::string& frame, const std::string& id) {
  const auto* c = suite(frame).find(id);
  if (c == nullptr) throw Error("suite for " + frame + " has no check " + id);
  return *c;
}

double worst_error(const CheckResult& c) {
  double w = 0.0;
  for (const auto& r : c.rows)
    if (!std::isnan(r.error)) w = std::max(w, r.error);
  return w;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + CARNOT_CLI + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main() {
  criterion(1, "Heisenberg BCH closed form", 5.0, [] {
    const auto alg = algebra(heisenberg_frame());
    Rng rng(1);
    double closed = 0.0, assoc = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const Vec a = rng.uniform_vec(3, -1, 1), b = rng.uniform_vec(3, -1, 1), c = rng.uniform_vec(3, -1, 1);
      const Vec want{{a[0] + b[0], a[1] + b[1], a[2] + b[2] + 0.5 * (a[0] * b[1] - a[1] * b[0])}};
      closed = std::max(closed, sup_norm(alg.product(a, b) - want));
      assoc = std::max(assoc, sup_norm(alg.product(alg.product(a, b), c) - alg.product(a, alg.product(b, c))));
    }
    return Outcome{closed <= 1e-12 && assoc <= 1e-10,
                   "closed-form error " + g(closed) + " (tol 1e-12), associativity " + g(assoc) + " (tol 1e-10)"};
  });

  criterion(2, "cone property", 0.0, [] {
    double rel = 0.0;
    for (const Frame& f : {heisenberg_frame(), engel_frame()}) {
      const auto alg = algebra(f);
      Rng rng(2);
      for (int k = 0; k < 2000; ++k) {
        const Vec a = rng.graded_box(alg.degrees(), 1.0), b = rng.graded_box(alg.degrees(), 1.0);
        const double d = alg.distance(a, b);
        for (double e : {0.5, 0.1, 0.01})
          rel = std::max(rel, std::abs(alg.distance(alg.dilate(a, e), alg.dilate(b, e)) - e * d) / (e * d));
      }
    }
    const double manifold = std::max(worst_error(check("heisenberg", "A3.cone")), worst_error(check("engel", "A3.cone")));
    return Outcome{rel <= 1e-12 && manifold <= 1e-3,
                   "group relative error " + g(rel) + " (tol 1e-12), manifold side " + g(manifold) + " (tol 1e-3)"};
  });

  criterion(3, "local approximation order", 60.0, [] {
    bool ok = true;
    std::string detail;
    for (const std::string name : {"heisenberg", "engel", "grushin-regularized"}) {
      const Frame f = builtin_frame(name);
      const Chart chart(f, Vec::Zero(f.dim()));
      Rng rng(42);
      const auto r = check_local_approximation(chart, EpsilonLadder(), 50, rng);
      const double bound = 1.0 + f.alpha() / f.depth() - 0.15;
      const bool pass = r.converged() && (r.at_floor() || r.fitted_order >= bound);
      if (name != "grushin-regularized") ok = ok && pass;
      detail += (detail.empty() ? "" : "; ") + name + " order " +
                (r.at_floor() ? std::string("inf (difference identically 0)") : g(r.fitted_order)) + " vs " + g(bound);
    }
    return Outcome{ok, detail};
  });

  criterion(4, "axiom suite", 0.0, [] {
    bool ok = true;
    std::string detail;
    for (const std::string name : {"heisenberg", "engel", "abelian:3"}) {
      const auto& s = suite(name);
      int passed = 0;
      for (const auto& c : s.checks) passed += c.pass ? 1 : 0;
      ok = ok && s.all_pass();
      detail += name + " " + std::to_string(passed) + "/" + std::to_string(s.checks.size()) + ", ";
    }
    const double lambda = check("heisenberg", "A4.lambda").rows.back().error;
    const auto& neg = check("mislabeled", "A3.limit");
    ok = ok && lambda <= 1e-3 && !neg.pass && neg.status == "DIVERGING";
    detail += "Lambda at smallest rung " + g(lambda) + " (tol 1e-3), mislabeled A3 " + neg.status;
    return Outcome{ok, detail};
  });

  criterion(5, "integral-line divergence", 0.0, [] {
    bool ok = true;
    std::string detail;
    for (const Frame& f : {heisenberg_frame(), engel_frame()}) {
      const Chart chart(f, Vec::Zero(f.dim()));
      Vec v = Vec::Zero(f.dim()), w(f.dim());
      for (int i = 0; i < f.dim(); ++i) {
        if (f.degree(i) == 1) v[i] = 0.1;
        w[i] = 0.5 - 0.2 * i;
      }
      const auto r = check_integral_line_divergence(chart, v, w, EpsilonLadder());
      ok = ok && r.bounded && r.spread < 3.0;
      detail += f.name() + " max/min " + g(r.spread) + ", ";
    }
    const Chart flat(abelian_frame(3), Vec::Zero(3));
    const auto ab = check_integral_line_divergence(flat, Vec{{0.1, 0.2, 0.3}}, Vec{{0.5, -0.5, 0.5}}, EpsilonLadder());
    double raw = 0.0;
    for (double e : ab.raw) raw = std::max(raw, e);
    ok = ok && raw <= 1e-10;
    detail += "abelian " + g(raw) + " (tol 1e-10)";
    return Outcome{ok, detail};
  });

  criterion(6, "global associativity", 0.0, [] {
    const Chart chart(heisenberg_frame(), Vec::Zero(3));
    const auto alg = tangent_algebra(chart);
    Rng rng(42);
    const auto sched = scale_schedule(alg, 10000, rng);
    const auto grp = check_associativity(alg, 5, 100, rng, sched);
    const double eps = EpsilonLadder().smallest();
    const auto lim = check_associativity(chart, 5, 100, rng, sched, eps);
    return Outcome{grp.trees == 14 && grp.pass() && lim.pass(),
                   std::to_string(grp.trees) + " trees, group gap " + g(grp.max_spread()) + " (tol 1e-9), limit gap " +
                       g(lim.max_spread()) + " at eps " + g(eps) + " (tol 1e-3)"};
  });

  criterion(7, "homogeneous norm", 0.0, [] {
    const auto alg = algebra(heisenberg_frame());
    Rng rng(7);
    double homog = 0.0, ident = 0.0, smallest = INFINITY;
    for (int k = 0; k < 10000; ++k) {
      const Vec u = rng.graded_box(alg.degrees(), 1.0);
      const double r = rng.uniform(0.01, 10.0);
      homog = std::max(homog, std::abs(alg.norm(alg.dilate(u, r)) - r * alg.norm(u)) / (r * alg.norm(u)));
      ident = std::max(ident, alg.norm(alg.product(u, alg.inverse(u))));
      smallest = std::min(smallest, alg.norm(u));
    }
    Rng r1(11), r2(11);
    const double c1 = estimate_triangle_constant(alg, 5000, r1);
    const double c2 = estimate_triangle_constant(alg, 10000, r2);
    const bool stable = std::isfinite(c1) && std::abs(c2 - c1) <= 0.1 * c1;
    const bool ok = homog <= 1e-12 && alg.norm(alg.identity()) == 0.0 && ident <= 1e-12 && smallest > 1e-12 && stable;
    return Outcome{ok, "homogeneity " + g(homog) + ", |u u^-1| " + g(ident) + ", min |u| over nonidentity " +
                           g(smallest) + ", triangle constant " + g(c1) + " -> " + g(c2) + " under doubling"};
  });

  criterion(8, "left-translation isometry", 0.0, [] {
    const auto alg = algebra(heisenberg_frame());
    Rng rng(8);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const Vec x = rng.uniform_vec(3, -1, 1), a = rng.uniform_vec(3, -1, 1), b = rng.uniform_vec(3, -1, 1);
      worst = std::max(worst, std::abs(alg.distance(alg.product(x, a), alg.product(x, b)) - alg.distance(a, b)));
    }
    const double lim = std::max(worst_error(check("heisenberg", "limit.isometry")),
                                worst_error(check("engel", "limit.isometry")));
    return Outcome{worst <= 1e-12 && lim <= 1e-3,
                   "group " + g(worst) + " (tol 1e-12), limit side " + g(lim) + " (tol 1e-3)"};
  });

  criterion(9, "Pansu differential", 30.0, [] {
    const Frame h = heisenberg_frame();
    const Chart chart(h, Vec::Zero(3));
    const PansuOptions opt;
    const PolyMap aut = resolve_map("heis-linear:1.2,0.3,-0.4,0.9", 3);
    Mat want = Mat::Zero(3, 3);
    want << 1.2, 0.3, 0, -0.4, 0.9, 0, 0, 0, 1.2 * 0.9 + 0.3 * 0.4;
    const auto d = pansu_differential(chart, h, aut, opt);
    const double mat_err = (d.L.matrix - want).cwiseAbs().maxCoeff();

    const PansuProblem prob(chart, h, aut);
    const auto eq = check_equivalences(prob, d.L, opt);
    const auto pert = check_equivalences(chart, h, resolve_map("heis-shear-perturbed", 3),
                                         pansu_differential(chart, h, resolve_map("heis-shear-perturbed", 3), opt).L, opt);

    const auto chain = chain_rule_check(chart, h, h, aut, resolve_map("heis-linear:0.7,-0.5,0.6,1.1", 3), opt, 1e-4);
    const bool ok = mat_err <= 1e-6 && eq.all_vanish() && pert.all_vanish() && chain.pass();
    return Outcome{ok, "matrix error " + g(mat_err) + " (tol 1e-6), items 1-5 vanish: " +
                           (eq.all_vanish() ? "all" : "not all") + " (perturbed shear: " +
                           (pert.all_vanish() ? "all" : "not all") + ", order spread " + g(pert.order_spread()) +
                           "), chain residual " + g(chain.residual) + " (tol 1e-4)"};
  });

  criterion(10, "determinism", 0.0, [] {
    const auto dir = std::filesystem::temp_directory_path() / "carnot_acceptance";
    std::filesystem::create_directories(dir);
    const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
    const int ca = run_cli("verify-axioms --frame heisenberg --seed 42 --csv '" + a + "' --out '" + a + ".txt'");
    const int cb = run_cli("verify-axioms --frame heisenberg --seed 42 --csv '" + b + "' --out '" + b + ".txt'");
    const std::string sa = slurp(a), sb = slurp(b);
    std::filesystem::remove_all(dir);
    return Outcome{ca == 0 && cb == 0 && !sa.empty() && sa == sb,
                   "exit codes " + std::to_string(ca) + "/" + std::to_string(cb) + ", " + std::to_string(sa.size()) +
                       " bytes, " + (sa == sb ? "byte-identical" : "different")};
  });

  std::printf("%s: %d of 10 criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
