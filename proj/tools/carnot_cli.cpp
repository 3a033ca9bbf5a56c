// carnot: command-line front end for tangent cones of regular CC frames.
//
// Exit codes: 0 all checks passed, 1 a check failed or a computation broke
// down, 2 usage or configuration error, 3 I/O failure.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "carnot/frame_io.hpp"
#include "carnot/limits.hpp"
#include "carnot/pansu.hpp"
#include "carnot/report.hpp"
#include "carnot/tangent.hpp"

using namespace carnot;

namespace {

enum Exit { kPass = 0, kFail = 1, kUsage = 2, kIo = 3 };

// -- argument values ------------------------------------------------------------

Vec parse_vector(const std::string& text, const std::string& what) {
  std::vector<double> vals;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = text.find(',', pos);
    std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto b = tok.find_first_not_of(" \t"), e = tok.find_last_not_of(" \t");
    tok = b == std::string::npos ? "" : tok.substr(b, e - b + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
      throw ConfigError(what + ": malformed vector '" + text + "'");
    vals.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  Vec out(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) out[static_cast<Eigen::Index>(i)] = vals[i];
  return out;
}

Vec vector_of_dim(const std::string& text, int n, const std::string& what) {
  if (text.empty()) return Vec::Zero(n);
  Vec v = parse_vector(text, what);
  if (v.size() != n)
    throw ConfigError(what + ": expected " + std::to_string(n) + " components, got " + std::to_string(v.size()));
  return v;
}

EpsilonLadder parse_ladder(const std::string& text) {
  const Vec v = parse_vector(text, "--ladder");
  if (v.size() != 3) throw ConfigError("--ladder: expected eps0,ratio,count");
  if (v[2] != std::floor(v[2]) || v[2] < 5) throw ConfigError("--ladder: count must be an integer >= 5");
  return EpsilonLadder(v[0], v[1], static_cast<int>(v[2]));
}

// -- shared options -------------------------------------------------------------

struct Common {
  std::string frame = "heisenberg";
  std::string base;
  std::string ladder = "0.5,0.5,10";
  std::uint64_t seed = 42;
  double ode_tolerance = 1e-10;
  double limit_tolerance = 1e-3;
  double order_margin = 0.15;
  std::string out;
  std::string csv;
  std::string config;
};

void add_frame(CLI::App* sub, Common& c, bool with_base = true) {
  sub->add_option("--frame", c.frame, "built-in frame name or JSON frame file")->capture_default_str();
  if (with_base) sub->add_option("--base", c.base, "base point, comma-separated (default: origin)");
  sub->add_option("--ode-tolerance", c.ode_tolerance, "flow integration tolerance")->capture_default_str();
}

void add_ladder(CLI::App* sub, Common& c) {
  sub->add_option("--ladder", c.ladder, "eps0,ratio,count")->capture_default_str();
  sub->add_option("--seed", c.seed, "sampling seed (CARNOT_SEED overrides)")->capture_default_str();
  sub->add_option("--limit-tolerance", c.limit_tolerance, "accepted error at the smallest rung")->capture_default_str();
}

void add_output(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "structured text report path (default: stdout)");
  sub->add_option("--csv", c.csv, "CSV table path ('-' for stdout; default: <out>.csv)");
}

ChartOptions chart_options(const Common& c, bool enforce_grading = true) {
  if (!(c.ode_tolerance > 0.0)) throw ConfigError("--ode-tolerance must be positive");
  if (!(c.limit_tolerance > 0.0)) throw ConfigError("--limit-tolerance must be positive");
  if (!(c.order_margin > 0.0)) throw ConfigError("--order-margin must be positive");
  ChartOptions o;
  o.ode_tolerance = c.ode_tolerance;
  o.enforce_grading = enforce_grading;
  return o;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path + "'");
  return os;
}

void finish(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) throw IoError("write to '" + path + "' failed");
}

/// Text report to --out or stdout, CSV to --csv (or <out>.csv).
int emit(const SuiteReport& rep, const Common& c, const std::function<void(std::ostream&)>& extra = {}) {
  auto text = [&](std::ostream& os) {
    write_text(os, rep);
    if (extra) extra(os);
  };
  if (c.out.empty()) {
    text(std::cout);
  } else {
    auto os = open_out(c.out);
    text(os);
    finish(os, c.out);
  }
  const std::string csv = !c.csv.empty() ? c.csv : (c.out.empty() ? "" : c.out + ".csv");
  if (csv == "-") {
    write_csv(std::cout, rep);
  } else if (!csv.empty()) {
    auto os = open_out(csv);
    write_csv(os, rep);
    finish(os, csv);
  }
  return rep.all_pass() ? kPass : kFail;
}

void print_vec(const Vec& v) { std::cout << fmt(v, ",") << '\n'; }

// -- config file ------------------------------------------------------------------

std::string json_scalar(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return fmt(v.get<double>());
  throw ConfigError("config key '" + key + "': unsupported value " + v.dump());
}

bool on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args)
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  return false;
}

/// Appends file settings that the command line leaves unset; flags win, with a warning.
void merge_config(CLI::App& sub, std::vector<std::string>& args, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
  for (const auto& [key, value] : j.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    const std::string flag = "--" + name;
    const CLI::Option* opt = name == "config" || name == "help" ? nullptr : sub.get_option_no_throw(flag);
    if (opt == nullptr) throw ConfigError(path + ": unknown key '" + key + "' for subcommand " + sub.get_name());
    if (on_command_line(args, flag)) {
      std::cerr << "warning: " << flag << " on the command line overrides '" << key << "' from " << path << '\n';
      continue;
    }
    if (value.is_boolean()) {
      if (opt->get_expected_max() != 0) throw ConfigError(path + ": key '" + key + "' is not a switch");
      if (value.get<bool>()) args.push_back(flag);
      continue;
    }
    std::string text;
    if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + json_scalar(value[i], key);
    } else {
      text = json_scalar(value, key);
    }
    args.push_back(flag);
    args.push_back(text);
  }
}

std::optional<std::string> config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file path");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

std::uint64_t apply_env_seed(std::uint64_t seed) {
  const char* env = std::getenv("CARNOT_SEED");
  if (env == nullptr) return seed;
  const std::string s(env);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("CARNOT_SEED must be a nonnegative integer, got '" + s + "'");
  if (v != seed) std::cerr << "note: CARNOT_SEED=" << v << " overrides seed " << seed << '\n';
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tangent cones, dilation-structure axioms and Pansu differentials of regular CC frames", "carnot"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  Common c;
  std::function<int()> run;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "JSON file of option values; flags take precedence");
  };

  // exp
  std::string coords;
  auto* exp_cmd = app.add_subcommand("exp", "normal coordinates -> point, exp(sum v_i X_i)(g)");
  add_frame(exp_cmd, c);
  exp_cmd->add_option("--coords", coords, "normal coordinates v")->required();
  with_config(exp_cmd);
  exp_cmd->callback([&] {
    run = [&] {
      const Frame f = resolve_frame(c.frame);
      const Chart chart(f, vector_of_dim(c.base, f.dim(), "--base"), chart_options(c));
      print_vec(exp_map(chart, vector_of_dim(coords, f.dim(), "--coords")));
      return kPass;
    };
  });

  // dist
  std::string from, to;
  auto* dist_cmd = app.add_subcommand("dist", "d_inf(u, w) on the manifold");
  add_frame(dist_cmd, c, false);
  dist_cmd->add_option("--from", from, "point u")->required();
  dist_cmd->add_option("--to", to, "point w")->required();
  with_config(dist_cmd);
  dist_cmd->callback([&] {
    run = [&] {
      const Frame f = resolve_frame(c.frame);
      std::cout << fmt(dist_inf(f, vector_of_dim(from, f.dim(), "--from"), vector_of_dim(to, f.dim(), "--to"),
                                chart_options(c)))
                << '\n';
      return kPass;
    };
  });

  // dilate
  double eps = 0.5;
  std::string point;
  auto* dil_cmd = app.add_subcommand("dilate", "Delta^g_eps x");
  add_frame(dil_cmd, c);
  dil_cmd->add_option("--eps", eps, "dilation parameter")->required();
  dil_cmd->add_option("--point", point, "point x")->required();
  with_config(dil_cmd);
  dil_cmd->callback([&] {
    run = [&] {
      const Frame f = resolve_frame(c.frame);
      const Chart chart(f, vector_of_dim(c.base, f.dim(), "--base"), chart_options(c));
      print_vec(dilation_delta_cap(chart, vector_of_dim(point, f.dim(), "--point"), eps));
      return kPass;
    };
  });

  // nilpotentize
  auto* nil_cmd = app.add_subcommand("nilpotentize", "graded constants of the tangent algebra at g");
  add_frame(nil_cmd, c);
  with_config(nil_cmd);
  nil_cmd->callback([&] {
    run = [&] {
      const Frame f = resolve_frame(c.frame);
      const Chart chart(f, vector_of_dim(c.base, f.dim(), "--base"), chart_options(c));
      std::cout << "frame: " << f.name() << '\n' << "base: " << fmt(chart.base()) << '\n';
      std::cout << "grading_residual: " << fmt(chart.structure().residual_grading) << '\n';
      write_algebra(std::cout, tangent_algebra(chart));
      return kPass;
    };
  });

  // group operations
  std::string ga, gb;
  auto group_cmd = [&](const char* name, const char* help, bool binary) {
    auto* sub = app.add_subcommand(name, help);
    add_frame(sub, c);
    sub->add_option("--a", ga, "group element a (exponential coordinates)")->required();
    if (binary) sub->add_option("--b", gb, "group element b")->required();
    with_config(sub);
    return sub;
  };
  auto algebra_at = [&]() {
    const Frame f = resolve_frame(c.frame);
    return nilpotentize(Chart(f, vector_of_dim(c.base, f.dim(), "--base"), chart_options(c)).structure(), f.degrees(),
                        f.depth());
  };
  group_cmd("gmul", "a * b in the tangent group", true)->callback([&] {
    run = [&] {
      const auto alg = algebra_at();
      print_vec(alg.product(vector_of_dim(ga, alg.dim(), "--a"), vector_of_dim(gb, alg.dim(), "--b")));
      return kPass;
    };
  });
  group_cmd("ginv", "a^{-1} in the tangent group", false)->callback([&] {
    run = [&] {
      const auto alg = algebra_at();
      print_vec(alg.inverse(vector_of_dim(ga, alg.dim(), "--a")));
      return kPass;
    };
  });
  group_cmd("gdist", "d_inf^g(a, b) in the tangent group", true)->callback([&] {
    run = [&] {
      const auto alg = algebra_at();
      std::cout << fmt(alg.distance(vector_of_dim(ga, alg.dim(), "--a"), vector_of_dim(gb, alg.dim(), "--b"))) << '\n';
      return kPass;
    };
  });

  // verify-axioms
  AxiomSuiteConfig suite;
  bool no_uniformity = false;
  auto* ver_cmd = app.add_subcommand("verify-axioms", "dilation-structure axioms (A0)-(A4) at g");
  add_frame(ver_cmd, c);
  add_ladder(ver_cmd, c);
  add_output(ver_cmd, c);
  ver_cmd->add_option("--samples", suite.samples, "sample pairs per rung")->capture_default_str();
  ver_cmd->add_option("--grid-samples", suite.grid_samples, "sample pairs per grid point")->capture_default_str();
  ver_cmd->add_option("--order-margin", c.order_margin, "allowed shortfall of fitted orders")->capture_default_str();
  ver_cmd->add_flag("--no-uniformity", no_uniformity, "skip the base-point grid probes");
  with_config(ver_cmd);
  ver_cmd->callback([&] {
    run = [&] {
      const Frame f = resolve_frame(c.frame);
      if (suite.samples < 1 || suite.grid_samples < 1) throw ConfigError("sample counts must be positive");
      const Chart chart(f, vector_of_dim(c.base, f.dim(), "--base"), chart_options(c, false));
      suite.ladder = parse_ladder(c.ladder);
      suite.seed = c.seed;
      suite.limit_tolerance = c.limit_tolerance;
      suite.order_margin = c.order_margin;
      suite.uniformity = !no_uniformity;
      return emit(run_axiom_suite(chart, suite), c);
    };
  });

  // approx-order
  int approx_samples = 50;
  auto* apx_cmd = app.add_subcommand("approx-order", "order of max |d_inf - d_inf^g| over Box(g, eps)");
  add_frame(apx_cmd, c);
  add_ladder(apx_cmd, c);
  add_output(apx_cmd, c);
  apx_cmd->add_option("--samples", approx_samples, "sample pairs per rung")->capture_default_str();
  apx_cmd->add_option("--order-margin", c.order_margin, "allowed shortfall below 1 + alpha/M")->capture_default_str();
  with_config(apx_cmd);
  apx_cmd->callback([&] {
    run = [&] {
      const Frame f = resolve_frame(c.frame);
      if (approx_samples < 1) throw ConfigError("--samples must be positive");
      const Chart chart(f, vector_of_dim(c.base, f.dim(), "--base"), chart_options(c));
      Rng rng(c.seed);
      const auto r = check_local_approximation(chart, parse_ladder(c.ladder), approx_samples, rng,
                                               {c.limit_tolerance, 1e-9});
      const double expected = 1.0 + f.alpha() / f.depth();
      auto check = detail::from_report("approx.order", "max |d_inf - d_inf^g| over Box(g, eps)", r);
      std::ostringstream note;
      note << "fitted order " << fmt(r.fitted_order) << ", bound 1 + alpha/M = " << fmt(expected) << " minus margin "
           << fmt(c.order_margin);
      if (r.at_floor()) note << "; every rung at the noise floor (identically zero difference)";
      check.note = note.str();
      check.pass = check.pass && (r.at_floor() || r.fitted_order >= expected - c.order_margin);
      return emit({f.name(), chart.base(), {check}}, c);
    };
  });

  // divergence
  std::string div_point, div_w;
  int tail = 5;
  auto* div_cmd = app.add_subcommand("divergence", "d_inf^u(w_eps, what_eps) / eps along the ladder");
  add_frame(div_cmd, c);
  add_ladder(div_cmd, c);
  add_output(div_cmd, c);
  div_cmd->add_option("--point", div_point, "start point v (default: base + 0.1 in each degree-1 coordinate)");
  div_cmd->add_option("--w", div_w, "coefficients w (default: 0.5, 0.3, 0.1, ...)");
  div_cmd->add_option("--tail", tail, "rungs used for the spread")->capture_default_str();
  with_config(div_cmd);
  div_cmd->callback([&] {
    run = [&] {
      const Frame f = resolve_frame(c.frame);
      const Chart chart(f, vector_of_dim(c.base, f.dim(), "--base"), chart_options(c));
      Vec v = chart.base();
      if (div_point.empty()) {
        for (int i = 0; i < f.dim(); ++i)
          if (f.degree(i) == 1) v[i] += 0.1;
      } else {
        v = vector_of_dim(div_point, f.dim(), "--point");
      }
      Vec w(f.dim());
      if (div_w.empty()) {
        for (int i = 0; i < f.dim(); ++i) w[i] = 0.5 - 0.2 * i;
      } else {
        w = vector_of_dim(div_w, f.dim(), "--w");
      }
      if (tail < 2) throw ConfigError("--tail must be at least 2");
      const auto ladder = parse_ladder(c.ladder);
      const auto d = check_integral_line_divergence(chart, v, w, ladder, tail, {c.limit_tolerance, 1e-9});
      CheckResult check{"divergence.ratio", "d_inf^u(w_eps, what_eps)/eps bounded over the final rungs", 3.0};
      for (int k = 0; k < ladder.count(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        CheckRow row;
        row.eps = ladder[k];
        row.measured = d.report.errors[kk];
        row.reference = 0.0;
        row.error = d.ratio[kk];
        row.fitted_order = d.report.fitted_order;
        check.rows.push_back(row);
      }
      check.pass = d.bounded;
      check.status = d.bounded ? "BOUNDED" : "GROWING";
      std::ostringstream note;
      note << "max/min ratio over the final " << tail << " rungs " << fmt(d.spread) << "; fitted order in eps "
           << fmt(d.report.fitted_order);
      if (d.report.at_floor()) note << "; identically zero at every rung";
      check.note = note.str();
      return emit({f.name(), chart.base(), {check}}, c);
    };
  });

  // assoc-check
  int n_letters = 4, trials = 100;
  std::string mode = "group";
  double radius = -1.0, assoc_eps = -1.0;
  auto* asc_cmd = app.add_subcommand("assoc-check", "all parenthesizations of scaled words agree");
  add_frame(asc_cmd, c);
  add_ladder(asc_cmd, c);
  add_output(asc_cmd, c);
  asc_cmd->add_option("--n", n_letters, "letters per word")->capture_default_str()->check(CLI::Range(1, 8));
  asc_cmd->add_option("--trials", trials, "random words")->capture_default_str()->check(CLI::PositiveNumber);
  asc_cmd->add_option("--mode", mode, "group or limit")->capture_default_str()->check(CLI::IsMember({"group", "limit"}));
  asc_cmd->add_option("--radius", radius, "letter radius (default: 1 group, 0.1 limit)");
  asc_cmd->add_option("--eps", assoc_eps, "Sigma_eps parameter in limit mode (default: smallest rung)");
  with_config(asc_cmd);
  asc_cmd->callback([&] {
    run = [&] {
      const Frame f = resolve_frame(c.frame);
      const Chart chart(f, vector_of_dim(c.base, f.dim(), "--base"), chart_options(c));
      const auto alg = tangent_algebra(chart);
      Rng rng(c.seed);
      const auto sched = scale_schedule(alg, 10000, rng);
      AssociativityReport r;
      if (mode == "group") {
        r = check_associativity(alg, n_letters, trials, rng, sched, radius > 0 ? radius : 1.0);
      } else {
        const double e = assoc_eps > 0 ? assoc_eps : parse_ladder(c.ladder).smallest();
        r = check_associativity(chart, n_letters, trials, rng, sched, e, radius > 0 ? radius : 0.1, c.limit_tolerance);
      }
      CheckResult check{"assoc." + mode, "largest gap between parenthesizations, per trial", r.tolerance};
      for (double s : r.spread) {
        CheckRow row;
        row.eps = r.eps;
        row.measured = s;
        row.reference = 0.0;
        row.error = s;
        check.rows.push_back(row);
      }
      check.pass = r.pass();
      check.status = check.pass ? "PASS" : "FAIL";
      std::ostringstream note;
      note << r.trees << " trees of " << r.n << " letters, " << r.trials << " trials, s_n = " << fmt(r.scale)
           << ", triangle constant " << fmt(sched.triangle_constant) << ", max gap " << fmt(r.max_spread());
      check.note = note.str();
      return emit({f.name(), chart.base(), {check}}, c);
    };
  });

  // pansu
  std::string frame_dst, map_spec;
  PansuOptions popt;
  auto* pan_cmd = app.add_subcommand("pansu", "numerical Pansu differential of a map at g");
  pan_cmd->add_option("--frame-src", c.frame, "source frame")->capture_default_str();
  pan_cmd->add_option("--frame-dst", frame_dst, "target frame (default: source)");
  pan_cmd->add_option("--map", map_spec, "built-in map name or 'p1; p2; ...' in x1..xN")->required();
  pan_cmd->add_option("--base", c.base, "base point g (default: origin)");
  pan_cmd->add_option("--ode-tolerance", c.ode_tolerance, "flow integration tolerance")->capture_default_str();
  pan_cmd->add_option("--probes", popt.probes, "random probes besides the basis directions")->capture_default_str();
  add_ladder(pan_cmd, c);
  add_output(pan_cmd, c);
  with_config(pan_cmd);
  pan_cmd->callback([&] {
    run = [&] {
      const Frame src = resolve_frame(c.frame);
      const Frame dst = frame_dst.empty() ? src : resolve_frame(frame_dst);
      const Chart chart(src, vector_of_dim(c.base, src.dim(), "--base"), chart_options(c));
      const PolyMap f = resolve_map(map_spec, src.dim());
      popt.ladder = parse_ladder(c.ladder);
      popt.seed = c.seed;
      popt.tolerance = c.limit_tolerance;
      if (popt.probes < 0) throw ConfigError("--probes must be nonnegative");
      const PansuProblem prob(chart, dst, f);
      const auto d = pansu_differential(prob, popt);
      const auto eq = check_equivalences(prob, d.L, popt);
      Rng rng(c.seed + 1);
      const auto hom = check_homogeneous_hom(d.L, 200, rng, popt.probe_radius, popt.hom_tolerance);

      SuiteReport rep{src.name() + " -> " + dst.name(), chart.base(), {}};
      auto fit = detail::from_report("pansu.differential", "d^{f(g)}(tilde delta_{1/t} f(delta_t v), L v) -> 0", d.report);
      fit.pass = d.differentiable();
      fit.note = "map " + f.name() + "; fitted order " + fmt(d.report.fitted_order) +
                 (d.uniform ? "" : "; max over probes does not follow the mean");
      rep.checks.push_back(fit);
      auto h = detail::single("pansu.homomorphism", "L(a*b) = L(a)*L(b) with degree blocks", hom.hom_residual, 0.0,
                              popt.hom_tolerance);
      h.pass = h.pass && hom.blocks_ok();
      rep.checks.push_back(h);
      for (const auto& it : eq.items) {
        auto ci = detail::from_report("pansu.item" + std::to_string(it.item), it.description, it.report);
        ci.pass = it.vanishing;
        ci.status = std::string(it.vanishing ? "VANISHING" : "NOT_VANISHING") + "/" + to_string(it.report.status);
        rep.checks.push_back(ci);
      }
      auto co = detail::single("pansu.equivalence", "items 1-5 agree", eq.consistent() ? 0.0 : 1.0, 0.0, 0.0);
      co.note = "fitted-order spread " + fmt(eq.order_spread());
      rep.checks.push_back(co);
      return emit(rep, c, [&](std::ostream& os) {
        os << "\ndifferential at " << fmt(chart.base()) << " -> " << fmt(d.image_base) << '\n';
        write_hom(os, d.L);
      });
    };
  });

  // chain
  std::string frame_mid, map_f, map_phi;
  double chain_tol = 1e-4;
  auto* chn_cmd = app.add_subcommand("chain", "D(phi o f)(g) against D phi(f(g)) D f(g)");
  chn_cmd->add_option("--frame-src", c.frame, "frame of the source")->capture_default_str();
  chn_cmd->add_option("--frame-mid", frame_mid, "frame between f and phi (default: source)");
  chn_cmd->add_option("--frame-dst", frame_dst, "frame of the target (default: middle)");
  chn_cmd->add_option("--map-f", map_f, "inner map f")->required();
  chn_cmd->add_option("--map-phi", map_phi, "outer map phi")->required();
  chn_cmd->add_option("--base", c.base, "base point g (default: origin)");
  chn_cmd->add_option("--ode-tolerance", c.ode_tolerance, "flow integration tolerance")->capture_default_str();
  chn_cmd->add_option("--tolerance", chain_tol, "composition tolerance")->capture_default_str();
  add_ladder(chn_cmd, c);
  add_output(chn_cmd, c);
  with_config(chn_cmd);
  chn_cmd->callback([&] {
    run = [&] {
      const Frame src = resolve_frame(c.frame);
      const Frame mid = frame_mid.empty() ? src : resolve_frame(frame_mid);
      const Frame dst = frame_dst.empty() ? mid : resolve_frame(frame_dst);
      const Chart chart(src, vector_of_dim(c.base, src.dim(), "--base"), chart_options(c));
      const PolyMap f = resolve_map(map_f, src.dim());
      const PolyMap phi = resolve_map(map_phi, mid.dim());
      popt.ladder = parse_ladder(c.ladder);
      popt.seed = c.seed;
      popt.tolerance = c.limit_tolerance;
      const auto r = chain_rule_check(chart, mid, dst, f, phi, popt, chain_tol);
      SuiteReport rep{src.name() + " -> " + mid.name() + " -> " + dst.name(), chart.base(), {}};
      auto chk = detail::single("chain.rule", "max |D(phi o f) - D phi D f|", r.residual, 0.0, chain_tol);
      rep.checks.push_back(chk);
      for (const auto* part : {&r.df, &r.dphi, &r.dcomposed}) {
        const std::string id = part == &r.df ? "chain.df" : part == &r.dphi ? "chain.dphi" : "chain.dcomposed";
        auto ci = detail::from_report(id, "Pansu residual ladder", part->report);
        ci.pass = part->differentiable();
        rep.checks.push_back(ci);
      }
      return emit(rep, c, [&](std::ostream& os) {
        os << "\nD f(g):\n";
        write_hom(os, r.df.L);
        os << "D phi(f(g)):\n";
        write_hom(os, r.dphi.L);
        os << "D (phi o f)(g):\n";
        write_hom(os, r.dcomposed.L);
      });
    };
  });

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (!args.empty()) {
      if (const auto path = config_path(args)) {
        CLI::App* sub = nullptr;
        for (auto* s : app.get_subcommands({}))
          if (s->get_name() == args.front()) sub = s;
        if (sub == nullptr) throw ConfigError("--config needs a subcommand first");
        merge_config(*sub, args, *path);
      }
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    c.seed = apply_env_seed(c.seed);
    return run();
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFail;
  }
}
