#include "lpest/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "lpest/bellman.hpp"
#include "lpest/csv.hpp"
#include "lpest/estimates.hpp"
#include "lpest/exact_examples.hpp"
#include "lpest/fd_solve.hpp"
#include "lpest/resolvent.hpp"
#include "lpest/sde.hpp"
#include "lpest/suite.hpp"

#ifndef LPEST_VERSION
#define LPEST_VERSION "0.0.0"
#endif

namespace lpest {

namespace {

using json = nlohmann::json;

enum class Kind { kNumber, kInteger, kBool, kString, kNumberList, kNumberOrAuto };

struct Param {
  std::string key;
  json value;
  Kind kind;
};

class Output {
 public:
  explicit Output(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    files_.push_back(name);
  }
  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

class Table {
 public:
  explicit Table(std::vector<std::string> header) : width_(header.size()) { line(header); }

  Table& row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::logic_error("CSV row width mismatch");
    line(cells);
    return *this;
  }
  std::string str() const { return body_.str(); }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) body_ << (i ? "," : "") << cells[i];
    body_ << '\n';
  }
  std::size_t width_;
  std::ostringstream body_;
};

std::string num(double v) { return csv_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string flag(bool b) { return b ? "1" : "0"; }

using RunFn = std::function<json(const ExperimentConfig&, Output&)>;

struct Experiment {
  std::string name;
  std::vector<std::string> aliases;
  std::string description;
  std::vector<Param> params;
  RunFn run;
};

// Parameter access on a resolved config.
double P(const ExperimentConfig& c, const char* k) { return c.params.at(k).get<double>(); }
std::size_t Pn(const ExperimentConfig& c, const char* k) {
  return static_cast<std::size_t>(std::llround(c.params.at(k).get<double>()));
}
bool Pb(const ExperimentConfig& c, const char* k) { return c.params.at(k).get<bool>(); }
std::string Ps(const ExperimentConfig& c, const char* k) { return c.params.at(k).get<std::string>(); }
std::vector<double> Pl(const ExperimentConfig& c, const char* k) {
  return c.params.at(k).get<std::vector<double>>();
}
std::optional<double> Pauto(const ExperimentConfig& c, const char* k) {
  const json& v = c.params.at(k);
  if (v.is_string()) return std::nullopt;
  return v.get<double>();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

const ScalarFn kZero = [](double, Vec2) { return 0.0; };

// ---------------------------------------------------------------------------
// Radial degenerate example

const Vec2 kShift{0.5, 0.0};

OperatorSpec radial_spec(double eps) { return {families::radial_degenerate(eps, kShift), 1.0 - eps, 0.0}; }
Domain radial_domain() { return Domain::ball(2, 1.5, kShift); }
ScalarFn source_disk(double r) {
  return [r](double, Vec2 x) { return norm(x - kShift) < r ? 1.0 : 0.0; };
}

json run_remark33(const ExperimentConfig& c, Output& out) {
  const double eps = P(c, "eps"), r = P(c, "r"), h = P(c, "h");
  json s;
  s["eps"] = eps;
  s["r"] = r;
  s["gamma"] = exact::gamma_of_eps(eps);
  s["closed_form"] = exact::exit_value_38(eps, r);
  s["profile_value"] = exact::radial_profile(eps, r, 0.5);
  // Cell-averaged source: a^{ij} D_ij u = -|cell and G| / |cell|.
  const auto grid = classify_boundary(radial_domain(), {2, 2, h, 0.0});
  const ScalarFn rhs = [r, h](double, Vec2 x) { return -clipped_cell_measure(2, x, h, kShift, r) / (h * h); };
  const Solution sol = solve_elliptic(radial_spec(eps), grid, rhs, kZero);
  const double fd = sol.u.nearest(0.0, {0.0, 0.0});
  s["fd_h"] = h;
  s["fd_value"] = fd;
  s["fd_rel_error"] = fd / s["closed_form"].get<double>() - 1.0;
  std::vector<std::string> head{"eps", "r", "gamma", "closed_form", "profile_value", "fd_h", "fd_value", "fd_rel_error"};
  std::vector<std::string> row{num(eps), num(r), num(s["gamma"].get<double>()), num(s["closed_form"].get<double>()),
                               num(s["profile_value"].get<double>()), num(h), num(fd),
                               num(s["fd_rel_error"].get<double>())};
  if (Pb(c, "mc")) {
    SimConfig cfg = config_from_operator(radial_spec(eps), radial_domain(), P(c, "dt"), Pn(c, "paths"), c.seed);
    cfg.start = Vec2{0.0, 0.0};
    cfg.threads = static_cast<int>(Pn(c, "threads"));
    cfg.functionals.push_back({"G", source_disk(r), 0.0});
    const PathEnsemble e = simulate_paths(cfg);
    const OccupationEstimate est = occupation_functional(e, "G");
    const double z = (est.mean - s["closed_form"].get<double>()) / est.std_error;
    s["mc_paths"] = est.n;
    s["mc_dt"] = P(c, "dt");
    s["mc_mean"] = est.mean;
    s["mc_std_error"] = est.std_error;
    s["mc_z"] = z;
    s["mc_capped"] = e.n_capped;
    for (const char* k : {"mc_paths", "mc_dt", "mc_mean", "mc_std_error", "mc_z", "mc_capped"}) head.emplace_back(k);
    for (const std::string& v :
         {num(est.n), num(P(c, "dt")), num(est.mean), num(est.std_error), num(z), num(e.n_capped)})
      row.push_back(v);
  }
  out.write("remark33_exit.csv", Table(head).row(row).str());
  return s;
}

json run_occupation_bound(const ExperimentConfig& c, Output& out) {
  const double eps = P(c, "eps");
  const double gamma = Pauto(c, "gamma").value_or(exact::gamma_of_eps(eps));
  const double gamma_large = P(c, "gamma_large");
  std::vector<double> radii = Pl(c, "r_list");
  if (radii.empty()) throw ValidationError("r_list is empty");
  std::sort(radii.begin(), radii.end());
  SimConfig cfg = config_from_operator(radial_spec(eps), radial_domain(), P(c, "dt"), Pn(c, "paths"), c.seed);
  cfg.start = Vec2{0.0, 0.0};
  cfg.threads = static_cast<int>(Pn(c, "threads"));
  for (double r : radii) cfg.functionals.push_back({"G_" + num(r), source_disk(r), 0.0});
  const PathEnsemble e = simulate_paths(cfg);
  const QuadratureSpec quad{P(c, "quad_h"), 0.0};

  Table t({"r", "closed_form", "mc_mean", "mc_std_error", "z", "lhs_gamma", "fitted_N_gamma", "fitted_N_gamma_stderr",
           "lhs_gamma_large", "fitted_N_gamma_large", "fitted_N_gamma_large_stderr", "inconclusive"});
  std::vector<double> n_small, n_large;
  json rows = json::array();
  bool inconclusive = false;
  for (double r : radii) {
    const OccupationEstimate est = occupation_functional(e, "G_" + num(r));
    const BoundReport a = check_occupation_bound(source_disk(r), est, gamma, radial_domain(), quad);
    const BoundReport b = check_occupation_bound(source_disk(r), est, gamma_large, radial_domain(), quad);
    const double closed = exact::exit_value_38(eps, r);
    const double z = (est.mean - closed) / est.std_error;
    inconclusive = inconclusive || a.inconclusive;
    n_small.push_back(a.fitted_N);
    n_large.push_back(b.fitted_N);
    t.row({num(r), num(closed), num(est.mean), num(est.std_error), num(z), num(a.lhs), num(a.fitted_N),
           num(a.fitted_N_stderr), num(b.lhs), num(b.fitted_N), num(b.fitted_N_stderr), flag(a.inconclusive)});
    rows.push_back({{"r", r},
                    {"z", z},
                    {"fitted_N_gamma", a.fitted_N},
                    {"fitted_N_gamma_stderr", a.fitted_N_stderr},
                    {"fitted_N_gamma_large", b.fitted_N}});
  }
  out.write("occupation_bound.csv", t.str());
  const auto [lo, hi] = std::minmax_element(n_small.begin(), n_small.end());
  bool monotone = true;
  for (std::size_t i = 1; i < n_large.size(); ++i) monotone = monotone && n_large[i] < n_large[i - 1];
  json s{{"eps", eps},
         {"gamma", gamma},
         {"gamma_large", gamma_large},
         {"paths", e.paths.size()},
         {"dt", P(c, "dt")},
         {"capped", e.n_capped},
         {"spread_gamma", *hi / *lo - 1.0},
         {"growth_gamma_large", n_large.front() / n_large.back()},
         {"monotone_gamma_large", monotone},
         {"inconclusive", inconclusive},
         {"rows", rows}};

  if (const std::size_t suite_paths = Pn(c, "suite_paths"); suite_paths > 0) {
    Table st({"case", "gamma", "dt", "fitted_N", "fitted_N_stderr", "fitted_N_half_dt", "fitted_N_half_dt_stderr", "z"});
    double zmax = 0.0;
    for (const auto& sc : locked_suite()) {
      const auto row = occupation_stability(sc, P(c, "suite_gamma"), 0.0, suite_paths, c.seed, cfg.threads);
      zmax = std::max(zmax, row.z);
      st.row({sc.name, num(row.gamma), num(sc.mc_dt), num(row.coarse.fitted_N), num(row.coarse.fitted_N_stderr),
              num(row.fine.fitted_N), num(row.fine.fitted_N_stderr), num(row.z)});
    }
    out.write("occupation_suite.csv", st.str());
    s["suite_max_z"] = zmax;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Plain occupation runs

Domain parse_domain(const std::string& spec, Domain fallback) {
  if (spec.empty()) return fallback;
  const auto parts = [&] {
    std::vector<std::string> v;
    std::stringstream ss(spec);
    std::string p;
    while (std::getline(ss, p, ':')) v.push_back(p);
    return v;
  }();
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("bad number in domain spec: " + spec);
    }
  };
  if (parts.size() == 2 && parts[0] == "ball")
    return Domain::ball(fallback.dim(), number(parts[1]), fallback.center());
  if (parts.size() == 3 && parts[0] == "cylinder")
    return Domain::cylinder(fallback.dim(), number(parts[1]), number(parts[2]), fallback.t0(), fallback.center());
  throw ValidationError("domain must be ball:<r> or cylinder:<height>:<r>, got " + spec);
}

json run_occupation(const ExperimentConfig& c, Output& out) {
  const std::string example = Ps(c, "example");
  const int dim = static_cast<int>(Pn(c, "dim"));
  if (dim != 1 && dim != 2) throw ValidationError("dim must be 1 or 2");
  OperatorSpec spec{families::laplacian(dim), 1.0, 0.0};
  Domain domain = Domain::ball(dim, 1.0);
  ScalarFn f = [](double, Vec2) { return 1.0; };
  std::optional<Vec2> start;
  std::optional<double> exact_value;
  if (example == "ball") {
    domain = parse_domain(Ps(c, "domain"), domain);
    if (domain.is_cylinder()) throw ValidationError("example ball needs a ball domain");
    exact_value = domain.radius() * domain.radius() / (2.0 * dim);
  } else if (example == "cylinder") {
    domain = parse_domain(Ps(c, "domain"), Domain::cylinder(dim, 2.0, 1.0));
    if (!domain.is_cylinder()) throw ValidationError("example cylinder needs a cylinder domain");
    const double tmid = domain.t0() + 0.5 * domain.height();
    f = [tmid](double t, Vec2) { return t > tmid ? 1.0 : 0.0; };
  } else if (example == "remark33") {
    if (!Ps(c, "domain").empty()) throw ValidationError("example remark33 has a fixed domain");
    spec = radial_spec(P(c, "eps"));
    domain = radial_domain();
    f = source_disk(P(c, "r"));
    start = Vec2{0.0, 0.0};
    exact_value = exact::exit_value_38(P(c, "eps"), P(c, "r"));
  } else {
    throw ValidationError("example must be remark33, ball or cylinder");
  }
  SimConfig cfg = config_from_operator(spec, domain, P(c, "dt"), Pn(c, "paths"), c.seed);
  cfg.start = start;
  cfg.threads = static_cast<int>(Pn(c, "threads"));
  const std::string rule = Ps(c, "exit_rule");
  if (rule == "discrete") cfg.exit_rule = ExitRule::kDiscrete;
  else if (rule != "bridge") throw ValidationError("exit_rule must be bridge or discrete");
  cfg.functionals.push_back({"f", f, 0.0});
  const PathEnsemble e = simulate_paths(cfg);
  const OccupationEstimate occ = occupation_functional(e, "f");
  const OccupationEstimate tau = exit_time_estimate(e);
  json s{{"example", example},
         {"occupation", json::parse(to_json(occ))},
         {"exit_time", json::parse(to_json(tau))},
         {"capped", e.n_capped}};
  if (exact_value) {
    s["exact"] = *exact_value;
    s["z"] = (occ.mean - *exact_value) / occ.std_error;
  }
  out.write("occupation.json", s.dump(2) + "\n");
  if (Pb(c, "paths_csv")) {
    std::ostringstream o;
    write_paths_csv(o, e);
    out.write("paths.csv", o.str());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Deterministic inequality suite

std::vector<SuiteCase> selected_cases(const ExperimentConfig& c) {
  const std::string sel = Ps(c, "cases");
  if (sel == "all") return locked_suite();
  std::vector<SuiteCase> out;
  for (const auto& name : split_list(sel)) out.push_back(suite_case(name));
  if (out.empty()) throw ValidationError("no suite cases selected");
  return out;
}

json run_bound_suite(const ExperimentConfig& c, Output& out, BoundKind kind) {
  const std::optional<double> gamma = Pauto(c, "gamma");
  const std::string label = kind == BoundKind::kHessian ? "hessian" : "gradient";
  Table t({"case", "h", "gamma", "lhs", "Lu_term", "sup_term", "fitted_N", "fitted_N_half_h", "change"});
  double worst = 0.0;
  json rows = json::array();
  for (const auto& sc : selected_cases(c)) {
    const StabilityRow r = hessian_stability(sc, kind, gamma);
    worst = std::max(worst, r.change);
    t.row({sc.name, num(r.h), num(r.coarse.gamma_used), num(r.coarse.lhs), num(r.coarse.rhs_terms.at(0).second),
           num(r.coarse.rhs_terms.at(1).second), num(r.coarse.fitted_N), num(r.fine.fitted_N), num(r.change)});
    rows.push_back({{"case", sc.name}, {"fitted_N", r.coarse.fitted_N}, {"change", r.change}});
  }
  out.write(label + "_gamma.csv", t.str());
  return {{"bound", label}, {"max_change", worst}, {"stable", worst < 0.1}, {"rows", rows}};
}

// ---------------------------------------------------------------------------
// Identity L(-u^2) = -2u Lu - c u^2 - 2 a Du.Du on discrete fields

// exact: u^2 is quadratic, so every discrete derivative in the identity is exact.
struct TestField {
  std::string name;
  ScalarFn u;
  bool exact;
};

std::vector<TestField> identity_fields() {
  return {{"x1", [](double, Vec2 x) { return x.x; }, true},
          {"x1+x2", [](double, Vec2 x) { return x.x + x.y; }, true},
          {"x1^2", [](double, Vec2 x) { return x.x * x.x; }, false},
          {"smooth", [](double, Vec2 x) { return std::sin(2.0 * x.x) * std::cos(x.y) + std::exp(0.5 * x.x * x.y); },
           false}};
}

json run_identity(const ExperimentConfig& c, Output& out) {
  std::vector<double> levels = c.levels;
  if (levels.empty()) levels = {1.0 / 16, 1.0 / 32, 1.0 / 64};
  const std::string op = Ps(c, "operator");
  OperatorSpec spec{families::laplacian(2), 1.0, 0.0};
  if (op == "smooth") spec = suite_case("smooth-ball-2d").spec;
  else if (op != "laplacian") throw ValidationError("operator must be laplacian or smooth");
  const std::string sel = Ps(c, "u");
  Table t({"u", "h", "residual", "observed_order"});
  double exact_max = 0.0, smooth_min_order = INFINITY;
  for (const auto& field : identity_fields()) {
    if (sel != "all" && sel != field.name) continue;
    double prev = 0.0, prev_h = 0.0;
    for (double h : levels) {
      const auto grid = classify_boundary(Domain::ball(2, 1.0), {2, 2, h, 0.0});
      const double res = verify_identity_22(GridFunction::sample(grid, field.u), spec);
      std::string order;
      if (prev_h > 0.0 && prev > 0.0 && res > 0.0) {
        const double p = std::log(prev / res) / std::log(prev_h / h);
        order = num(p);
        if (!field.exact) smooth_min_order = std::min(smooth_min_order, p);
      }
      if (field.exact) exact_max = std::max(exact_max, res);
      t.row({field.name, num(h), num(res), order});
      prev = res;
      prev_h = h;
    }
  }
  out.write("identity_22.csv", t.str());
  json s{{"operator", op}, {"exact_max_residual", exact_max}};
  if (std::isfinite(smooth_min_order)) s["smooth_min_order"] = smooth_min_order;
  return s;
}

// ---------------------------------------------------------------------------
// Bellman comparison

ScalarFn bellman_forcing(const std::string& name) {
  if (name == "one") return [](double, Vec2) { return 1.0; };
  if (name == "upper-half") return [](double t, Vec2 x) { return t > 1.0 ? 1.0 + x.x * x.x : 0.0; };
  throw ValidationError("forcing must be one or upper-half");
}

json run_bellman(const ExperimentConfig& c, Output& out) {
  const double delta = P(c, "delta"), K = P(c, "K"), h = P(c, "h");
  const Domain cyl = Domain::cylinder(1, 2.0, 1.0);
  const ScalarFn f = bellman_forcing(Ps(c, "forcing"));
  BellmanProblem prob{delta, K, f, {1, 1, h, h}};
  const BellmanSolution sol = solve_bellman_1d(prob, cyl);
  double umin = INFINITY;
  for (double v : sol.u.values()) umin = std::min(umin, v);

  // Degenerate control set against the linear solver.
  const BellmanSolution deg = solve_bellman_1d({1.0, 0.0, f, {1, 1, h, h}}, cyl);
  SolverOptions upwind;
  upwind.drift = DriftScheme::kUpwind;
  const Solution lin = solve_parabolic({families::laplacian(1), 1.0, 0.0}, deg.u.grid_ptr(),
                                       [&f](double t, Vec2 x) { return -f(t, x); }, kZero, upwind);
  double deg_diff = 0.0;
  for (std::size_t i = 0; i < lin.u.values().size(); ++i)
    deg_diff = std::max(deg_diff, std::abs(lin.u.values()[i] - deg.u.values()[i]));

  Table t({"spec", "margin", "tolerance", "holds", "u_linear_origin", "worst_t", "worst_x"});
  std::vector<std::pair<std::string, OperatorSpec>> specs;
  CoefficientField unit = families::laplacian(1);
  specs.emplace_back("a=1,b=0", OperatorSpec{unit, delta, K});
  CoefficientField low = families::laplacian(1);
  low.a = [delta](double, Vec2) { return SymMat2{delta, 0.0, 0.0}; };
  specs.emplace_back("a=delta,b=0", OperatorSpec{low, delta, K});
  const auto random = random_admissible_specs(delta, K, static_cast<int>(Pn(c, "specs")), c.seed);
  for (std::size_t i = 0; i < random.size(); ++i) specs.emplace_back("random-" + std::to_string(i), random[i]);
  bool all = true;
  double min_margin = INFINITY;
  for (const auto& [name, spec] : specs) {
    const SuboptimalityReport r = check_suboptimality(sol, spec, f);
    all = all && r.holds;
    min_margin = std::min(min_margin, r.margin);
    t.row({name, num(r.margin), num(r.tolerance), flag(r.holds), num(r.u_linear_origin), num(r.worst_t),
           num(r.worst_x)});
  }
  out.write("bellman_compare.csv", t.str());
  json s{{"delta", delta},
         {"K", K},
         {"h", h},
         {"u_bellman_origin", sol.u.nearest(0.0, {0.0, 0.0})},
         {"min_value", umin},
         {"nonnegative", umin >= 0.0},
         {"max_sweeps", sol.max_sweeps},
         {"all_hold", all},
         {"min_margin", min_margin},
         {"specs", specs.size()},
         {"degenerate_max_diff", deg_diff}};
  if (const std::size_t paths = Pn(c, "mc_paths"); paths > 0) {
    const SuboptimalityReport r = check_suboptimality(sol, specs.front().second, f, P(c, "mc_dt"), paths, c.seed);
    s["mc_mean"] = r.mc->mean;
    s["mc_std_error"] = r.mc->std_error;
    s["mc_holds"] = r.mc_holds;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Resolvent dichotomy

json run_dichotomy(const ExperimentConfig& c, Output& out) {
  const double M = P(c, "M"), p = P(c, "p");
  const std::string branch = Ps(c, "branch");
  const bool refine = Pb(c, "refine");
  const std::vector<double> mus = Pl(c, "mu_grid");
  DichotomyReport rep;
  bool closed_form = false;
  if (branch == "elliptic") {
    const double K = Pauto(c, "K").value_or(1.0);
    OperatorSpec spec{families::sign_drift(M), 1.0, K, OperatorClass::kTraceBounded};
    const DiscretizationFn disc = [M](double mu, int level) {
      const auto d = suggest_discretization(mu, M, level);
      return std::make_pair(classify_boundary(Domain::ball(1, d.radius), GridSpec{1, 1, d.h, 0.0}), d.width);
    };
    rep = check_dichotomy(spec, M, p, mus, disc, refine);
    closed_form = p == 1.0;
  } else if (branch == "parabolic") {
    // tr a + 1 <= K for the parabolic class; truncation capped for desk-scale grids.
    const double K = Pauto(c, "K").value_or(2.0);
    OperatorSpec spec{families::sign_drift(M), 1.0, K, OperatorClass::kTraceBounded};
    const DiscretizationFn disc = [M](double mu, int level) {
      const double nu = exact::nu_56(M, mu);
      const double scale = M > 0.0 ? std::min(1.0 / nu, 1.0 / M) : 1.0 / nu;
      const double h = std::min(0.02, 0.1 * scale) / std::pow(2.0, level);
      const double R = h * std::ceil(std::min(5.0 / nu, 10.0) / h);
      const double T = h * std::ceil(std::min(5.0 / mu, 5.0) / h);
      return std::make_pair(classify_boundary(Domain::cylinder(1, T, R), GridSpec{1, 1, h, h}), 4.0 * h);
    };
    rep = check_dichotomy(spec, M, p, mus, disc, refine);
  } else {
    throw ValidationError("branch must be elliptic or parabolic");
  }
  std::vector<std::string> head{"mu", "norm_u", "norm_f", "mu_ratio", "mu2_ratio", "n_hat", "refined_n_hat", "member"};
  if (closed_form) {
    head.emplace_back("closed_form");
    head.emplace_back("rel_error");
  }
  Table t(head);
  double worst_rel = 0.0;
  for (const auto& r : rep.rows) {
    std::vector<std::string> row{num(r.mu),    num(r.norm_u), num(r.norm_f),        num(r.mu_ratio),
                                 num(r.mu2_ratio), num(r.ratio), num(r.refined_ratio), r.member};
    if (closed_form) {
      const double exact = exact::resolvent_l1_norm_56(M, r.mu);
      const double rel = r.ratio / exact - 1.0;
      worst_rel = std::max(worst_rel, std::abs(rel));
      if (r.refined_ratio > 0.0) worst_rel = std::max(worst_rel, std::abs(r.refined_ratio / exact - 1.0));
      row.push_back(num(exact));
      row.push_back(num(rel));
    }
    t.row(row);
  }
  out.write("dichotomy.csv", t.str());
  json s = json::parse(to_json(rep));
  s["branch"] = branch;
  if (closed_form) s["max_rel_error"] = worst_rel;
  out.write("dichotomy.json", s.dump(2) + "\n");
  return s;
}

// ---------------------------------------------------------------------------
// mu_theta, nu_theta and lambda(mu)

json run_mu_theta(const ExperimentConfig& c, Output& out) {
  const std::string branch_name = Ps(c, "branch"), field = Ps(c, "field");
  const Branch branch = branch_name == "parabolic" ? Branch::kParabolic
                        : branch_name == "elliptic" ? Branch::kElliptic
                                                    : throw ValidationError("branch must be elliptic or parabolic");
  const double A = P(c, "amplitude"), alpha = P(c, "alpha"), h = P(c, "h"), cut = P(c, "cut"), K = P(c, "K");
  const double q = branch == Branch::kParabolic ? 2.0 : 1.0;  // d + 1 or d, d = 1
  VectorFn b;
  Domain dom = Domain::ball(1, 1.0);
  if (field == "cube") {
    dom = branch == Branch::kParabolic ? Domain::cylinder(1, 1.0, 0.5) : Domain::ball(1, 0.5);
    b = [A](double, Vec2) { return Vec2{A, 0.0}; };
  } else if (field == "singular") {
    if (!(alpha >= 0.0 && alpha * q < 1.0)) throw ValidationError("alpha must satisfy 0 <= alpha < 1/q");
    dom = branch == Branch::kParabolic ? Domain::cylinder(1, 1.0, 1.0) : Domain::ball(1, 1.0);
    // Regularized at |x| = 1e-3 so the node at the origin stays finite.
    b = [A, alpha](double, Vec2 x) { return Vec2{A * std::pow(std::max(std::abs(x.x), 1e-3), -alpha), 0.0}; };
  } else {
    throw ValidationError("field must be cube or singular");
  }
  const auto grid = classify_boundary(dom, {1, 1, h, dom.is_cylinder() ? h : 0.0});
  const DriftSamples samples = sample_drift(b, *grid);
  const DriftSamples b2 = sample_drift(split_drift(b, cut).second, *grid);

  const std::vector<double> thetas = Pl(c, "theta_list"), lambdas = Pl(c, "lambda_list");
  Table t({"theta", "lambda", "target", "mu_theta", "excess_at_mu_theta", "nu_theta"});
  bool mono_lambda = true, mono_theta = true;
  std::vector<double> prev_theta_row;
  for (double th : thetas) {
    double prev = -INFINITY;
    std::vector<double> row_vals;
    const double nu = nu_theta(b2, th);
    for (double lam : lambdas) {
      const double m = mu_theta(samples, th, lam, q, branch);
      const double target = branch == Branch::kParabolic ? th * std::pow(lam, -0.25) : th;
      if (m < prev) mono_lambda = false;
      prev = m;
      row_vals.push_back(m);
      t.row({num(th), num(lam), num(target), num(m), num(excess_norm(samples, m, q)), num(nu)});
    }
    if (!prev_theta_row.empty())
      for (std::size_t i = 0; i < row_vals.size(); ++i)
        if (row_vals[i] > prev_theta_row[i]) mono_theta = false;
    prev_theta_row = row_vals;
  }
  out.write("mu_theta.csv", t.str());

  const double th = thetas.empty() ? 1.0 : thetas.front();
  const double nu = nu_theta(b2, th);
  const double cK = K + nu + 1.0;
  Table l({"mu", "lambda", "lambda_bounding", "lower_bound", "bound_holds", "dominates"});
  bool bounds = true;
  for (double mu : Pl(c, "mu_list")) {
    const double lam = lambda_of_mu(K, [&](double x) { return mu_theta(samples, th, x, q, branch); }, mu);
    // Admissible majorant nu sqrt(lambda) + M with M = cut = sup |b1|.
    const double lam45 = lambda_of_mu(K, [&](double x) { return nu * std::sqrt(x) + cut; }, mu);
    const double bound = mu >= cK * cut * cut ? mu / cK : mu * mu / (cK * cK * cut * cut);
    const bool holds = lam45 >= bound * (1.0 - 1e-12);
    const bool dominates = branch == Branch::kElliptic || lam >= lam45 * (1.0 - 1e-9);
    bounds = bounds && holds && dominates;
    l.row({num(mu), num(lam), num(lam45), num(bound), flag(holds), flag(dominates)});
  }
  out.write("lambda_of_mu.csv", l.str());
  return {{"branch", branch_name},   {"field", field},     {"monotone_in_lambda", mono_lambda},
          {"monotone_in_theta", mono_theta}, {"nu_theta", nu}, {"bounds_hold", bounds}};
}

// ---------------------------------------------------------------------------
// Distribution tails

std::vector<double> geometric(double lo, double hi, int n) {
  if (!(lo > 0.0 && hi > lo) || n < 2) throw ValidationError("need 0 < lambda_min < lambda_max and >= 2 levels");
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return v;
}

json run_tail(const ExperimentConfig& c, Output& out) {
  const std::string field = Ps(c, "field");
  const int n = static_cast<int>(Pn(c, "n_levels"));
  const double gp = P(c, "gamma_prime");
  std::vector<double> values, weights;
  std::vector<unsigned char> mask;
  std::vector<double> lambdas;
  double total = 0.0, u00 = 0.0;
  std::optional<double> exact_quasi;
  bool inverse = false;
  if (field == "inverse-radius") {
    inverse = true;
    const double h = P(c, "h");
    const auto grid = classify_boundary(Domain::ball(2, 1.0), {2, 2, h, 0.0});
    weights = region_weights(*grid, grid->domain());
    for (int s = 0; s < grid->space_size(); ++s) values.push_back(1.0 / std::max(norm(grid->coord(s)), 0.5 * h));
    lambdas = geometric(P(c, "lambda_min"), P(c, "lambda_max"), n);
    exact_quasi = 2.0 * std::numbers::pi / (2.0 - gp);
  } else if (field == "hessian") {
    const SuiteCase& sc = suite_case(Ps(c, "case"));
    const GridFunction u = solve_case(sc, 0);
    const Grid& g = u.grid();
    const Derivatives d = discrete_derivatives(u);
    weights = region_weights(g, sc.inner);
    values.resize(g.size());
    mask.assign(g.size(), 0);
    for (int l = 0; l < g.levels(); ++l)
      for (int s = 0; s < g.space_size(); ++s) {
        const std::size_t i = g.flat(l, s);
        values[i] = frobenius(d.hess[i], g.dim());
        mask[i] = d.available[i] && g.space_interior(s) && (!g.domain().is_cylinder() || l + 1 < g.levels());
      }
    std::vector<double> sel;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (mask[i] && weights[i] > 0.0) sel.push_back(values[i]);
    if (sel.empty()) throw NumericalError("no Hessian values on the inner domain");
    std::sort(sel.begin(), sel.end());
    const double med = std::max(sel[sel.size() / 2], 1e-12), mx = sel.back();
    if (!(mx > med)) throw NumericalError("Hessian field has a degenerate tail");
    lambdas = geometric(med, mx, n);
    u00 = u.nearest(sc.outer.is_cylinder() ? sc.outer.t0() : 0.0, sc.outer.center());
  } else {
    throw ValidationError("field must be inverse-radius or hessian");
  }
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (mask.empty() || mask[i]) total += weights[i];
  TailData data = distribution_function(values, weights, lambdas, mask);
  data.u00 = u00;
  const TailFit fit = fit_tail_exponent(data);
  std::vector<std::string> head{"lambda", "F"};
  if (inverse) head.emplace_back("exact_F");
  Table t(head);
  for (std::size_t i = 0; i < data.lambda.size(); ++i) {
    std::vector<std::string> row{num(data.lambda[i]), num(data.F[i])};
    if (inverse) row.push_back(num(std::numbers::pi / (data.lambda[i] * data.lambda[i])));
    t.row(row);
  }
  out.write("tail.csv", t.str());
  out.write("tail.json", to_json(data) + "\n");
  const double direct = std::pow(lp_norm(values, weights, gp, mask), gp);
  json s{{"field", field},
         {"gamma_hat", fit.gamma_hat},
         {"constant", fit.constant},
         {"samples", fit.samples},
         {"u00", u00},
         {"gamma_prime", gp},
         {"direct_quasinorm", direct}};
  if (gp < fit.gamma_hat) s["layer_cake_quasinorm"] = layer_cake_quasinorm(data, gp, total);
  if (exact_quasi) s["exact_quasinorm"] = *exact_quasi;
  return s;
}

// ---------------------------------------------------------------------------
// Closed-form tables

json run_exact_table(const ExperimentConfig& c, Output& out) {
  Table a({"eps", "r", "gamma", "u0", "profile_u0", "constant"});
  for (double eps : Pl(c, "eps_list"))
    for (double r : Pl(c, "r_list"))
      a.row({num(eps), num(r), num(exact::gamma_of_eps(eps)), num(exact::exit_value_38(eps, r)),
             num(exact::radial_profile(eps, r, 0.5)), num(exact::exit_value_constant(eps))});
  out.write("exact_radial.csv", a.str());
  Table b({"M", "mu", "nu", "inv_nu2", "mu_times_norm", "mu2_times_norm"});
  for (double M : Pl(c, "M_list"))
    for (double mu : Pl(c, "mu_list")) {
      const double n = exact::resolvent_l1_norm_56(M, mu);
      b.row({num(M), num(mu), num(exact::nu_56(M, mu)), num(n), num(mu * n), num(mu * mu * n)});
    }
  out.write("exact_sign_drift.csv", b.str());
  return {{"tables", 2}};
}

json run_sweep(const ExperimentConfig& c, Output& out) {
  const SweepTable t = convergence_sweep(c, c.levels);
  const bool mc = !t.std_errors.empty();
  std::vector<std::string> head{"level", "value"};
  head.emplace_back(mc ? "std_error" : "error");
  head.emplace_back(mc ? "consistent_with_next" : "observed_order");
  Table tab(head);
  for (std::size_t i = 0; i < t.levels.size(); ++i) {
    std::string last;
    if (i + 1 < t.levels.size()) last = mc ? flag(t.consistent[i]) : num(t.observed_order[i]);
    tab.row({num(t.levels[i]), num(t.values[i]), num(mc ? t.std_errors[i] : t.errors[i]), last});
  }
  out.write("sweep.csv", tab.str());
  json s{{"quantity", t.quantity}, {"converged", t.converged}};
  if (!mc) s["observed_order"] = t.observed_order;
  return s;
}

// ---------------------------------------------------------------------------

const std::vector<Experiment>& registry() {
  static const std::vector<Experiment> r = [] {
    std::vector<Experiment> v;
    v.push_back({"remark33-exit",
                 {},
                 "degenerate radial example: closed form, 2-D solve and Monte Carlo occupation of G",
                 {{"eps", 0.5, Kind::kNumber},
                  {"r", 0.25, Kind::kNumber},
                  {"h", 1.0 / 128, Kind::kNumber},
                  {"mc", true, Kind::kBool},
                  {"paths", 100000, Kind::kInteger},
                  {"dt", 1e-4, Kind::kNumber},
                  {"threads", 0, Kind::kInteger}},
                 run_remark33});
    v.push_back({"occupation-bound",
                 {},
                 "fitted N of the occupation bound across source radii at gamma(eps) and a large gamma",
                 {{"eps", 0.5, Kind::kNumber},
                  {"r_list", json::array({0.125, 0.25, 0.375}), Kind::kNumberList},
                  {"gamma", "auto", Kind::kNumberOrAuto},
                  {"gamma_large", 0.95, Kind::kNumber},
                  {"paths", 100000, Kind::kInteger},
                  {"dt", 1e-4, Kind::kNumber},
                  {"quad_h", 1.0 / 256, Kind::kNumber},
                  {"suite_paths", 0, Kind::kInteger},
                  {"suite_gamma", 0.5, Kind::kNumber},
                  {"threads", 0, Kind::kInteger}},
                 run_occupation_bound});
    v.push_back({"occupation",
                 {"sde"},
                 "Monte Carlo occupation estimate for the ball, cylinder or degenerate radial example",
                 {{"example", "ball", Kind::kString},
                  {"dim", 2, Kind::kInteger},
                  {"domain", "", Kind::kString},
                  {"eps", 0.5, Kind::kNumber},
                  {"r", 0.25, Kind::kNumber},
                  {"paths", 10000, Kind::kInteger},
                  {"dt", 1e-3, Kind::kNumber},
                  {"exit_rule", "bridge", Kind::kString},
                  {"paths_csv", false, Kind::kBool},
                  {"threads", 0, Kind::kInteger}},
                 run_occupation});
    v.push_back({"hessian-gamma",
                 {"hessian"},
                 "Hessian quasi-norm bound on the locked suite under one grid halving",
                 {{"gamma", 0.5, Kind::kNumberOrAuto}, {"cases", "all", Kind::kString}},
                 [](const ExperimentConfig& c, Output& o) { return run_bound_suite(c, o, BoundKind::kHessian); }});
    v.push_back({"gradient-gamma",
                 {"gradient"},
                 "gradient quasi-norm bound on the locked suite under one grid halving",
                 {{"gamma", 0.5, Kind::kNumberOrAuto}, {"cases", "all", Kind::kString}},
                 [](const ExperimentConfig& c, Output& o) { return run_bound_suite(c, o, BoundKind::kGradient); }});
    v.push_back({"identity-22",
                 {"identity"},
                 "discrete residual of L(-u^2) = -2u Lu - c u^2 - 2 a Du.Du across grid levels",
                 {{"u", "all", Kind::kString}, {"operator", "laplacian", Kind::kString}},
                 run_identity});
    v.push_back({"bellman-compare",
                 {"bellman"},
                 "1-D Bellman solution against admissible linear operators",
                 {{"delta", 0.5, Kind::kNumber},
                  {"K", 1.0, Kind::kNumber},
                  {"h", 1.0 / 32, Kind::kNumber},
                  {"specs", 20, Kind::kInteger},
                  {"forcing", "upper-half", Kind::kString},
                  {"mc_paths", 0, Kind::kInteger},
                  {"mc_dt", 1e-3, Kind::kNumber}},
                 run_bellman});
    v.push_back({"dichotomy-56",
                 {"dichotomy"},
                 "resolvent norm of the sign-drift operator across mu",
                 {{"M", 3.0, Kind::kNumber},
                  {"mu_grid", json::array({0.01, 0.25, 1.0, 4.0, 16.0, 100.0}), Kind::kNumberList},
                  {"p", 1.0, Kind::kNumber},
                  {"branch", "elliptic", Kind::kString},
                  {"K", "auto", Kind::kNumberOrAuto},
                  {"refine", true, Kind::kBool}},
                 run_dichotomy});
    v.push_back({"mu-theta-table",
                 {"mu-theta"},
                 "mu_theta over (theta, lambda), nu_theta and the root lambda(mu)",
                 {{"branch", "parabolic", Kind::kString},
                  {"field", "singular", Kind::kString},
                  {"amplitude", 2.0, Kind::kNumber},
                  {"alpha", 0.3, Kind::kNumber},
                  {"h", 1.0 / 64, Kind::kNumber},
                  {"cut", 1.0, Kind::kNumber},
                  {"K", 1.0, Kind::kNumber},
                  {"theta_list", json::array({0.25, 0.5, 1.0, 2.0}), Kind::kNumberList},
                  {"lambda_list", json::array({0.01, 0.1, 1.0, 10.0, 100.0}), Kind::kNumberList},
                  {"mu_list", json::array({1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e3}), Kind::kNumberList}},
                 run_mu_theta});
    v.push_back({"tail-exponent",
                 {"tail"},
                 "distribution function, fitted tail exponent and layer-cake quasi-norm",
                 {{"field", "inverse-radius", Kind::kString},
                  {"case", "checkerboard-ball-2d", Kind::kString},
                  {"h", 1.0 / 256, Kind::kNumber},
                  {"n_levels", 24, Kind::kInteger},
                  {"lambda_min", 1.0, Kind::kNumber},
                  {"lambda_max", 20.0, Kind::kNumber},
                  {"gamma_prime", 0.5, Kind::kNumber}},
                 run_tail});
    v.push_back({"exact-table",
                 {"exact-examples"},
                 "closed-form values of the radial and sign-drift examples",
                 {{"eps_list", json::array({0.1, 0.25, 0.5, 0.75, 0.9}), Kind::kNumberList},
                  {"r_list", json::array({0.125, 0.25, 0.375}), Kind::kNumberList},
                  {"M_list", json::array({0.0, 1.0, 3.0}), Kind::kNumberList},
                  {"mu_list", json::array({0.01, 0.25, 1.0, 4.0, 16.0, 100.0}), Kind::kNumberList}},
                 run_exact_table});
    v.push_back({"convergence-sweep",
                 {"sweep"},
                 "per-level values and observed order for a manufactured solution or a Monte Carlo dt sweep",
                 {{"quantity", "manufactured-elliptic", Kind::kString}, {"paths", 20000, Kind::kInteger}},
                 run_sweep});
    return v;
  }();
  return r;
}

const Experiment& find(std::string_view name) {
  for (const auto& e : registry()) {
    if (e.name == name) return e;
    for (const auto& a : e.aliases)
      if (a == name) return e;
  }
  throw ValidationError("unknown experiment: " + std::string(name));
}

bool matches(const json& v, Kind kind) {
  switch (kind) {
    case Kind::kNumber:
      return v.is_number();
    case Kind::kInteger:
      return v.is_number() && v.get<double>() >= 0.0 && std::floor(v.get<double>()) == v.get<double>();
    case Kind::kBool:
      return v.is_boolean();
    case Kind::kString:
      return v.is_string();
    case Kind::kNumberList:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); });
    case Kind::kNumberOrAuto:
      return v.is_number() || (v.is_string() && v.get<std::string>() == "auto");
  }
  return false;
}

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::kNumber: return "a number";
    case Kind::kInteger: return "a nonnegative integer";
    case Kind::kBool: return "a boolean";
    case Kind::kString: return "a string";
    case Kind::kNumberList: return "a list of numbers";
    case Kind::kNumberOrAuto: return "a number or \"auto\"";
  }
  return "?";
}

}  // namespace

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const auto& e : registry()) out.push_back(e.name);
  return out;
}

std::string canonical_experiment(std::string_view name) { return find(name).name; }

std::string experiment_description(std::string_view name) { return find(name).description; }

nlohmann::json default_params(std::string_view experiment) {
  json j = json::object();
  for (const auto& p : find(experiment).params) j[p.key] = p.value;
  return j;
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") {
      if (!v.is_string()) throw ValidationError("config: experiment must be a string");
      c.experiment = v.get<std::string>();
    } else if (key == "params") {
      if (!v.is_object()) throw ValidationError("config: params must be an object");
      c.params = v;
    } else if (key == "levels") {
      if (!matches(v, Kind::kNumberList)) throw ValidationError("config: levels must be a list of numbers");
      c.levels = v.get<std::vector<double>>();
    } else if (key == "seed") {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ValidationError("config: seed must be a nonnegative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (key == "out") {
      if (!v.is_string()) throw ValidationError("config: out must be a string");
      c.out_dir = v.get<std::string>();
    } else {
      throw ValidationError("config: unknown key " + key);
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ValidationError("--set expects key=value, got " + std::string(assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  if (key == "levels") {
    if (!matches(value, Kind::kNumberList)) throw ValidationError("levels must be a JSON list of numbers");
    config.levels = value.get<std::vector<double>>();
  } else {
    config.params[key] = value;
  }
}

ExperimentConfig resolve(const ExperimentConfig& config) {
  if (config.experiment.empty()) throw ValidationError("no experiment given");
  const Experiment& e = find(config.experiment);
  ExperimentConfig r = config;
  r.experiment = e.name;
  if (!config.params.is_object()) throw ValidationError("params must be an object");
  for (const auto& [key, v] : config.params.items()) {
    const auto it = std::find_if(e.params.begin(), e.params.end(), [&](const Param& p) { return p.key == key; });
    if (it == e.params.end()) throw ValidationError(e.name + ": unknown parameter " + key);
    if (!matches(v, it->kind)) throw ValidationError(e.name + ": parameter " + key + " must be " + kind_name(it->kind));
  }
  json full = json::object();
  for (const auto& p : e.params) full[p.key] = config.params.contains(p.key) ? config.params.at(p.key) : p.value;
  r.params = full;
  for (double l : r.levels)
    if (!(l > 0.0) || !std::isfinite(l)) throw ValidationError("levels must be positive");
  if (r.out_dir.empty()) r.out_dir = (default_output_root() / e.name).string();
  return r;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"experiment", c.experiment}, {"params", c.params}, {"levels", c.levels}, {"seed", c.seed}, {"out", c.out_dir}};
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& resolved) {
  json j = to_json(resolved);
  j.erase("out");
  std::ostringstream o;
  o << std::hex;
  o.width(16);
  o.fill('0');
  o << fnv1a64(j.dump());
  return o.str();
}

std::string code_version() { return LPEST_VERSION; }

std::filesystem::path default_output_root() {
  const char* env = std::getenv("LAB_OUT_DIR");
  if (env && *env) return env;
  return "lab-output";
}

RunResult run_experiment(const ExperimentConfig& config) {
  const ExperimentConfig c = resolve(config);
  const Experiment& e = find(c.experiment);
  std::filesystem::create_directories(c.out_dir);
  Output out(c.out_dir);
  json summary;
  try {
    summary = e.run(c, out);
  } catch (const ValidationError& err) {
    throw ValidationError(e.name + ": " + err.what());
  } catch (const NumericalError& err) {
    throw NumericalError(e.name + ": " + err.what());
  } catch (const json::exception& err) {
    throw ValidationError(e.name + ": " + err.what());
  }
  out.write("summary.json", summary.dump(2) + "\n");
  json manifest{{"experiment", e.name},
                {"version", code_version()},
                {"config_hash", config_hash(c)},
                {"config", to_json(c)},
                {"files", out.files()}};
  out.write("manifest.json", manifest.dump(2) + "\n");
  return {c.out_dir, out.files(), summary};
}

namespace {

struct Manufactured {
  OperatorSpec spec;
  Domain domain;
  ScalarFn u;
  ScalarFn Lu;
};

Manufactured manufactured_elliptic() {
  const OperatorSpec spec = suite_case("smooth-ball-2d").spec;
  const ScalarFn u = [](double, Vec2 p) { return std::sin(p.x + 0.5) * std::cos(p.y) + p.x * p.y * p.y; };
  const ScalarFn Lu = [spec](double t, Vec2 p) {
    const double s = std::sin(p.x + 0.5), co = std::cos(p.x + 0.5), sy = std::sin(p.y), cy = std::cos(p.y);
    const double ux = co * cy + p.y * p.y, uy = -s * sy + 2 * p.x * p.y;
    const double uxx = -s * cy, uyy = -s * cy + 2 * p.x, uxy = -co * sy + 2 * p.y;
    const SymMat2 a = spec.coeffs.a(t, p);
    const Vec2 b = spec.coeffs.b(t, p);
    return a.xx * uxx + 2 * a.xy * uxy + a.yy * uyy + b.x * ux + b.y * uy;
  };
  return {spec, Domain::ball(2, 1.0), u, Lu};
}

Manufactured manufactured_parabolic() {
  CoefficientField f;
  f.dim = 1;
  f.a = [](double t, Vec2 p) { return SymMat2{1.0 + 0.5 * std::sin(p.x + t), 0, 0}; };
  f.b = [](double, Vec2 p) { return Vec2{0.5 * std::cos(p.x), 0}; };
  f.c = [](double, Vec2) { return 0.0; };
  f.time_dependent = true;
  const OperatorSpec spec{f, 0.5, 1.0};
  const ScalarFn u = [](double t, Vec2 p) { return std::cos(p.x) * (2 - t) + t * p.x * p.x; };
  const ScalarFn Lu = [f](double t, Vec2 p) {
    const double ut = -std::cos(p.x) + p.x * p.x, ux = -std::sin(p.x) * (2 - t) + 2 * t * p.x;
    const double uxx = -std::cos(p.x) * (2 - t) + 2 * t;
    return ut + f.a(t, p).xx * uxx + f.b(t, p).x * ux;
  };
  return {spec, Domain::cylinder(1, 1.0, 1.0), u, Lu};
}

}  // namespace

SweepTable convergence_sweep(const ExperimentConfig& config, const std::vector<double>& levels_in) {
  ExperimentConfig c = config;
  if (c.experiment.empty()) c.experiment = "convergence-sweep";
  c = resolve(c);
  if (c.experiment != "convergence-sweep") throw ValidationError("convergence_sweep needs a convergence-sweep config");
  SweepTable t;
  t.quantity = Ps(c, "quantity");
  std::vector<double> levels = levels_in;
  if (levels.empty()) {
    if (t.quantity == "mc-exit-time") levels = {4e-3, 2e-3, 1e-3};
    else levels = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  }
  if (levels.size() < 2) throw ValidationError("convergence_sweep needs at least two levels");
  t.levels = levels;
  if (t.quantity == "manufactured-elliptic" || t.quantity == "manufactured-parabolic") {
    const bool par = t.quantity == "manufactured-parabolic";
    const Manufactured m = par ? manufactured_parabolic() : manufactured_elliptic();
    for (double h : levels) {
      // k = h^2 keeps the backward Euler error at the order of the spatial one.
      const auto grid = classify_boundary(m.domain, {m.domain.dim(), m.domain.dim(), h, par ? h * h : 0.0});
      const Solution s = par ? solve_parabolic(m.spec, grid, m.Lu, m.u) : solve_elliptic(m.spec, grid, m.Lu, m.u);
      const GridFunction exact = GridFunction::sample(grid, m.u);
      double err = 0.0, at = 0.0;
      for (std::size_t i = 0; i < exact.values().size(); ++i) {
        const double d = std::abs(exact.values()[i] - s.u.values()[i]);
        if (d > err) {
          err = d;
          at = exact.values()[i];
        }
      }
      (void)at;
      t.values.push_back(err);
      t.errors.push_back(err);
    }
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
      const double p = std::log(t.errors[i] / t.errors[i + 1]) / std::log(levels[i] / levels[i + 1]);
      t.observed_order.push_back(p);
      t.consistent.push_back(p >= 0.5);
      t.converged = t.converged && p >= 0.5;
    }
  } else if (t.quantity == "mc-exit-time") {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      SimConfig cfg = config_from_operator({families::laplacian(1), 1.0, 0.0}, Domain::ball(1, 1.0), levels[i],
                                           Pn(c, "paths"), c.seed + i);
      const auto est = exit_time_estimate(simulate_paths(cfg));
      t.values.push_back(est.mean);
      t.std_errors.push_back(est.std_error);
    }
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
      const bool ok = std::abs(t.values[i] - t.values[i + 1]) <= 3.0 * std::hypot(t.std_errors[i], t.std_errors[i + 1]);
      t.consistent.push_back(ok);
      t.converged = t.converged && ok;
    }
  } else {
    throw ValidationError("quantity must be manufactured-elliptic, manufactured-parabolic or mc-exit-time");
  }
  return t;
}

}  // namespace lpest
