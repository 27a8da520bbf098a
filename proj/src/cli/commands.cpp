#include <chrono>
#include <cmath>
#include <fstream>

#include "json_util.hpp"
#include "kbrw/branching.hpp"
#include "kbrw/error.hpp"
#include "kbrw/io.hpp"
#include "kbrw/kinetic.hpp"
#include "kbrw/martingale.hpp"
#include "kbrw/stationary.hpp"

namespace kbrw::cli {

using nlohmann::json;

json solution_to_json(const StationarySolution& sol) {
  if (!sol.is_mixture()) throw Error(ErrorCode::InvalidArgument, "only mixtures can be stored");
  json meta = {{"kind", sol.meta.kind},   {"alpha", sol.meta.alpha}, {"scale", sol.meta.scale},
               {"n_W", sol.meta.n_W},     {"n_big", sol.meta.n_big}, {"seed", sol.meta.seed}};
  return {{"meta", meta}, {"w_fine", sol.w_fine}, {"w_coarse", sol.w_coarse}};
}

StationarySolution solution_from_json(const json& doc) {
  try {
    const auto& m = doc.at("meta");
    SolutionMeta meta;
    meta.kind = m.at("kind").get<std::string>();
    meta.alpha = m.at("alpha").get<double>();
    meta.scale = m.at("scale").get<double>();
    meta.n_W = m.at("n_W").get<std::size_t>();
    meta.n_big = m.at("n_big").get<int>();
    meta.seed = m.at("seed").get<std::uint64_t>();
    return restore_mixture(meta, doc.at("w_fine").get<std::vector<double>>(),
                           doc.at("w_coarse").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed stationary solution: ") + e.what());
  }
}

namespace {

json estimate_json(const Estimate& e) {
  return {{"mean", e.mean}, {"std_error", e.std_error}, {"n_samples", e.n_samples}};
}

json test_json(const TestResult& t) { return {{"statistic", t.statistic}, {"p_value", t.p_value}, {"dof", t.dof}}; }

json residual_json(const ResidualReport& r) {
  double worst_ratio = 0.0;
  for (std::size_t i = 0; i < r.gap.size(); ++i) {
    if (r.tolerance[i] > 0.0) worst_ratio = std::max(worst_ratio, r.gap[i] / r.tolerance[i]);
    else if (r.gap[i] > 0.0) worst_ratio = std::numeric_limits<double>::infinity();
  }
  return {{"points", r.points.size()}, {"max_abs_gap", r.max_abs_gap}, {"max_sample_gap", r.max_sample_gap},
          {"worst_gap_over_tolerance", worst_ratio}};
}

class Checks {
 public:
  void add(const std::string& name, bool pass, json details = json::object()) {
    details["name"] = name;
    details["pass"] = pass;
    list_.push_back(std::move(details));
    all_ = all_ && pass;
  }
  bool all() const noexcept { return all_; }
  const json& list() const noexcept { return list_; }

 private:
  json list_ = json::array();
  bool all_ = true;
};

std::vector<std::string> columns(std::initializer_list<const char*> names) { return {names.begin(), names.end()}; }

std::string f(double v) { return format_double(v); }

double z_of(const RunConfig& cfg) { return cfg.tolerances.sigma_level; }

const json* sub(const RunConfig& cfg, const char* key) { return find(cfg.command, key); }

double resolve_alpha(const KernelModel& model, const RunConfig& cfg, Key key, json& info) {
  if (const json* a = sub(cfg, "alpha")) {
    if (!a->is_number()) throw ConfigError("command.alpha must be a number");
    info = {{"source", "config"}, {"value", a->get<double>()}};
    return a->get<double>();
  }
  AlphaSolveOptions opt;
  opt.budget = get_count(cfg.command, "alpha_budget", 1000000, "command");
  const auto sol = solve_alpha(model, 0.05, 2.0, key, opt);
  info = {{"source", sol.exact ? "exact" : "monte_carlo"}, {"value", sol.alpha}, {"ci_lo", sol.ci_lo},
          {"ci_hi", sol.ci_hi}};
  return sol.alpha;
}

void finish(json& summary, const Checks& checks) {
  summary["checks"] = checks.list();
  summary["pass"] = checks.all();
}

// -- validate-kernel ---------------------------------------------------------

void cmd_validate_kernel(const RunConfig& cfg, const KernelModel& model, Key key, const std::filesystem::path& out,
                         json& summary, Checks& checks) {
  const json& c = cfg.command;
  std::vector<double> gammas;
  if (const json* g = find(c, "gamma_grid")) {
    if (!g->is_array() || g->empty()) throw ConfigError("command.gamma_grid must be a nonempty array");
    for (const auto& v : *g) {
      if (!v.is_number() || v.get<double>() < 0.0) throw ConfigError("command.gamma_grid entries must be >= 0");
      gammas.push_back(v.get<double>());
    }
  } else {
    for (int i = 0; i <= 20; ++i) gammas.push_back(0.1 * i);
  }
  const std::size_t n_mc = std::max<std::size_t>(2, cfg.budgets.n_mc);
  CsvWriter curve(out / "m_curve.csv", columns({"gamma", "m", "se", "n", "exact_m"}));
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const auto est = estimate_m(model, gammas[i], n_mc, key.child("m-curve").child(i));
    const auto exact = model.exact_m(gammas[i]);
    curve.row({f(gammas[i]), f(est.mean), f(est.std_error), std::to_string(est.n_samples), exact ? f(*exact) : ""});
  }

  const double lo = get_number(c, "bracket_lo", 0.05, "command");
  const double hi = get_number(c, "bracket_hi", 2.0, "command");
  AlphaSolveOptions opt;
  opt.budget = get_count(c, "alpha_budget", 1000000, "command");
  opt.z = z_of(cfg);
  std::optional<AlphaSolution> alpha;
  try {
    alpha = solve_alpha(model, lo, hi, key.child("alpha"), opt);
    checks.add("A1", true,
               {{"alpha", alpha->alpha}, {"ci_lo", alpha->ci_lo}, {"ci_hi", alpha->ci_hi}, {"exact", alpha->exact},
                {"evaluations", alpha->evaluations}, {"draws", alpha->draws}});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoBracket && e.code() != ErrorCode::Inconclusive) throw;
    checks.add("A1", false, {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
  }

  if (alpha) {
    const double h = get_number(c, "h", 0.01, "command");
    const auto d = check_A2(model, alpha->alpha, h, n_mc, key.child("A2"));
    const bool ok = d.negative_and_finite && d.derivative.mean + z_of(cfg) * d.derivative.std_error < 0.0;
    checks.add("A2", ok, {{"derivative", estimate_json(d.derivative)}, {"exact", d.exact}, {"truncation", d.truncation}});
  } else {
    checks.add("A2", false, {{"skipped", "no alpha"}});
  }

  const auto a3 = check_A3(model, get_count(c, "a3_n", 1000, "command"), cfg.tolerances.significance, key.child("A3"),
                           get_count(c, "a3_permutations", 200, "command"));
  checks.add("A3", a3.pass, {{"test", test_json(a3.test)}, {"max_paired_gap", a3.max_paired_gap}});

  const auto a5 = check_A5(model, get_count(c, "a5_n", 2000, "command"), key.child("A5"));
  // A5 is only required for the Gaussian branch, alpha = 2.
  const bool required = alpha && (std::abs(alpha->alpha - 2.0) <= 1e-6 || (alpha->ci_lo <= 2.0 && 2.0 <= alpha->ci_hi));
  checks.add("A5", a5.found || !required,
             {{"found", a5.found}, {"required", required}, {"elements", a5.elements}, {"heuristic", true}});
  summary["kernel"] = {{"name", model.name()}, {"exact_m", model.has_exact_m()}};
}

// -- evolve ------------------------------------------------------------------

void cmd_evolve(const RunConfig& cfg, const KernelModel& model, Key key, const std::filesystem::path& out,
                json& summary, Checks& checks) {
  const json& c = cfg.command;
  const json* datum_spec = find(c, "datum");
  if (!datum_spec) throw ConfigError("evolve needs command.datum");
  const CharFn phi0 = build_datum(*datum_spec);
  const auto grid = build_grid(find(c, "grid"));
  std::vector<double> times;
  if (const json* ts = find(c, "times")) {
    if (!ts->is_array() || ts->empty()) throw ConfigError("command.times must be a nonempty array");
    for (const auto& v : *ts) {
      if (!v.is_number() || !(v.get<double>() >= 0.0)) throw ConfigError("command.times entries must be >= 0");
      times.push_back(v.get<double>());
    }
  } else {
    const double t = get_number(c, "t", 1.0, "command");
    if (!(t >= 0.0)) throw ConfigError("command.t must be >= 0");
    times.push_back(t);
  }

  const auto& b = cfg.budgets;
  CsvWriter csv(out / "points.csv", columns({"t", "r", "o_hash", "re", "im", "se_re", "se_im", "n_replicas"}));
  double max_se = 0.0;
  bool bounded = true;
  for (double t : times) {
    // The same key at every t keeps the populations nested across times.
    const auto est = solve_time(phi0, model, t, grid, b.n_replicas, b.cap, key.child("evolve"));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      csv.row({f(t), f(grid[i].r), hash_string(grid[i].o), f(est[i].mean.real()), f(est[i].mean.imag()),
               f(est[i].se_re), f(est[i].se_im), std::to_string(est[i].n_samples)});
      max_se = std::max({max_se, est[i].se_re, est[i].se_im});
      bounded = bounded && std::abs(est[i].mean) <= 1.0 + 1e-12;
    }
  }
  checks.add("bounded", bounded, {{"max_se", max_se}});

  if (const json* ode = find(c, "ode")) {
    expect_object(*ode, "command.ode");
    OdeOptions opt{z_of(cfg), cfg.tolerances.atol, get_number(*ode, "allowance_c", kOdeAllowanceC, "command.ode")};
    const auto rep = ode_residual(phi0, model, get_number(*ode, "t", 0.5, "command.ode"),
                                  get_number(*ode, "delta", 0.05, "command.ode"), grid, b.n_replicas, b.cap,
                                  key.child("ode"), opt);
    auto details = residual_json(rep);
    details["allowance_c"] = opt.allowance_c;
    checks.add("ode_residual", rep.pass, details);
  }
  if (const json* sg = find(c, "semigroup")) {
    expect_object(*sg, "command.semigroup");
    const auto rep = semigroup_check(phi0, model, get_number(*sg, "t", 0.4, "command.semigroup"),
                                     get_number(*sg, "h", 0.4, "command.semigroup"), grid, b.n_replicas,
                                     get_count(*sg, "n_inner", 8, "command.semigroup"), b.cap, key.child("semigroup"),
                                     z_of(cfg), cfg.tolerances.atol);
    checks.add("semigroup", rep.pass, residual_json(rep));
  }
  summary["datum"] = phi0.description;
}

// -- stationary --------------------------------------------------------------

void cmd_stationary(const RunConfig& cfg, const KernelModel& model, Key key, const std::filesystem::path& out,
                    json& summary, Checks& checks) {
  const json& c = cfg.command;
  const std::string kind = get_string(c, "kind", "stable", "command");
  const auto& b = cfg.budgets;
  StationarySolution sol;
  json alpha_info;
  if (kind == "stable") {
    const double alpha = resolve_alpha(model, cfg, key.child("alpha"), alpha_info);
    sol = stable_mixture(model, alpha, get_number(c, "sigma", 1.0, "command"), b.n_big, b.n_W, key.child("mixture"));
  } else if (kind == "gaussian") {
    sol = gaussian_mixture(model, get_number(c, "c", 1.0, "command"), b.n_big, b.n_W, key.child("mixture"));
    alpha_info = {{"source", "fixed"}, {"value", 2.0}};
  } else {
    throw ConfigError("command.kind must be \"stable\" or \"gaussian\"");
  }
  summary["alpha"] = alpha_info;
  summary["solution"] = solution_to_json(sol)["meta"];
  {
    std::ofstream s(out / "solution.json", std::ios::binary | std::ios::trunc);
    s << solution_to_json(sol).dump() << '\n';
  }

  const auto grid = build_grid(find(c, "grid"));
  FixedPointOptions fopt;
  fopt.z = z_of(cfg);
  fopt.atol = cfg.tolerances.atol;
  const auto rep = fixed_point_residual(sol, model, grid, b.n_mc, key.child("residual"), fopt);
  CsvWriter csv(out / "points.csv",
                columns({"r", "o_hash", "lhs_re", "lhs_im", "lhs_se_re", "lhs_se_im", "rhs_re", "rhs_im", "gap",
                         "tolerance", "allowance"}));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv.row({f(grid[i].r), hash_string(grid[i].o), f(rep.lhs[i].mean.real()), f(rep.lhs[i].mean.imag()),
             f(rep.lhs[i].se_re), f(rep.lhs[i].se_im), f(rep.rhs[i].mean.real()), f(rep.rhs[i].mean.imag()),
             f(rep.gap[i]), f(rep.tolerance[i]), f(rep.allowance[i])});
  }
  checks.add("fixed_point", rep.pass, residual_json(rep));

  const std::size_t draws = get_count(c, "sampler_draws", 100000, "command");
  const auto cf = sampler_cf_check(sol.law(), grid, draws, key.child("sampler"));
  checks.add("sampler_cf", cf.pass, residual_json(cf));

  if (const json* dump = find(c, "dump_samples")) {
    if (!dump->is_number_integer() || dump->get<std::int64_t>() < 1) {
      throw ConfigError("command.dump_samples must be an integer >= 1");
    }
    CsvWriter s(out / "samples.csv", columns({"x", "y", "z"}));
    auto rng = key.child("dump").stream();
    for (std::int64_t i = 0; i < dump->get<std::int64_t>(); ++i) {
      const auto x = sol.sampler(rng);
      s.row({f(x[0]), f(x[1]), f(x[2])});
    }
  }
}

// -- martingale --------------------------------------------------------------

void cmd_martingale(const RunConfig& cfg, const KernelModel& model, Key key, const std::filesystem::path& out,
                    json& summary, Checks& checks) {
  const json& c = cfg.command;
  json alpha_info;
  const double alpha = resolve_alpha(model, cfg, key.child("alpha"), alpha_info);
  const double gamma = get_number(c, "gamma", alpha, "command");
  summary["alpha"] = alpha_info;
  summary["gamma"] = gamma;

  std::vector<int> levels;
  if (const json* l = find(c, "levels")) {
    if (!l->is_array() || l->empty()) throw ConfigError("command.levels must be a nonempty array");
    for (const auto& v : *l) {
      if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() > kMaxSliceDepth) {
        throw ConfigError("command.levels entries must be integers in [0, 24]");
      }
      levels.push_back(v.get<int>());
    }
  } else {
    levels = {1, 4, 8, 12};
  }
  const int n_max = *std::max_element(levels.begin(), levels.end());
  const auto& b = cfg.budgets;

  double m_gamma = 0.0;
  if (model.has_exact_m()) {
    m_gamma = *model.exact_m(gamma);
  } else {
    const auto est = estimate_m(model, gamma, std::max<std::size_t>(2, b.n_mc), key.child("m-gamma"));
    m_gamma = est.mean;
    summary["m_gamma_estimate"] = estimate_json(est);
  }
  summary["m_gamma"] = m_gamma;

  const auto paths = map_replicas(b.seeds, [&](std::size_t i) {
    return additive_path(model, gamma, m_gamma, n_max, key.child("paths").child(i)).values;
  });
  const std::size_t keep = std::min<std::size_t>(b.seeds, get_count(c, "paths", 10, "command"));
  CsvWriter csv(out / "w_paths.csv", columns({"seed", "n", "W"}));
  for (std::size_t i = 0; i < keep; ++i) {
    for (int n = 0; n <= n_max; ++n) csv.row({std::to_string(i), std::to_string(n), f(paths[i][n])});
  }
  json level_json = json::array();
  bool means_ok = true;
  for (int n : levels) {
    std::vector<double> xs(b.seeds);
    for (std::size_t i = 0; i < b.seeds; ++i) xs[i] = paths[i][n];
    const auto est = estimate_mean(xs);
    const bool ok = std::abs(est.mean - 1.0) <= z_of(cfg) * est.std_error + cfg.tolerances.atol + 1e-12;
    means_ok = means_ok && ok;
    level_json.push_back({{"n", n}, {"W", estimate_json(est)}, {"pass", ok}});
  }
  checks.add("mean_one", means_ok, {{"levels", level_json}});

  const auto big = biggins_conditions(model, gamma, std::max<std::size_t>(2, b.n_mc), key.child("biggins"), z_of(cfg));
  checks.add("biggins", big.drift_ok && big.moment_ok,
             {{"m", estimate_json(big.m)}, {"dm", estimate_json(big.dm)}, {"moment_term", estimate_json(big.moment_term)},
              {"drift_margin", estimate_json(big.drift_margin)}});

  if (const json* d = find(c, "disintegration")) {
    expect_object(*d, "command.disintegration");
    const int n = static_cast<int>(get_count(*d, "n", 1, "command.disintegration"));
    const int n_big = static_cast<int>(get_count(*d, "n_big", 10, "command.disintegration"));
    const auto rep = disintegration_check(model, alpha, n, n_big, b.seeds, key.child("disintegration"));
    const double z = z_of(cfg);
    const bool ok = agree(rep.lhs_mean, rep.rhs_mean, z, 1e-12) && agree(rep.lhs_variance, rep.rhs_variance, z, 1e-12) &&
                    rep.ks.p_value > cfg.tolerances.significance;
    checks.add("disintegration", ok,
               {{"lhs_mean", estimate_json(rep.lhs_mean)}, {"rhs_mean", estimate_json(rep.rhs_mean)},
                {"lhs_variance", estimate_json(rep.lhs_variance)}, {"rhs_variance", estimate_json(rep.rhs_variance)},
                {"ks", test_json(rep.ks)}});
  }
}

// -- embed -------------------------------------------------------------------

VelocityLaw build_law(const json& spec) {
  expect_object(spec, "command.law");
  const std::string type = get_string(spec, "type", "gaussian", "command.law");
  if (type == "gaussian") return gaussian_law(get_number(spec, "scale", 1.0, "command.law"));
  if (type == "shifted_gaussian") {
    const json* m = find(spec, "mean");
    if (!m) throw ConfigError("command.law.mean is required");
    return shifted_gaussian_law(get_vector3(*m, "command.law.mean"), get_number(spec, "scale", 1.0, "command.law"));
  }
  if (type == "stable") {
    return isotropic_stable_law(get_number(spec, "alpha", 1.0, "command.law"),
                                get_number(spec, "sigma", 1.0, "command.law"));
  }
  throw ConfigError("unknown law type '" + type + "'");
}

std::vector<FourierPoint> random_points(std::size_t n, Key key) {
  std::vector<FourierPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = key.child(i).stream();
    const double r = std::exp(std::log(0.1) + (std::log(4.0) - std::log(0.1)) * rng.uniform());
    pts.push_back({r, haar_rotation(rng)});
  }
  return pts;
}

void cmd_embed(const RunConfig& cfg, const KernelModel& model, Key key, const std::filesystem::path& out,
               json& summary, Checks& checks) {
  const json& c = cfg.command;
  VelocityLaw law;
  try {
    law = build_law(find(c, "law") ? c.at("law") : json::object());
  } catch (const Error& e) {
    throw ConfigError(std::string("command.law: ") + e.what());
  }
  const int n = static_cast<int>(get_count(c, "n", 6, "command"));
  if (n > kMaxSliceDepth) throw ConfigError("command.n must be at most 24");
  const std::string mode = get_string(c, "mode", "both", "command");
  if (mode != "shared" && mode != "independent" && mode != "both") {
    throw ConfigError("command.mode must be shared, independent or both");
  }
  const auto slice = simulate_generation(model, n, key.child("slice"));
  const auto nodes = nodes_of(slice);
  summary["law"] = law.char_fn.description;
  summary["slice_n"] = n;

  CsvWriter csv(out / "points.csv", columns({"mode", "r", "o_hash", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "gap"}));
  if (mode != "independent") {
    const auto pts = random_points(get_count(c, "points", 1000, "command"), key.child("points"));
    double max_gap = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto rng = key.child("embed").child(i).stream();
      const auto s = embedded_matrix_cf(law, nodes, pts[i], rng);
      const double gap = std::abs(s.matrix_form - s.product_form);
      max_gap = std::max(max_gap, gap);
      csv.row({"matrix", f(pts[i].r), hash_string(pts[i].o), f(s.matrix_form.real()), f(s.matrix_form.imag()),
               f(s.product_form.real()), f(s.product_form.imag()), f(gap)});
    }
    const double tol = std::max(1e-10, cfg.tolerances.atol);
    checks.add("matrix_embedding", max_gap <= tol, {{"max_gap", max_gap}, {"tolerance", tol}});
    const auto rep = vectorized_Yn_check(law, nodes, pts, get_count(c, "shared_draws", 16, "command"),
                                         key.child("yn-shared"), DrawMode::shared, z_of(cfg), tol);
    checks.add("Yn_shared", rep.pass && rep.max_sample_gap <= tol, residual_json(rep));
  }
  if (mode != "shared") {
    const auto pts = random_points(get_count(c, "independent_points", 10, "command"), key.child("independent-points"));
    const auto rep = vectorized_Yn_check(law, nodes, pts, std::max<std::size_t>(2, cfg.budgets.n_mc),
                                         key.child("yn-independent"), DrawMode::independent, z_of(cfg),
                                         cfg.tolerances.atol);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      csv.row({"independent", f(pts[i].r), hash_string(pts[i].o), f(rep.lhs[i].mean.real()),
               f(rep.lhs[i].mean.imag()), f(rep.rhs[i].mean.real()), f(rep.rhs[i].mean.imag()), f(rep.gap[i])});
    }
    checks.add("Yn_independent", rep.pass, residual_json(rep));
  }
}

void write_summary(const std::filesystem::path& out, const json& summary) {
  std::ofstream s(out / "summary.json", std::ios::binary | std::ios::trunc);
  s << summary.dump(2) << '\n';
}

}  // namespace

RunResult run_command(const std::string& command, const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  if (const json* name = find(cfg.command, "name")) {
    if (!name->is_string() || name->get<std::string>() != command) {
      throw ConfigError("command.name does not match the subcommand '" + command + "'");
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out_dir.string());

  const KernelModel model = build_kernel(cfg.kernel);
  const Key key = Key{cfg.seed}.child(command);
  RunResult result;
  json summary = {{"artifact", "kinetic-brw"}, {"version", kVersion}, {"command", command}, {"config", cfg.raw}};
  Checks checks;
  try {
    if (command == "validate-kernel") cmd_validate_kernel(cfg, model, key, out_dir, summary, checks);
    else if (command == "evolve") cmd_evolve(cfg, model, key, out_dir, summary, checks);
    else if (command == "stationary") cmd_stationary(cfg, model, key, out_dir, summary, checks);
    else if (command == "martingale") cmd_martingale(cfg, model, key, out_dir, summary, checks);
    else if (command == "embed") cmd_embed(cfg, model, key, out_dir, summary, checks);
    else throw ConfigError("unknown command '" + command + "'");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config || e.code() == ErrorCode::InvalidArgument) throw ConfigError(e.what());
    // Budget and scope failures are reported as a failed run, not a config error.
    checks.add("run", false, {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
  }
  finish(summary, checks);
  summary["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_summary(out_dir, summary);
  result.exit_code = checks.all() ? kPass : kCheckFailed;
  result.summary = std::move(summary);
  return result;
}

}  // namespace kbrw::cli
