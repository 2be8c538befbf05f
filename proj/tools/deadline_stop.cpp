// deadline_stop: batch front end for the drift-detection stopping toolkit.
//
// Verbs: validate, solve, verify, simulate, examples.
// Exit codes: 0 success; 1 config/parse error or unknown example;
// 2 validation or verification failure; 3 solver non-convergence;
// 4 simulate --assert failure.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dstop/boundary.hpp"
#include "dstop/config.hpp"
#include "dstop/examples_catalog.hpp"
#include "dstop/io.hpp"
#include "dstop/montecarlo.hpp"
#include "dstop/solver.hpp"

namespace fs = std::filesystem;
using namespace dstop;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::string grid_str;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool assert_mode = false;
  bool quiet = false;
};

void say(const GlobalOpts& go, const char* fmt, ...) {
  if (go.quiet) return;
  va_list args;
  va_start(args, fmt);
  std::vfprintf(stdout, fmt, args);
  va_end(args);
}

void apply_overrides(RunConfig& cfg, const GlobalOpts& go) {
  if (!go.out_dir.empty()) cfg.outputs.dir = go.out_dir;
  if (go.seed_set) cfg.mc.seed = go.seed;
  if (!go.grid_str.empty()) {
    const auto x = go.grid_str.find('x');
    std::size_t a = 0, b = 0;
    int nt = 0, npi = 0;
    try {
      nt = std::stoi(go.grid_str.substr(0, x), &a);
      npi = std::stoi(go.grid_str.substr(x + 1), &b);
    } catch (const std::exception&) {
      a = std::string::npos;
    }
    if (x == std::string::npos || a != x || b != go.grid_str.size() - x - 1)
      throw ConfigError("--grid must look like 2000x2000");
    cfg.grid.nt = nt;
    cfg.grid.npi = npi;
    check_grid(cfg.grid);
  }
}

RunConfig load_config(const GlobalOpts& go) {
  if (go.config_path.empty()) throw ConfigError("missing --config PATH");
  RunConfig cfg = parse_config(read_text(go.config_path));
  apply_overrides(cfg, go);
  return cfg;
}

struct Resolved {
  std::string name;
  ProblemSpec spec;
};

Resolved resolve_problem(const RunConfig& cfg) {
  if (cfg.example) {
    const ExampleRow* row = find_example(*cfg.example);
    if (!row) throw ConfigError("unknown example \"" + *cfg.example + "\"");
    return {row->name, row->spec};
  }
  return {"problem", *cfg.problem};
}

double validation_horizon(const ProblemSpec& spec, const GridSpec& grid) {
  return spec.horizon ? *spec.horizon : grid.initial_horizon;
}

void print_validation(const GlobalOpts& go, const std::string& name,
                      const ValidationReport& rep) {
  say(go, "[validate] %s  mode=%s  horizon=%g  grid_n=%d\n", name.c_str(),
      rep.mode == AssumptionMode::strict ? "strict" : "relaxed", rep.horizon, rep.grid_n);
  for (const ValidationEntry& e : rep.entries) {
    if (e.holds) {
      say(go, "  %-34s pass\n", e.name.c_str());
    } else if (e.witness_t) {
      say(go, "  %-34s FAIL at t=%.6g  %s\n", e.name.c_str(), *e.witness_t,
          e.detail.c_str());
    } else {
      say(go, "  %-34s FAIL  %s\n", e.name.c_str(), e.detail.c_str());
    }
  }
  say(go, "  strict=%s relaxed=%s boundary-monotone-conditions=%s\n",
      rep.strict_ok() ? "pass" : "fail", rep.relaxed_ok() ? "pass" : "fail",
      rep.boundary_conditions_ok() ? "pass" : "fail");
  if (rep.mode == AssumptionMode::relaxed && !rep.strict_ok())
    say(go, "  warning: strict set fails; the declared relaxed set governs\n");
  say(go, "  verdict: %s\n", rep.passes() ? "PASS" : "FAIL");
}

int cmd_validate(const GlobalOpts& go) {
  const RunConfig cfg = load_config(go);
  const Resolved r = resolve_problem(cfg);
  const ValidationReport rep =
      validate_assumptions(r.spec.discounts, validation_horizon(r.spec, cfg.grid));
  print_validation(go, r.name, rep);
  return rep.passes() ? 0 : 2;
}

struct SolveOutput {
  ValueSurface surface;
  Boundary boundary;
  std::optional<InfiniteSolveResult> infinite;
  SolveDiagnostics diag;
  double value_at_prior = 0.0;
};

SolveOutput run_solve(const ProblemSpec& spec, const GridSpec& grid) {
  SolveOutput out;
  if (spec.infinite_horizon()) {
    InfiniteSolveResult res = solve_infinite(spec, grid, &out.diag);
    if (!res.converged) {
      const double last = res.sup_diffs.empty() ? 0.0 : res.sup_diffs.back();
      throw SolverError("horizon doubling did not converge within max_doublings",
                        res.solved_horizon, last);
    }
    out.surface = std::move(res.surface);
    out.infinite = std::move(res);
    out.infinite->surface = ValueSurface{};  // surface lives in out.surface
  } else {
    out.surface = solve_finite(spec, grid, &out.diag);
  }
  out.boundary = extract_boundary(out.surface, spec.discounts);
  try {
    out.boundary = transform_boundary(std::move(out.boundary), spec.discounts);
  } catch (const std::domain_error&) {
    // level at 0 or 1 somewhere (all-continue rows): keep untransformed
  }
  out.value_at_prior = out.surface.value_at(out.surface.t_grid.front(), spec.prior);
  return out;
}

void write_solve_artifacts(const GlobalOpts& go, const RunConfig& cfg,
                           const std::string& name, const SolveOutput& so,
                           const std::vector<double>* residuals = nullptr) {
  const fs::path dir = cfg.outputs.dir;
  std::vector<std::string> written;
  if (cfg.outputs.csv) {
    write_surface_csv(dir / (name + "_surface.csv"), so.surface);
    written.push_back(name + "_surface.csv");
    write_boundary_csv(dir / (name + "_boundary.csv"), so.boundary, residuals);
    written.push_back(name + "_boundary.csv");
  }
  if (cfg.outputs.binary) {
    write_surface_binary(dir / (name + "_surface.bin"), so.surface);
    written.push_back(name + "_surface.bin");
  }
  if (cfg.outputs.svg) {
    write_text(dir / (name + "_boundary.svg"), boundary_svg(so.boundary, name));
    written.push_back(name + "_boundary.svg");
  }
  if (!written.empty()) {
    std::string joined;
    for (const std::string& w : written) {
      if (!joined.empty()) joined += ", ";
      joined += w;
    }
    say(go, "  artifacts in %s: %s\n", cfg.outputs.dir.c_str(), joined.c_str());
  }
}

int cmd_solve(const GlobalOpts& go) {
  const RunConfig cfg = load_config(go);
  const Resolved r = resolve_problem(cfg);
  const ValidationReport rep =
      validate_assumptions(r.spec.discounts, validation_horizon(r.spec, cfg.grid));
  if (!rep.passes()) {
    print_validation(go, r.name, rep);
    std::fprintf(stderr, "error: assumption validation failed; not solving\n");
    return 2;
  }
  fs::create_directories(cfg.outputs.dir);

  const SolveOutput so = run_solve(r.spec, cfg.grid);
  say(go, "[solve] %s  grid %dx%d  omega=%.4g  psor sweeps total=%lld max/step=%d\n",
      r.name.c_str(), cfg.grid.nt, cfg.grid.npi, so.diag.omega_used,
      static_cast<long long>(so.diag.total_psor_sweeps), so.diag.max_sweeps_single_step);
  if (so.infinite) {
    say(go, "  horizons tried:");
    for (double h : so.infinite->horizons) say(go, " %g", h);
    say(go, "\n  converged=%s  monotone_certificate=%s  report window [0, %g]\n",
        so.infinite->converged ? "yes" : "no",
        so.infinite->monotone_certificate ? "yes" : "no", so.infinite->report_window);
  } else if (so.surface.horizon_clipped) {
    say(go, "  horizon clipped to %g (first discount zero)\n", so.surface.horizon);
  }
  say(go, "  V(0, %g) = %.9g\n", r.spec.prior, so.value_at_prior);
  if (!so.infinite)
    say(go, "  terminal boundary limit = %.9g\n",
        terminal_limit(r.spec.discounts, so.surface.horizon));
  write_solve_artifacts(go, cfg, r.name, so);
  return 0;
}

struct VerifyOutcome {
  double max_residual = 0.0;
  double residual_cap = 0.0;
  double max_residual_t = 0.0;
  int residual_knots = 0;
  int skipped_knots = 0;
  double smooth_fit_max = 0.0;
  double smooth_fit_cap = 0.0;
  bool smooth_asserted = false;
  double envelope_margin = 0.0;  // min of b - gain root; >= -slack to pass
  double envelope_slack = 0.0;
  MonotonicityReport mono;
  bool has_transform = false;
  bool residual_ok = false, smooth_ok = false, envelope_ok = false, mono_ok = false;
  bool all_ok = false;
  std::vector<double> residuals;
};

VerifyOutcome run_verify(const ProblemSpec& spec, const RunConfig& cfg,
                         const SolveOutput& so, const ValidationReport& rep) {
  VerifyOutcome v;
  const DiscountPair& pair = spec.discounts;

  ResidualOptions ro;
  ro.quad_n = cfg.verify.quad_n;
  ro.hermite_n = cfg.verify.hermite_n;
  v.residuals = integral_equation_residual(so.boundary, spec, ro);
  for (std::size_t i = 0; i < v.residuals.size(); ++i) {
    double x = v.residuals[i];
    if (std::isnan(x)) {
      ++v.skipped_knots;
    } else {
      ++v.residual_knots;
      if (x > v.max_residual) {
        v.max_residual = x;
        v.max_residual_t = so.boundary.t_grid[i];
      }
    }
  }
  const double scale0 = pair.c0.value(0.0) + pair.c1.value(0.0);
  v.residual_cap = cfg.verify.ie_tol_rel * scale0;
  v.residual_ok = v.residual_knots > 0 && v.max_residual <= v.residual_cap;

  // The finite-difference gap estimator carries an error of order
  // |d2V/dpi2|*dpi, which steep discount derivatives amplify near their
  // fast-transition times. Assert the cap only where the boundary
  // regularity conditions hold (same scope as the monotonicity
  // assertion); otherwise report the gap as a measurement.
  const SmoothFitReport sf = smooth_fit_gap(so.surface, pair);
  v.smooth_fit_max = sf.max_gap;
  v.smooth_fit_cap = cfg.verify.smooth_fit_slack_dpi * scale0 * so.surface.dpi();
  v.smooth_asserted = rep.boundary_conditions_ok();
  v.smooth_ok = !v.smooth_asserted || v.smooth_fit_max <= v.smooth_fit_cap;

  v.envelope_slack = cfg.verify.envelope_slack_dpi * so.surface.dpi();
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < so.boundary.t_grid.size(); ++i)
    margin = std::min(margin, so.boundary.level[i] -
                                  gain_root(pair, so.boundary.t_grid[i]));
  v.envelope_margin = margin;
  v.envelope_ok = margin >= -v.envelope_slack;

  v.has_transform = so.boundary.has_transform;
  if (v.has_transform) {
    v.mono = check_monotone_transformed(so.boundary, rep);
    v.mono_ok = !v.mono.asserted || v.mono.passed;
  } else {
    v.mono.asserted = rep.boundary_conditions_ok();
    v.mono_ok = !v.mono.asserted;  // asserted but untransformable: fail
  }

  v.all_ok = v.residual_ok && v.smooth_ok && v.envelope_ok && v.mono_ok;
  return v;
}

void print_verify(const GlobalOpts& go, const std::string& name, const VerifyOutcome& v) {
  say(go, "[verify] %s\n", name.c_str());
  std::string skipped;
  if (v.skipped_knots) skipped = ", " + std::to_string(v.skipped_knots) + " skipped";
  say(go, "  integral-equation max residual = %.6g at t=%.6g (cap %.6g, %d knots%s)  %s\n",
      v.max_residual, v.max_residual_t, v.residual_cap, v.residual_knots,
      skipped.c_str(), v.residual_ok ? "pass" : "FAIL");
  if (v.smooth_asserted) {
    say(go, "  smooth-fit max gap = %.6g (cap %.6g)  %s\n", v.smooth_fit_max,
        v.smooth_fit_cap, v.smooth_ok ? "pass" : "FAIL");
  } else {
    say(go, "  smooth-fit max gap = %.6g (measured; cap %.6g not asserted)\n",
        v.smooth_fit_max, v.smooth_fit_cap);
  }
  say(go, "  lower-envelope margin = %.6g (slack %.6g)  %s\n", v.envelope_margin,
      v.envelope_slack, v.envelope_ok ? "pass" : "FAIL");
  if (!v.has_transform) {
    say(go, "  transformed monotonicity: not computable (level at 0/1)  %s\n",
        v.mono_ok ? "pass" : "FAIL");
  } else if (v.mono.asserted) {
    say(go, "  transformed monotonicity (asserted): %d violations, max %.3g  %s\n",
        v.mono.violations, v.mono.max_violation, v.mono_ok ? "pass" : "FAIL");
  } else {
    say(go, "  transformed monotonicity (measured): %d violations, max %.3g\n",
        v.mono.violations, v.mono.max_violation);
  }
  say(go, "  verdict: %s\n", v.all_ok ? "PASS" : "FAIL");
}

nlohmann::json verify_to_json(const VerifyOutcome& v) {
  nlohmann::json j;
  j["max_ie_residual"] = v.max_residual;
  j["ie_residual_cap"] = v.residual_cap;
  j["residual_knots"] = v.residual_knots;
  j["skipped_knots"] = v.skipped_knots;
  j["smooth_fit_max_gap"] = v.smooth_fit_max;
  j["smooth_fit_cap"] = v.smooth_fit_cap;
  j["smooth_fit_asserted"] = v.smooth_asserted;
  j["max_ie_residual_t"] = v.max_residual_t;
  j["envelope_margin"] = v.envelope_margin;
  j["envelope_slack"] = v.envelope_slack;
  j["monotone_asserted"] = v.mono.asserted;
  j["monotone_violations"] = v.mono.violations;
  j["monotone_max_violation"] = v.mono.max_violation;
  j["pass"] = v.all_ok;
  return j;
}

int cmd_verify(const GlobalOpts& go) {
  const RunConfig cfg = load_config(go);
  const Resolved r = resolve_problem(cfg);
  if (r.spec.infinite_horizon())
    throw ConfigError("verify needs a finite horizon");
  fs::create_directories(cfg.outputs.dir);
  const ValidationReport rep =
      validate_assumptions(r.spec.discounts, validation_horizon(r.spec, cfg.grid));
  const SolveOutput so = run_solve(r.spec, cfg.grid);
  const VerifyOutcome v = run_verify(r.spec, cfg, so, rep);
  print_verify(go, r.name, v);
  write_solve_artifacts(go, cfg, r.name, so, &v.residuals);
  write_text(fs::path(cfg.outputs.dir) / (r.name + "_verify.json"),
             verify_to_json(v).dump(2) + "\n");
  return v.all_ok ? 0 : 2;
}

int cmd_simulate(const GlobalOpts& go) {
  const RunConfig cfg = load_config(go);
  const Resolved r = resolve_problem(cfg);
  if (r.spec.infinite_horizon())
    throw ConfigError("simulate needs a finite horizon");
  fs::create_directories(cfg.outputs.dir);
  const SolveOutput so = run_solve(r.spec, cfg.grid);

  EvalOptions eo;
  eo.n = cfg.mc.n;
  eo.dt = cfg.mc.dt;
  eo.seed = cfg.mc.seed;

  PolicyStats stats;
  say(go, "[simulate] %s  n=%lld dt=%g seed=%llu\n", r.name.c_str(),
      static_cast<long long>(cfg.mc.n), cfg.mc.dt,
      static_cast<unsigned long long>(cfg.mc.seed));
  if (r.spec.discounts.deadline_interpretable) {
    const FormulationComparison cmp = compare_formulations(r.spec, so.boundary, eo);
    stats = cmp.original;
    say(go, "  original payoff mean = %.9g (SE %.3g)\n", cmp.original.mean_payoff,
        cmp.original.std_error);
    say(go, "  belief payoff mean   = %.9g (SE %.3g)\n", cmp.belief.mean_payoff,
        cmp.belief.std_error);
    say(go, "  paired formulation diff = %.3g (SE %.3g)\n", cmp.diff_mean, cmp.diff_se);
  } else {
    stats = evaluate_pi_formulation(r.spec, so.boundary, eo);
    say(go, "  belief payoff mean = %.9g (SE %.3g) [pair not deadline-interpretable]\n",
        stats.mean_payoff, stats.std_error);
  }
  const double v0 = so.value_at_prior;
  const double diff = std::abs(stats.mean_payoff - v0);
  const double in_se = stats.std_error > 0 ? diff / stats.std_error : 0.0;
  say(go, "  V(0, %g) = %.9g  |MC - PDE| = %.3g (%.2f SE)\n", r.spec.prior, v0, diff,
      in_se);

  StatsMetadata meta;
  meta.seed = cfg.mc.seed;
  meta.n = cfg.mc.n;
  meta.dt = cfg.mc.dt;
  meta.boundary_hash = fnv1a64(boundary_csv_string(so.boundary));
  write_stats_json(fs::path(cfg.outputs.dir) / (r.name + "_stats.json"), stats, meta);
  if (cfg.outputs.csv)
    write_boundary_csv(fs::path(cfg.outputs.dir) / (r.name + "_boundary.csv"),
                       so.boundary);

  if (go.assert_mode && diff > 3.0 * stats.std_error) {
    std::fprintf(stderr, "error: |MC - PDE| = %.6g exceeds 3 SE = %.6g\n", diff,
                 3.0 * stats.std_error);
    return 4;
  }
  return 0;
}

int cmd_examples(const GlobalOpts& go, const std::string& selection, bool list_only) {
  if (list_only) {
    for (const ExampleRow& row : example_catalog())
      std::printf("%-24s %s\n", row.name.c_str(), row.summary.c_str());
    return 0;
  }
  std::vector<const ExampleRow*> rows;
  if (selection == "all") {
    for (const ExampleRow& row : example_catalog()) rows.push_back(&row);
  } else {
    const ExampleRow* row = find_example(selection);
    if (!row) throw ConfigError("unknown example \"" + selection + "\"");
    rows.push_back(row);
  }

  RunConfig base;
  base.example = "placeholder";
  apply_overrides(base, go);
  fs::create_directories(base.outputs.dir);

  std::string csv =
      "name,terminal_extracted,terminal_formula,last_interior,value_at_prior,"
      "max_ie_residual,monotone,verify\n";
  bool all_ok = true;
  for (const ExampleRow* row : rows) {
    RunConfig cfg = base;
    cfg.example = row->name;
    const ProblemSpec& spec = row->spec;
    const ValidationReport rep =
        validate_assumptions(spec.discounts, validation_horizon(spec, cfg.grid));
    const SolveOutput so = run_solve(spec, cfg.grid);
    const VerifyOutcome v = run_verify(spec, cfg, so, rep);
    write_solve_artifacts(go, cfg, row->name, so, &v.residuals);
    write_text(fs::path(cfg.outputs.dir) / (row->name + "_verify.json"),
               verify_to_json(v).dump(2) + "\n");

    const double formula = terminal_limit(spec.discounts, so.surface.horizon);
    const double extracted = so.boundary.terminal_level;
    const bool terminal_ok =
        std::abs(extracted - formula) <= 10.0 * so.surface.dpi();
    const char* mono = !v.has_transform      ? "untransformable"
                       : v.mono.asserted     ? (v.mono.passed ? "asserted-pass"
                                                              : "asserted-FAIL")
                       : v.mono.violations ? "measured-violations"
                                           : "measured-clean";
    char line[512];
    std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%s\n",
                  row->name.c_str(), extracted, formula, so.boundary.left_limit,
                  so.value_at_prior, v.max_residual, mono,
                  v.all_ok ? "pass" : "fail");
    csv += line;
    say(go, "[examples] %-24s terminal %.6f vs %.6f (%s)  V=%.6f  residual %.3g  verify %s\n",
        row->name.c_str(), extracted, formula, terminal_ok ? "ok" : "MISMATCH",
        so.value_at_prior, v.max_residual, v.all_ok ? "pass" : "fail");
    // the command's verdict is completion plus terminal agreement; the
    // per-row verify outcome is recorded in the summary table
    all_ok = all_ok && terminal_ok;
  }
  write_text(fs::path(base.outputs.dir) / "examples_summary.csv", csv);
  say(go, "  summary: %s/examples_summary.csv\n", base.outputs.dir.c_str());
  return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal stopping toolkit for drift detection under deadline discounting"};
  app.require_subcommand(1);

  GlobalOpts go;
  app.add_option("--config", go.config_path, "run configuration JSON");
  app.add_option("--out", go.out_dir, "output directory (overrides config)");
  auto* seed_opt = app.add_option("--seed", go.seed, "RNG seed (overrides config)");
  app.add_flag("--assert", go.assert_mode, "fail simulate when MC and PDE disagree");
  app.add_option("--grid", go.grid_str, "grid override, NTxNPI");
  app.add_flag("--quiet", go.quiet, "suppress informational output");

  auto* validate = app.add_subcommand("validate", "check the assumption set");
  auto* solve = app.add_subcommand("solve", "solve the free-boundary problem");
  auto* verify = app.add_subcommand("verify", "solve and check identities/monotonicity");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo policy replay");
  auto* examples = app.add_subcommand("examples", "run the built-in catalog");
  std::string selection = "all";
  bool list_only = false;
  examples->add_option("selection", selection, "catalog row name or \"all\"");
  examples->add_flag("--list", list_only, "list catalog rows and exit");
  for (CLI::App* sub : {validate, solve, verify, simulate, examples}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  go.seed_set = seed_opt->count() > 0;

  try {
    if (validate->parsed()) return cmd_validate(go);
    if (solve->parsed()) return cmd_solve(go);
    if (verify->parsed()) return cmd_verify(go);
    if (simulate->parsed()) return cmd_simulate(go);
    if (examples->parsed()) return cmd_examples(go, selection, list_only);
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s (t=%.6g, residual=%.3g)\n", e.what(), e.time,
                 e.residual);
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
