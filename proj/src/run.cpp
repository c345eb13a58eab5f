#include "grushin/run.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>

#include "grushin/analysis.hpp"
#include "grushin/geometry.hpp"

namespace grushin {

namespace {

namespace fs = std::filesystem;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<std::vector<double>> trace_rows(const std::vector<std::pair<int, double>>& tr) {
  std::vector<std::vector<double>> rows;
  rows.reserve(tr.size());
  for (const auto& [it, val] : tr) rows.push_back({double(it), val});
  return rows;
}

double uniform_from(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53);
}

void run_best_constant(const ExperimentConfig& cfg, const std::string& out_dir,
                       RunReport& rep) {
  const Grid g = cfg.grid();
  if (cfg.estimator == "extrapolated") {
    const BestConstantEstimate est =
        estimate_sobolev_constant(g, cfg.solver, cfg.scale_lo, cfg.scale_hi, true);
    rep.add_result("s_estimate", est.value);
    rep.add_result("s_fine_extrapolated", est.fine_extrapolated);
    rep.add_result("s_coarse_extrapolated", est.coarse_extrapolated);
    for (std::size_t k = 0; k < est.runs.size(); ++k) {
      rep.add_result("run_" + std::to_string(k) + "_scale", est.runs[k].first);
      rep.add_result("run_" + std::to_string(k) + "_quotient", est.runs[k].second);
    }
    if (cfg.gamma == 0.0) {
      const double oracle = talenti_best_constant(double(cfg.m + cfg.n), cfg.p);
      rep.add_result("oracle_euclidean_constant", oracle);
      rep.add_result("oracle_relative_deviation", est.value / oracle - 1.0);
    }
    return;
  }
  const QuotientResult r = minimize_sobolev_quotient(g, cfg.solver);
  rep.add_result("s_estimate", r.value);
  rep.add_result("iterations", double(r.iters));
  rep.add_result("residual", r.residual);
  rep.add_result("boundary_mass_fraction", r.boundary_mass);
  rep.add_result("boundary_mass_warning", r.boundary_mass_warning ? "true" : "false");
  if (cfg.gamma == 0.0) {
    const double oracle = talenti_best_constant(double(cfg.m + cfg.n), cfg.p);
    rep.add_result("oracle_euclidean_constant", oracle);
    rep.add_result("oracle_relative_deviation", r.value / oracle - 1.0);
  }
  if (cfg.dump_field) {
    write_field(r.minimizer, (fs::path(out_dir) / "extremal.field").string());
    rep.add_artifact("extremal", "extremal.field");
  }
  write_csv((fs::path(out_dir) / "trace.csv").string(), {"iteration", "quotient"},
            trace_rows(r.trace));
  rep.add_artifact("trace", "trace.csv");
}

void run_eigenvalue(const ExperimentConfig& cfg, const std::string& out_dir, RunReport& rep) {
  const Grid g = cfg.grid();
  const DomainMask mask = DomainMask::whole_interior(g);
  const EigenResult r = first_eigenvalue(mask, cfg.solver);
  rep.add_result("lambda1", r.value);
  rep.add_result("iterations", double(r.iters));
  rep.add_result("residual", r.residual);
  if (cfg.dump_field) {
    write_field(r.mode, (fs::path(out_dir) / "eigenmode.field").string());
    rep.add_artifact("eigenmode", "eigenmode.field");
  }
  write_csv((fs::path(out_dir) / "trace.csv").string(), {"iteration", "rayleigh"},
            trace_rows(r.trace));
  rep.add_artifact("trace", "trace.csv");
}

void run_brezis_nirenberg(const ExperimentConfig& cfg, const std::string& out_dir,
                          RunReport& rep) {
  const Grid g = cfg.grid();
  const DomainMask mask = DomainMask::whole_interior(g);
  double lambda = cfg.lambda;
  if (cfg.lambda_mode == "fraction_of_lambda1") {
    const EigenResult eig = first_eigenvalue(mask, cfg.solver);
    lambda = cfg.lambda * eig.value;
    rep.add_result("lambda1_for_fraction", eig.value);
  }
  rep.add_result("lambda_effective", lambda);
  double s_est = cfg.s_estimate;
  if (!(s_est > 0.0)) {
    const BestConstantEstimate est = estimate_sobolev_constant(g, cfg.solver);
    s_est = est.value;
    rep.add_result("s_estimate_computed", s_est);
  }
  const MountainPassResult r =
      solve_brezis_nirenberg(mask, lambda, cfg.q_exponent, cfg.solver, s_est);
  rep.add_result("c_lambda", r.c_lambda);
  rep.add_result("threshold", r.threshold);
  rep.add_result("below_threshold", r.below_threshold ? "true" : "false");
  rep.add_result("residual", r.residual);
  rep.add_result("nehari_identity_error", r.nehari_identity_error);
  rep.add_result("nehari_t", r.nehari_t);
  rep.add_result("iterations", double(r.iters));
  rep.add_result("s_estimate_used", r.s_estimate);
  if (cfg.q_exponent == cfg.p) rep.add_result("lambda1_estimate", r.lambda1_estimate);
  if (cfg.dump_field) {
    write_field(r.solution, (fs::path(out_dir) / "solution.field").string());
    rep.add_artifact("solution", "solution.field");
  }
  write_csv((fs::path(out_dir) / "trace.csv").string(), {"iteration", "energy"},
            trace_rows(r.trace));
  rep.add_artifact("trace", "trace.csv");
}

void run_decay(const ExperimentConfig& cfg, const std::string& out_dir, RunReport& rep) {
  const Field u = read_field(cfg.field_in);
  const DecayFit fit =
      decay_fit(u, cfg.r_min, cfg.r_max, cfg.n_annuli, cfg.boundary_margin_cells);
  rep.add_result("slope", fit.slope);
  rep.add_result("intercept", fit.intercept);
  rep.add_result("r_squared", fit.r_squared);
  rep.add_result("slope_lower_decile", fit.slope_lower);
  const double alpha = u.grid.params.decay_alpha();
  rep.add_result("expected_slope", -alpha);
  std::vector<std::vector<double>> rows;
  for (const auto& a : fit.annuli)
    rows.push_back({a.r_inner, a.r_outer, a.mean_log_d, a.mean_log_u, a.lower_log_u,
                    double(a.nodes)});
  write_csv((fs::path(out_dir) / "annuli.csv").string(),
            {"r_inner", "r_outer", "mean_log_d", "mean_log_u", "lower_log_u", "nodes"}, rows);
  rep.add_artifact("annuli", "annuli.csv");
}

void run_expansion(const ExperimentConfig& cfg, const std::string& out_dir, RunReport& rep) {
  const Field U = read_field(cfg.field_in);
  const ExpansionReport er = expansion_study(U, cfg.eps_list, cfg.q_exponent, cfg.r_cut);
  rep.add_result("profile_energy", er.profile_energy);
  rep.add_result("profile_critical_mass", er.profile_crit);
  rep.add_result("fitted_grad_exponent", er.fitted_grad_exponent);
  rep.add_result("fitted_crit_exponent", er.fitted_crit_exponent);
  rep.add_result("fitted_q_exponent", er.fitted_q_exponent);
  rep.add_result("fitted_p_exponent", er.fitted_p_exponent);
  const char* label = er.case_label == ExpansionCase::Ngamma_gt_p2   ? "Ngamma_gt_p2"
                      : er.case_label == ExpansionCase::Ngamma_eq_p2 ? "Ngamma_eq_p2"
                                                                     : "Ngamma_lt_p2";
  rep.add_result("case_label", label);
  rep.add_result("log_correction_detected", er.log_correction_detected ? "true" : "false");
  rep.add_result("power_fit_rss", er.power_fit_rss);
  rep.add_result("log_model_rss", er.log_model_rss);
  std::vector<std::vector<double>> rows;
  for (const auto& r : er.rows)
    rows.push_back({r.eps, r.grad_p_energy, r.crit_norm_pstar, r.lower_norm_q, r.norm_p_p});
  write_csv((fs::path(out_dir) / "expansion.csv").string(),
            {"epsilon", "grad_p_energy", "crit_norm_pstar", "lower_norm_q", "norm_p_p"},
            rows);
  rep.add_artifact("expansion", "expansion.csv");
}

void run_concentration(const ExperimentConfig& cfg, const std::string& out_dir,
                       RunReport& rep) {
  Field u = read_field(cfg.field_in);
  const double ps = u.grid.params.p_star();
  const double nrm = lp_norm(u, ps);
  if (!(nrm > 0.0)) throw ValidationError("concentration: zero field");
  for (auto& v : u.values) v /= nrm;
  const ConcentrationProfile prof = concentration_profile(u, cfg.rho_list);
  rep.add_result("half_rho", prof.half_rho);
  for (std::size_t j = 0; j < prof.center.size(); ++j)
    rep.add_result("center_y" + std::to_string(j), prof.center[j]);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < prof.rhos.size(); ++k)
    rows.push_back({prof.rhos[k], prof.q_values[k]});
  write_csv((fs::path(out_dir) / "concentration.csv").string(), {"rho", "q_value"}, rows);
  rep.add_artifact("concentration", "concentration.csv");
}

void run_inequality_check(const ExperimentConfig& cfg, const std::string& out_dir,
                          RunReport& rep) {
  const int dim = cfg.m + cfg.n;
  std::vector<std::vector<double>> rows;
  for (double p : cfg.p_list) {
    double cmin[2] = {0.0, 0.0};
    double defect_min[2] = {0.0, 0.0};
    const std::uint64_t seeds[2] = {cfg.solver.seed, cfg.seed2};
    for (int s = 0; s < 2; ++s) {
      std::mt19937_64 rng(seeds[s]);
      double c_best = 1e300, d_min = 1e300;
      std::vector<double> gu(std::size_t(dim), 0.0), gv(std::size_t(dim), 0.0);
      for (long k = 0; k < cfg.samples; ++k) {
        const double u = std::exp(uniform_from(rng, -0.7, 0.7));
        const double v = std::exp(uniform_from(rng, -0.7, 0.7));
        for (int a = 0; a < dim; ++a) {
          gu[std::size_t(a)] = uniform_from(rng, -1.0, 1.0);
          gv[std::size_t(a)] = uniform_from(rng, -1.0, 1.0);
        }
        const double d = log_gradient_defect(u, v, gu, gv, p);
        d_min = std::min(d_min, d);
        const double ref = log_gradient_reference(u, v, gu, gv, p);
        if (ref > 1e-12) c_best = std::min(c_best, d / ref);
      }
      cmin[s] = c_best;
      defect_min[s] = d_min;
    }
    const double spread = std::abs(cmin[0] - cmin[1]) / std::max(cmin[0], cmin[1]);
    const std::string tag = "p_" + format_full(p);
    rep.add_result(tag + "_c_seed1", cmin[0]);
    rep.add_result(tag + "_c_seed2", cmin[1]);
    rep.add_result(tag + "_c_spread", spread);
    rep.add_result(tag + "_min_defect", std::min(defect_min[0], defect_min[1]));
    rows.push_back({p, cmin[0], cmin[1], spread, std::min(defect_min[0], defect_min[1])});
  }
  write_csv((fs::path(out_dir) / "inequality.csv").string(),
            {"p", "c_seed1", "c_seed2", "c_spread", "min_defect"}, rows);
  rep.add_artifact("inequality", "inequality.csv");
}

} // namespace

RunReport run(const ExperimentConfig& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunReport rep;
  rep.command = command_name(config.command);
  for (const auto& [k, v] : config.echo()) rep.config.emplace_back(k, v);

  const double t0 = now_seconds();
  try {
    switch (config.command) {
      case Command::best_constant: run_best_constant(config, out_dir, rep); break;
      case Command::eigenvalue: run_eigenvalue(config, out_dir, rep); break;
      case Command::brezis_nirenberg: run_brezis_nirenberg(config, out_dir, rep); break;
      case Command::decay: run_decay(config, out_dir, rep); break;
      case Command::expansion: run_expansion(config, out_dir, rep); break;
      case Command::concentration: run_concentration(config, out_dir, rep); break;
      case Command::inequality_check: run_inequality_check(config, out_dir, rep); break;
    }
    rep.add_result("status", "ok");
  } catch (const SolverError& e) {
    rep.add_result("status", "failed");
    rep.add_result("error", std::string(e.what()));
    if (!e.trace().empty()) {
      write_csv((fs::path(out_dir) / "trace.csv").string(), {"iteration", "objective"},
                trace_rows(e.trace()));
      rep.add_artifact("trace", "trace.csv");
    }
    rep.wall_time_seconds = now_seconds() - t0;
    rep.write((fs::path(out_dir) / "report.txt").string());
    throw;
  }
  rep.wall_time_seconds = now_seconds() - t0;
  rep.write((fs::path(out_dir) / "report.txt").string());
  return rep;
}

} // namespace grushin
