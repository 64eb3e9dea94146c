#include "aplm/cli_config.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "aplm/report.hpp"
#include "aplm/simulation.hpp"

namespace aplm {

namespace {

void add_covariance_flags(CLI::App* cmd, RunConfig& cfg, std::string& cov_name) {
  cmd->add_option("--covariance,--cov", cov_name, "working covariance: wi|ex|ar1|rsm")
      ->default_val("wi");
  cmd->add_option("--alpha", cfg.alpha,
                  "correlation nuisance (EX/AR1) or RSM decay rate; "
                  "estimated from a WI pre-fit when omitted for EX/AR1");
  cmd->add_option("--rsm-tau2", cfg.rsm.tau2, "RSM measurement-error variance");
  cmd->add_option("--rsm-nu2", cfg.rsm.nu2, "RSM random-intercept variance");
  cmd->add_option("--rsm-omega2", cfg.rsm.omega2, "RSM serial-process variance");
  cmd->add_flag("--with-time", cfg.with_time, "input CSV carries a trailing time column");
}

// Flat key=value config support: file entries become --key=value tokens
// placed ahead of the explicit flags, which therefore take precedence.
std::vector<std::string> inject_config_file(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;

  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  std::vector<std::string> injected;
  injected.push_back(args.front());  // the subcommand
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config file " + path + " line " + std::to_string(line_no) +
                       ": expected key=value");
    injected.push_back("--" + line.substr(0, eq) + "=" + line.substr(eq + 1));
  }
  injected.insert(injected.end(), args.begin() + 1, args.end());
  return injected;
}

void add_spline_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--knots", cfg.knots, "interior knot count")->default_val(4);
  cmd->add_option("--degree", cfg.degree, "spline degree")->default_val(3);
}

void add_penalty_flags(CLI::App* cmd, RunConfig& cfg, std::string& pen_name) {
  cmd->add_option("--penalty", pen_name, "penalty: scad|hard")->default_val("scad");
  cmd->add_option("--scad-a", cfg.scad_a, "SCAD shape parameter")->default_val(3.7);
  cmd->add_option("--epsilon", cfg.epsilon, "LQA ridge")->default_val(1e-6);
  cmd->add_option("--grid-min", cfg.grid.min, "smallest lambda")->default_val(1e-3);
  cmd->add_option("--grid-max", cfg.grid.max, "largest lambda")->default_val(5.0);
  cmd->add_option("--grid-size", cfg.grid.size, "lambda grid size")->default_val(40);
}

WorkingCovarianceSpec covariance_from_config(const RunConfig& cfg) {
  WorkingCovarianceSpec spec;
  spec.kind = cfg.covariance;
  spec.alpha = cfg.alpha;
  spec.rsm = cfg.rsm;
  return spec;
}

struct PreparedData {
  ClusteredDataset data;
  CenteringRecord centering;
  std::vector<std::pair<double, double>> z_ranges;
  std::vector<SplineSpace> spaces;
  WorkingCovarianceSpec cov;
  bool alpha_estimated = false;
};

PreparedData prepare(const RunConfig& cfg) {
  PreparedData prep;
  ClusteredDataset raw = load_dataset_csv(cfg.data_path);
  if (cfg.with_time && !raw.clusters.front().times.has_value())
    throw DataError("time column declared with --with-time but missing from " + cfg.data_path);

  auto centered = center_x(raw);
  auto rescaled = rescale_z(centered.first);
  prep.data = std::move(rescaled.first);
  prep.centering = std::move(centered.second);
  prep.z_ranges = std::move(rescaled.second);
  for (int l = 0; l < prep.data.d2; ++l) prep.spaces.push_back(make_space(cfg.degree, cfg.knots));

  prep.cov = covariance_from_config(cfg);
  if ((cfg.covariance == CovKind::EX || cfg.covariance == CovKind::AR1) && !cfg.alpha_given) {
    const FitResult wi = fit_unpenalized(prep.data, prep.spaces, WorkingCovarianceSpec{});
    prep.cov.alpha = estimate_alpha_moment(cfg.covariance, wi.residuals);
    prep.alpha_estimated = true;
  }
  return prep;
}

nlohmann::json coefficients_json(const Eigen::VectorXd& beta, const Eigen::VectorXd& se,
                                 const std::vector<int>* active) {
  nlohmann::json arr = nlohmann::json::array();
  for (int k = 0; k < beta.size(); ++k) {
    nlohmann::json entry;
    entry["name"] = "x" + std::to_string(k + 1);
    entry["estimate"] = beta(k);
    entry["se"] = se(k);
    if (active != nullptr)
      entry["active"] = std::find(active->begin(), active->end(), k) != active->end();
    arr.push_back(entry);
  }
  return arr;
}

nlohmann::json diagnostics_json(const PreparedData& prep, const FitDiagnostics& diag) {
  nlohmann::json d;
  d["n"] = prep.data.n;
  d["n_total"] = prep.data.n_total;
  d["d1"] = prep.data.d1;
  d["d2"] = prep.data.d2;
  d["schur_condition"] = diag.schur_condition;
  d["hbb_min_eigen"] = diag.hbb_min_eigen;
  d["hbb_max_eigen"] = diag.hbb_max_eigen;
  d["hbb_rank"] = diag.hbb_rank;
  d["structural_nullity"] = diag.structural_nullity;
  d["warnings"] = diag.warnings;
  d["alpha"] = prep.cov.alpha;
  d["alpha_estimated"] = prep.alpha_estimated;
  nlohmann::json ranges = nlohmann::json::array();
  for (const auto& [lo, hi] : prep.z_ranges) ranges.push_back({lo, hi});
  d["z_ranges"] = ranges;
  return d;
}

int run_fit(const RunConfig& cfg) {
  PreparedData prep = prepare(cfg);
  const FitResult fit = fit_unpenalized(prep.data, prep.spaces, prep.cov);
  write_curves_csv(cfg.curves_path, fit.eta);

  Report report = Report::make("fit");
  report.body["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  report.body["se"] = std::vector<double>(fit.se.data(), fit.se.data() + fit.se.size());
  report.body["coefficients"] = coefficients_json(fit.beta, fit.se, nullptr);
  // Intercept on the original covariate scale; the shift itself refers to
  // centered covariates.
  report.body["intercept"] = fit.intercept_shift - prep.centering.x_means.dot(fit.beta);
  report.body["intercept_shift"] = fit.intercept_shift;
  report.body["covariance"] = cov_kind_name(prep.cov.kind);
  report.body["eta_curves_path"] = cfg.curves_path;
  report.body["diagnostics"] = diagnostics_json(prep, fit.diagnostics);
  write_report(report, cfg.out_path);
  std::cout << "fit: n=" << prep.data.n << " n_total=" << prep.data.n_total
            << " report=" << cfg.out_path << " curves=" << cfg.curves_path << "\n";
  return kExitOk;
}

int run_select(const RunConfig& cfg) {
  PreparedData prep = prepare(cfg);
  ProfiledSystem sys(prep.data, prep.spaces, prep.cov);
  const FitResult full = fit_unpenalized(sys);

  PenaltySpec penalty;
  penalty.kind = cfg.penalty;
  penalty.a = cfg.scad_a;
  penalty.epsilon = cfg.epsilon;
  auto [fit, path] = select_lambda(sys, full, penalty, cfg.grid.values());

  Report report = Report::make("select");
  report.body["beta_p"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  report.body["se"] = std::vector<double>(fit.se.data(), fit.se.data() + fit.se.size());
  std::vector<int> active_names;
  for (int k : fit.active_set) active_names.push_back(k + 1);  // 1-based, matches x{k}
  report.body["active_set"] = active_names;
  report.body["coefficients"] = coefficients_json(fit.beta, fit.se, &fit.active_set);
  report.body["lambda"] = fit.lambda_scalar;
  report.body["lambda_vector"] =
      std::vector<double>(fit.lambda_vector.data(), fit.lambda_vector.data() + fit.lambda_vector.size());
  report.body["bic"] = fit.bic;
  report.body["effective_params"] = fit.effective_params;
  report.body["iterations"] = fit.iterations;
  report.body["converged"] = fit.converged;
  report.body["penalty"] = penalty_kind_name(cfg.penalty);
  report.body["covariance"] = cov_kind_name(prep.cov.kind);
  nlohmann::json bic_path = nlohmann::json::array();
  for (const auto& rec : path.records) {
    nlohmann::json entry;
    entry["lambda"] = rec.lambda;
    entry["active_size"] = rec.active_size;
    entry["bic"] = rec.bic;
    entry["e_lambda"] = rec.e_lambda;
    entry["converged"] = rec.converged;
    bic_path.push_back(entry);
  }
  report.body["bic_path"] = bic_path;
  report.body["diagnostics"] = diagnostics_json(prep, full.diagnostics);
  write_report(report, cfg.out_path);
  std::cout << "select: lambda=" << fit.lambda_scalar << " active=" << fit.active_set.size()
            << "/" << prep.data.d1 << " bic=" << fit.bic << " report=" << cfg.out_path << "\n";
  return kExitOk;
}

SimConfig sim_config_from(const RunConfig& cfg) {
  SimConfig sim;
  sim.n = cfg.sim_n;
  sim.replicates = cfg.replicates;
  sim.seed = cfg.seed;
  sim.working = cfg.covariance;
  sim.penalty = cfg.penalty;
  sim.degree = cfg.degree;
  sim.interior_knots = cfg.knots;
  sim.scad_a = cfg.scad_a;
  sim.epsilon = cfg.epsilon;
  sim.grid = cfg.grid;
  sim.threads = cfg.threads;
  return sim;
}

int run_simulate(const RunConfig& cfg) {
  const SimConfig sim = sim_config_from(cfg);
  const SimMetrics metrics = run_study(sim);
  std::vector<SimTableRow> rows;
  rows.push_back({sim.n, penalty_kind_name(sim.penalty), cov_kind_name(sim.working),
                  metrics.penalized});
  rows.push_back({sim.n, "oracle", cov_kind_name(sim.working), metrics.oracle});
  write_table1_csv(cfg.out_path, rows);
  std::cout << "simulate: n=" << sim.n << " cov=" << cov_kind_name(sim.working)
            << " penalty=" << penalty_kind_name(sim.penalty) << " C=" << metrics.penalized.c
            << " I=" << metrics.penalized.i << " MRME=" << metrics.penalized.mrme
            << " RMSE=" << metrics.penalized.rmse << " excluded=" << metrics.excluded
            << " out=" << cfg.out_path << "\n";
  return kExitOk;
}

int run_bench(const RunConfig& cfg, bool table1) {
  const int ns[] = {100, 200, 400};
  const CovKind covs[] = {CovKind::EX, CovKind::AR1, CovKind::WI};
  const PenaltyKind penalties[] = {PenaltyKind::SCAD, PenaltyKind::HARD};
  const char* coef_names[] = {"beta1", "beta2", "beta5"};

  std::vector<SimTableRow> t1;
  std::vector<SdTableRow> t2;
  for (int n : ns)
    for (CovKind cov : covs) {
      for (PenaltyKind pen : penalties) {
        RunConfig cell = cfg;
        cell.sim_n = n;
        cell.covariance = cov;
        cell.penalty = pen;
        const SimMetrics metrics = run_study(sim_config_from(cell));
        t1.push_back({n, penalty_kind_name(pen), cov_kind_name(cov), metrics.penalized});
        for (std::size_t k = 0; k < 3; ++k)
          t2.push_back({n, penalty_kind_name(pen), cov_kind_name(cov), coef_names[k],
                        metrics.sd_penalized[k]});
        if (pen == PenaltyKind::SCAD) {
          t1.push_back({n, "oracle", cov_kind_name(cov), metrics.oracle});
          for (std::size_t k = 0; k < 3; ++k)
            t2.push_back({n, "oracle", cov_kind_name(cov), coef_names[k], metrics.sd_oracle[k]});
        }
        std::cout << "bench: n=" << n << " cov=" << cov_kind_name(cov)
                  << " penalty=" << penalty_kind_name(pen) << " done\n";
      }
    }
  if (table1)
    write_table1_csv(cfg.out_path, t1);
  else
    write_table2_csv(cfg.out_path, t2);
  std::cout << "bench table written to " << cfg.out_path << "\n";
  return kExitOk;
}

int run_basis_dump(const RunConfig& cfg) {
  write_basis_csv(cfg.out_path, make_space(cfg.degree, cfg.knots), cfg.grid_points);
  std::cout << "basis-dump: q=" << cfg.degree << " knots=" << cfg.knots
            << " grid=" << cfg.grid_points << " out=" << cfg.out_path << "\n";
  return kExitOk;
}

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig cfg;
  CLI::App app{"penalized spline estimation and variable selection for clustered data"};
  app.require_subcommand(1);

  std::string cov_name = "wi";
  std::string pen_name = "scad";
  std::string config_path;

  auto new_subcommand = [&](const char* name, const char* help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--config", config_path, "flat key=value config file; flags override it");
    return cmd;
  };

  CLI::App* fit = new_subcommand("fit", "unpenalized profiled fit with curve export");
  fit->add_option("--data", cfg.data_path, "input CSV")->required();
  add_covariance_flags(fit, cfg, cov_name);
  add_spline_flags(fit, cfg);
  fit->add_option("--out", cfg.out_path, "JSON report path")->default_val("fit_report.json");
  fit->add_option("--curves", cfg.curves_path, "curve CSV path")->default_val("eta_curves.csv");

  CLI::App* select = new_subcommand("select", "penalized variable selection with BIC tuning");
  select->add_option("--data", cfg.data_path, "input CSV")->required();
  add_covariance_flags(select, cfg, cov_name);
  add_spline_flags(select, cfg);
  add_penalty_flags(select, cfg, pen_name);
  select->add_option("--out", cfg.out_path, "JSON report path")->default_val("select_report.json");

  CLI::App* simulate = new_subcommand("simulate", "seeded Monte Carlo study, one cell");
  simulate->add_option("--n", cfg.sim_n, "cluster count")->default_val(100);
  simulate->add_option("--reps", cfg.replicates, "replicates")->default_val(100);
  simulate->add_option("--seed", cfg.seed, "master seed")->default_val(1);
  simulate->add_option("--threads", cfg.threads, "worker threads")->default_val(1);
  add_covariance_flags(simulate, cfg, cov_name);
  add_spline_flags(simulate, cfg);
  add_penalty_flags(simulate, cfg, pen_name);
  simulate->add_option("--out", cfg.out_path, "output CSV")->default_val("sim_table.csv");

  for (const char* name : {"bench-table1", "bench-table2"}) {
    CLI::App* bench = new_subcommand(name, "full simulation grid");
    bench->add_option("--reps", cfg.replicates, "replicates per cell")->default_val(100);
    bench->add_option("--seed", cfg.seed, "master seed")->default_val(1);
    bench->add_option("--threads", cfg.threads, "worker threads")->default_val(1);
    add_spline_flags(bench, cfg);
    bench->add_option("--grid-min", cfg.grid.min)->default_val(1e-3);
    bench->add_option("--grid-max", cfg.grid.max)->default_val(5.0);
    bench->add_option("--grid-size", cfg.grid.size)->default_val(40);
    bench->add_option("--out", cfg.out_path, "output CSV")
        ->default_val(std::string(name) + ".csv");
  }

  CLI::App* basis = new_subcommand("basis-dump", "evaluate the basis on a grid");
  basis->add_option("--q", cfg.degree, "spline degree")->default_val(3);
  basis->add_option("--knots", cfg.knots, "interior knot count")->default_val(4);
  basis->add_option("--grid", cfg.grid_points, "grid size")->default_val(201);
  basis->add_option("--out", cfg.out_path, "output CSV")->default_val("basis.csv");

  const std::vector<std::string> expanded = inject_config_file(args);
  std::vector<const char*> argv;
  argv.push_back("aplmsel");
  for (const auto& a : expanded) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()) + "\n\n" + app.help());
  }

  CLI::App* active = app.get_subcommands().front();
  cfg.command = active->get_name();
  cfg.covariance = cov_kind_from_name(cov_name);
  cfg.penalty = penalty_kind_from_name(pen_name);
  const CLI::Option* alpha_opt = active->get_option_no_throw("--alpha");
  cfg.alpha_given = alpha_opt != nullptr && alpha_opt->count() > 0;

  if (cfg.covariance == CovKind::RSM) {
    if (cfg.command == "simulate")
      throw UsageError("simulate supports wi|ex|ar1 working covariances");
    if (!cfg.with_time)
      throw UsageError("--covariance rsm requires --with-time (CSV must carry a time column)");
    if (!cfg.alpha_given) throw UsageError("--covariance rsm requires --alpha");
  }
  if (cfg.command == "basis-dump" && cfg.grid_points < 2)
    throw UsageError("--grid must be at least 2");
  return cfg;
}

int run_command(const RunConfig& cfg) {
  if (cfg.command == "fit") return run_fit(cfg);
  if (cfg.command == "select") return run_select(cfg);
  if (cfg.command == "simulate") return run_simulate(cfg);
  if (cfg.command == "bench-table1") return run_bench(cfg, true);
  if (cfg.command == "bench-table2") return run_bench(cfg, false);
  if (cfg.command == "basis-dump") return run_basis_dump(cfg);
  throw UsageError("unknown command: " + cfg.command);
}

}  // namespace aplm
