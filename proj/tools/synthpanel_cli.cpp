// Command-line front end: estimate / bootstrap / diagnose on user panels,
// simulate for synthetic fixtures, oracle for grid-certified weights.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "synthpanel/pipeline.hpp"
#include "synthpanel/synthgen.hpp"

namespace {

using namespace synthpanel;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "synthpanel_out";
  double screen_threshold = 50.0;
  std::optional<double> zeta;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_threads) {
  cmd->add_option("--config", args.config_path, "run configuration file")->required();
  cmd->add_option("--out", args.out_dir, "output directory (default synthpanel_out)");
  cmd->add_option("--screen-threshold", args.screen_threshold,
                  "trend-divergence flag threshold, outcome units per year (default 50)");
  cmd->add_option_function<double>(
      "--zeta", [&args](double v) { args.zeta = v; },
      "override the SDID regularization strength");
  if (with_threads)
    cmd->add_option("--threads", args.threads, "bootstrap worker threads (default 1)")
        ->check(CLI::PositiveNumber);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file " + path);
  RunConfig cfg = parse_config(in);
  if (cfg.input_path.empty()) throw std::invalid_argument("config: missing key input");
  // Relative input paths resolve against the config file's directory.
  std::filesystem::path input(cfg.input_path);
  if (input.is_relative()) {
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    cfg.input_path = (base / input).string();
  }
  return cfg;
}

int run_estimate_like(const CommonArgs& args, bool with_bootstrap) {
  RunConfig cfg = load_config(args.config_path);
  PreparedRun prep = prepare_run(load_counts_panel(cfg.input_path), cfg.spec);

  RunOptions opts;
  opts.with_bootstrap = with_bootstrap;
  opts.threads = args.threads;
  opts.zeta = args.zeta;
  opts.screen_threshold = args.screen_threshold;

  RunResult result = run_pipeline(prep, cfg.estimator, cfg.bootstrap, opts);
  export_run(result, args.out_dir);
  write_run_summary(std::cout, result);
  std::cout << "\nartifacts written to " << args.out_dir << "\n";
  return 0;
}

int run_diagnose(const CommonArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  PreparedRun prep = prepare_run(load_counts_panel(cfg.input_path), cfg.spec);

  RunResult result;
  result.spec = prep.spec;
  result.validation = prep.validation;
  result.baseline_level = prep.baseline_level;
  result.level_stats = table_stats(prep.level_years, prep.spec);
  result.residual_stats = table_stats(prep.residual_years, prep.spec);
  result.hull_levels = convex_hull_check(prep.level_years, prep.spec);
  result.hull_residuals = convex_hull_check(prep.residual_years, prep.spec);
  result.screen = trend_divergence_screen(prep.residual_years, prep.spec, args.screen_threshold);

  export_run(result, args.out_dir);
  write_run_summary(std::cout, result);
  std::cout << "\nreports written to " << args.out_dir << "\n";
  return 0;
}

int run_simulate(const GeneratorConfig& cfg, const std::string& out_path) {
  auto [panel, tau] = generate_factor_panel(cfg);
  std::ofstream out(out_path);
  if (!out) throw io_error("cannot write " + out_path);
  emit_counts_csv(out, panel);
  if (!out) throw io_error("write failed for " + out_path);

  TreatmentSpec spec = generator_spec(cfg);
  std::cout << "wrote " << panel.n_units() << " units x " << panel.n_periods() << " periods to "
            << out_path << "\n"
            << "treated_unit = " << spec.treated_unit << ", t0_year = " << spec.t0_year
            << ", true tau = " << tau << "\n";
  return 0;
}

// Instance CSV for the oracle: header `treated,<donor>,...`, one row per
// pre-treatment period.
int run_oracle(const std::string& input_path, double step) {
  std::ifstream in(input_path);
  if (!in) throw io_error("cannot open instance file " + input_path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("oracle: empty instance file");
  auto header = detail::split(detail::trim(line), ',');
  if (header.size() < 2 || detail::trim(header[0]) != "treated")
    throw std::invalid_argument("oracle: header must be treated,<donor>,...");
  std::vector<std::string> donor_ids;
  for (std::size_t i = 1; i < header.size(); ++i) donor_ids.emplace_back(detail::trim(header[i]));

  std::vector<double> treated;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    auto cols = detail::split(sv, ',');
    if (cols.size() != header.size())
      throw std::invalid_argument("oracle line " + std::to_string(line_no) + ": column count");
    std::vector<double> row;
    for (auto col : cols) {
      auto v = detail::parse_double(col);
      if (!v) throw std::invalid_argument("oracle line " + std::to_string(line_no) + ": bad number");
      row.push_back(*v);
    }
    treated.push_back(row[0]);
    rows.push_back(std::vector<double>(row.begin() + 1, row.end()));
  }
  if (rows.empty()) throw std::invalid_argument("oracle: no data rows");

  Matrix donors(rows.size(), donor_ids.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < donor_ids.size(); ++c) donors(r, c) = rows[r][c];

  GridOracleResult grid = grid_oracle_weights(treated, donors, step);
  WeightVector solved = solve_weights(treated, donors, FitTarget::per_period, donor_ids);
  std::vector<double> fit = mat_vec(donors, solved.weights);
  double solver_obj = 0.0;
  for (std::size_t r = 0; r < fit.size(); ++r)
    solver_obj += (treated[r] - fit[r]) * (treated[r] - fit[r]);

  std::cout << "grid oracle (step " << step << ", " << grid.points_evaluated << " points)\n";
  for (std::size_t c = 0; c < donor_ids.size(); ++c)
    std::cout << "  " << donor_ids[c] << "," << grid.weights[c] << "\n";
  std::cout << "  objective," << grid.objective << "\n";
  std::cout << "solver\n";
  for (std::size_t c = 0; c < donor_ids.size(); ++c)
    std::cout << "  " << donor_ids[c] << "," << solved.weights[c] << "\n";
  std::cout << "  objective," << solver_obj << "\n";
  std::cout << (solver_obj <= grid.objective + 1e-6 ? "certified: solver <= grid + 1e-6"
                                                    : "WARNING: solver above grid objective")
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthpanel: synthetic-control and synthetic-DiD toolkit for monthly count panels"};
  app.require_subcommand(1);

  CommonArgs est_args, boot_args, diag_args;
  CLI::App* estimate = app.add_subcommand("estimate", "full SCM/SDID run with reports");
  add_common(estimate, est_args, false);
  CLI::App* bootstrap = app.add_subcommand("bootstrap", "estimate plus donor-bootstrap CIs");
  add_common(bootstrap, boot_args, true);
  CLI::App* diagnose = app.add_subcommand("diagnose", "hull and trend-screen reports only");
  add_common(diagnose, diag_args, false);

  GeneratorConfig gen;
  std::string sim_out = "simulated_counts.csv";
  std::string months_arg;
  CLI::App* simulate = app.add_subcommand("simulate", "generate a factor-model panel fixture");
  simulate->add_option("--units", gen.n_units, "unit count (first unit is treated)");
  simulate->add_option("--years", gen.n_years, "total years");
  simulate->add_option("--pre-years", gen.pre_years, "pre-treatment years (default 4)");
  simulate->add_option("--start-year", gen.start_year, "first panel year (default 2013)");
  simulate->add_option("--tau", gen.tau, "treatment effect added to treated post cells");
  simulate->add_option("--noise", gen.noise_sd, "cell noise standard deviation");
  simulate->add_option("--factors", gen.n_factors, "latent factor count (default 2)");
  simulate->add_option("--loading-scale", gen.loading_scale, "factor loading scale (default 10)");
  simulate->add_option("--seed", gen.seed, "generator seed");
  simulate->add_option("--months", months_arg, "comma list of season months (default 4..10)");
  simulate->add_option("--out", sim_out, "output counts CSV path")->required();

  std::string oracle_input;
  double oracle_step = 0.001;
  CLI::App* oracle = app.add_subcommand("oracle", "grid-certified weights for a small instance");
  oracle->add_option("--step", oracle_step, "simplex grid resolution (default 0.001)");
  oracle->add_option("--input", oracle_input, "instance CSV: header treated,<donor>,...")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*estimate) return run_estimate_like(est_args, false);
    if (*bootstrap) return run_estimate_like(boot_args, true);
    if (*diagnose) return run_diagnose(diag_args);
    if (*simulate) {
      if (!months_arg.empty()) {
        gen.season_months.clear();
        for (auto part : detail::split(months_arg, ',')) {
          auto m = detail::parse_long(part);
          if (!m || *m < 1 || *m > 12)
            throw std::invalid_argument("simulate: month outside 1..12 in --months");
          gen.season_months.insert(static_cast<int>(*m));
        }
      }
      return run_simulate(gen, sim_out);
    }
    if (*oracle) return run_oracle(oracle_input, oracle_step);
  } catch (const io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
