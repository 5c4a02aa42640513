// Acceptance suite: exercises the toolkit's end-to-end guarantees and prints
// one PASS/FAIL line per criterion. Exit code 0 iff everything passed.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "synthpanel/pipeline.hpp"
#include "synthpanel/synthgen.hpp"
#include "test_helpers.hpp"

using namespace synthpanel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double residual_objective(std::span<const double> target, const Matrix& donors,
                          std::span<const double> weights) {
  std::vector<double> fit = mat_vec(donors, weights);
  double obj = 0.0;
  for (std::size_t r = 0; r < fit.size(); ++r) obj += (target[r] - fit[r]) * (target[r] - fit[r]);
  return obj;
}

// 1. Solver-oracle equivalence over 500 random instances, D in 1..3, P in 2..8.
Outcome criterion1() {
  auto start = std::chrono::steady_clock::now();
  Xoshiro256pp rng(20250401);
  int failures = 0;
  double worst_excess = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t d = 1 + rng.next_index(3);
    std::size_t p = 2 + rng.next_index(7);
    Matrix donors(p, d);
    for (auto& v : donors.data) v = rng.next_normal();
    std::vector<double> treated(p);
    for (auto& v : treated) v = rng.next_normal();

    WeightVector solved = solve_weights(treated, donors);
    GridOracleResult grid = grid_oracle_weights(treated, donors, 0.001);
    double excess = residual_objective(treated, donors, solved.weights) - grid.objective;
    worst_excess = std::max(worst_excess, excess);
    if (excess > 1e-6) ++failures;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Outcome out;
  out.pass = failures == 0 && secs < 60.0;
  std::ostringstream msg;
  msg << "500 instances, worst solver-minus-grid excess " << worst_excess << ", "
      << secs << " s (< 60 s required)";
  out.detail = msg.str();
  return out;
}

// 2. Exact recovery of constructed convex combinations.
Outcome criterion2() {
  Xoshiro256pp rng(20250402);
  int failures = 0;
  double worst_err = 0.0, worst_rmse = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = 6;
    Matrix donors(p, 3);
    for (auto& v : donors.data) v = rng.next_normal();
    double theta = 0.05 + 0.9 * rng.next_double();
    std::vector<double> treated(p);
    for (std::size_t r = 0; r < p; ++r)
      treated[r] = theta * donors(r, 0) + (1.0 - theta) * donors(r, 1);

    WeightVector solved = solve_weights(treated, donors);
    double err = std::max({std::abs(solved.weights[0] - theta),
                           std::abs(solved.weights[1] - (1.0 - theta)),
                           std::abs(solved.weights[2])});
    double rmse = std::sqrt(residual_objective(treated, donors, solved.weights) /
                            static_cast<double>(p));
    worst_err = std::max(worst_err, err);
    worst_rmse = std::max(worst_rmse, rmse);
    if (err > 1e-4 || rmse > 1e-6) ++failures;
  }
  Outcome out;
  out.pass = failures == 0;
  std::ostringstream msg;
  msg << "100 instances, worst weight error " << worst_err << " (<= 1e-4), worst pre-RMSE "
      << worst_rmse << " (< 1e-6)";
  out.detail = msg.str();
  return out;
}

// 3. Residual identity on balanced generated panels.
Outcome criterion3() {
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    GeneratorConfig cfg;
    cfg.n_units = 9;
    cfg.n_years = 7;
    cfg.pre_years = 4;
    cfg.seed = seed;
    cfg.tau = -100.0;
    auto [panel, tau] = generate_factor_panel(cfg);
    TreatmentSpec spec = generator_spec(cfg);
    ResidualPanel rp = residualize(panel, spec);

    for (std::size_t u = 0; u < rp.panel.n_units(); ++u) {
      std::map<int, std::pair<double, int>> sums;
      for (std::size_t p = 0; p < rp.panel.n_periods(); ++p) {
        if (rp.panel.periods[p].year > spec.t0_year) continue;
        auto& acc = sums[rp.panel.periods[p].month];
        acc.first += rp.panel.value(u, p);
        acc.second += 1;
      }
      for (const auto& [month, acc] : sums)
        worst = std::max(worst, std::abs(acc.first / acc.second));
    }
  }
  Outcome out;
  out.pass = worst <= 1e-9;
  std::ostringstream msg;
  msg << "worst per-unit per-month pre-treatment residual mean " << worst << " (<= 1e-9)";
  out.detail = msg.str();
  return out;
}

// 4. DiD identities: zero on additive panels, tau recovered when injected.
Outcome criterion4() {
  double worst_null = 0.0, worst_tau = 0.0;
  for (std::uint64_t seed : {11, 12, 13}) {
    GeneratorConfig cfg;
    cfg.n_units = 8;
    cfg.n_years = 7;
    cfg.pre_years = 4;
    cfg.n_factors = 0;
    cfg.noise_sd = 0.0;
    cfg.seed = seed;

    cfg.tau = 0.0;
    auto [null_panel, tau0] = generate_factor_panel(cfg);
    TreatmentSpec spec = generator_spec(cfg);
    YearSeries null_years = annualize(residualize(null_panel, spec), spec);
    worst_null =
        std::max(worst_null, std::abs(sdid_estimate(null_years, spec).effect.average_effect));

    cfg.tau = -137.25;
    auto [tau_panel, tau1] = generate_factor_panel(cfg);
    YearSeries tau_years = annualize(residualize(tau_panel, spec), spec);
    worst_tau = std::max(
        worst_tau, std::abs(sdid_estimate(tau_years, spec).effect.average_effect - cfg.tau));
  }
  Outcome out;
  out.pass = worst_null <= 1e-8 && worst_tau <= 1e-8;
  std::ostringstream msg;
  msg << "null panel |tau| " << worst_null << ", injected-effect error " << worst_tau
      << " (both <= 1e-8)";
  out.detail = msg.str();
  return out;
}

// 5. Bootstrap coverage on the desk-scale mirror of the study design:
//    10 units, 4 pre + 3 post years, noise sd 50, tau = -150, B=200, m=7.
Outcome criterion5() {
  auto start = std::chrono::steady_clock::now();
  const double tau = -150.0;
  int covered_scm = 0, covered_sdid = 0;
  const int reps = 100;
  for (int mc = 0; mc < reps; ++mc) {
    GeneratorConfig cfg;
    cfg.n_units = 10;
    cfg.n_years = 7;
    cfg.pre_years = 4;
    cfg.noise_sd = 50.0;
    cfg.tau = tau;
    cfg.seed = 9000 + static_cast<std::uint64_t>(mc);
    auto [panel, true_tau] = generate_factor_panel(cfg);
    TreatmentSpec spec = generator_spec(cfg);
    EstimationFrame frame = frame_from_years(annualize(residualize(panel, spec), spec), spec);

    BootstrapResult scm =
        bootstrap_ci(frame, EstimatorOptions{EstimatorKind::scm}, 200, 7, 0.95, cfg.seed, 1);
    if (scm.lower <= tau && tau <= scm.upper) ++covered_scm;
    BootstrapResult sdid =
        bootstrap_ci(frame, EstimatorOptions{EstimatorKind::sdid}, 200, 7, 0.95, cfg.seed, 1);
    if (sdid.lower <= tau && tau <= sdid.upper) ++covered_sdid;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Outcome out;
  out.pass = covered_scm >= 90 && covered_sdid >= 90 && secs < 300.0;
  std::ostringstream msg;
  msg << "coverage of tau=-150: scm " << covered_scm << "/100, sdid " << covered_sdid
      << "/100 (>= 90 required), " << secs << " s (< 300 s required)";
  if (!out.pass && (covered_scm < 90 || covered_sdid < 90))
    msg << "; donor resampling cannot see the treated unit's own post-period noise, which "
           "caps percentile-CI coverage below the nominal level on exchangeable panels";
  out.detail = msg.str();
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// 6. Byte-identical replicate dumps from the `bootstrap` subcommand at any
//    parallelism setting.
Outcome criterion6() {
  fs::path dir = fs::temp_directory_path() / "synthpanel_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  GeneratorConfig cfg;
  cfg.n_units = 9;
  cfg.n_years = 7;
  cfg.pre_years = 4;
  cfg.noise_sd = 40.0;
  cfg.tau = -120.0;
  cfg.seed = 77;
  auto [panel, tau] = generate_factor_panel(cfg);
  {
    std::ofstream out(dir / "counts.csv");
    emit_counts_csv(out, panel);
  }
  {
    std::ofstream out(dir / "run.conf");
    out << "input = counts.csv\n"
        << "treated_unit = U1\n"
        << "t0_year = 2016\n"
        << "estimator = both\n"
        << "bootstrap_replications = 120\n"
        << "bootstrap_resample_size = 7\n"
        << "seed = 555\n";
  }

  auto run_cli = [&](const std::string& out_dir, int threads) {
    std::ostringstream cmd;
    cmd << '"' << SYNTHPANEL_CLI_PATH << "\" bootstrap --config \"" << (dir / "run.conf").string()
        << "\" --out \"" << (dir / out_dir).string() << "\" --threads " << threads
        << " > /dev/null 2>&1";
    return std::system(cmd.str().c_str());
  };

  Outcome out;
  if (run_cli("a", 1) != 0 || run_cli("b", 1) != 0 || run_cli("c", 4) != 0) {
    out.detail = "bootstrap subcommand failed";
    fs::remove_all(dir);
    return out;
  }

  bool identical = true;
  for (const char* name : {"bootstrap_replicates_scm.csv", "bootstrap_replicates_sdid.csv"}) {
    std::string a = read_file(dir / "a" / name);
    std::string b = read_file(dir / "b" / name);
    std::string c = read_file(dir / "c" / name);
    if (a.empty() || a != b || a != c) identical = false;
  }
  out.pass = identical;
  out.detail = identical ? "repeat run and 4-thread run byte-identical to the serial run"
                         : "replicate dumps differ across runs or thread counts";
  fs::remove_all(dir);
  return out;
}

// 7. Hull diagnostic fidelity on the descriptive-table-shaped fixture.
Outcome criterion7() {
  Panel panel = synthpanel::testing::make_table_fixture();
  TreatmentSpec spec = synthpanel::testing::make_table_spec();

  HullReport raw = convex_hull_check(annualize_levels(panel, spec), spec);
  HullReport cooked = convex_hull_check(annualize(residualize(panel, spec), spec), spec);

  Outcome out;
  out.pass = raw.rows.size() == 4 && raw.violation_fraction == 1.0 &&
             cooked.violation_fraction == 0.0;
  std::ostringstream msg;
  msg << "levels violated " << raw.violation_fraction * 100 << "% of pre years (100 required), "
      << "residuals " << cooked.violation_fraction * 100 << "% (0 required)";
  out.detail = msg.str();
  return out;
}

// 8. Reference reproduction is documentation-only: the replication config
//    must exist and parse to the documented reference setup, but no effect
//    value is asserted because the source panel is not distributed.
Outcome criterion8() {
  fs::path path = fs::path(SYNTHPANEL_SOURCE_DIR) / "configs" / "replication_gotthard.conf";
  Outcome out;
  if (!fs::exists(path)) {
    out.detail = "missing " + path.string();
    return out;
  }
  std::ifstream in(path);
  RunConfig cfg = parse_config(in);
  bool wired = cfg.spec.treated_unit == "Gotthard" && cfg.spec.t0_year == 2016 &&
               cfg.bootstrap.replications == 200 && cfg.bootstrap.resample_size == 7 &&
               cfg.bootstrap.level == 0.95 && cfg.spec.occupancy == 1.89 &&
               cfg.spec.excluded_donors ==
                   std::set<std::string>{"Tauern", "Brenner", "Karawanken"} &&
               !cfg.input_path.empty();
  out.pass = wired;
  out.detail = wired ? "replication config parses with the documented reference setup; "
                       "effect values are documentation-only (source panel not distributed)"
                     : "replication config does not match the documented setup";
  return out;
}

// 9. Placebo sanity: under the null the treated unit should not systematically
//    rank among the largest effects.
Outcome criterion9() {
  int top2_scm = 0, top2_sdid = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    GeneratorConfig cfg;
    cfg.n_units = 10;
    cfg.n_years = 7;
    cfg.pre_years = 4;
    cfg.noise_sd = 50.0;
    cfg.tau = 0.0;
    cfg.seed = 40000 + static_cast<std::uint64_t>(s);
    auto [panel, tau] = generate_factor_panel(cfg);
    TreatmentSpec spec = generator_spec(cfg);
    EstimationFrame frame = frame_from_years(annualize(residualize(panel, spec), spec), spec);

    if (in_space_placebo(frame, EstimatorOptions{EstimatorKind::scm}).true_rank <= 2) ++top2_scm;
    if (in_space_placebo(frame, EstimatorOptions{EstimatorKind::sdid}).true_rank <= 2) ++top2_sdid;
  }
  Outcome out;
  out.pass = top2_scm < 30 && top2_sdid < 30;
  std::ostringstream msg;
  msg << "null-panel top-2 rank frequency: scm " << top2_scm << "/100, sdid " << top2_sdid
      << "/100 (< 30 required)";
  out.detail = msg.str();
  return out;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {1, "solver-oracle equivalence", criterion1},
      {2, "exact convex-combination recovery", criterion2},
      {3, "residual identity on balanced panels", criterion3},
      {4, "sdid difference-in-differences identities", criterion4},
      {5, "bootstrap coverage", criterion5},
      {6, "bootstrap determinism across parallelism", criterion6},
      {7, "hull diagnostic fidelity", criterion7},
      {8, "replication setup documentation", criterion8},
      {9, "placebo sanity on null panels", criterion9},
  };

  int failed = 0;
  for (const Entry& entry : entries) {
    Outcome outcome;
    try {
      outcome = entry.fn();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  criterion " << entry.id << " ("
              << entry.name << "): " << outcome.detail << std::endl;
    if (!outcome.pass) ++failed;
  }
  if (failed > 0) std::cout << failed << " criterion(s) failed" << std::endl;
  return failed == 0 ? 0 : 1;
}
