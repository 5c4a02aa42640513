#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synthpanel/inference.hpp"
#include "synthpanel/ingestion.hpp"
#include "synthpanel/report.hpp"
#include "synthpanel/residualize.hpp"
#include "synthpanel/scm.hpp"
#include "synthpanel/sdid.hpp"

namespace synthpanel {

/// Validated, residualized inputs shared by all estimator runs.
struct PreparedRun {
  Panel panel;  // excluded and dropped donors removed
  TreatmentSpec spec;
  ValidationReport validation;
  ResidualPanel residuals;
  YearSeries residual_years;
  YearSeries level_years;
  EstimationFrame frame;        // yearly residual basis
  double baseline_level = 0.0;  // treated pre-treatment mean of yearly level means
};

inline PreparedRun prepare_run(const Panel& raw, const TreatmentSpec& spec) {
  PreparedRun prep;
  prep.spec = spec;
  prep.validation = validate_panel(raw, spec);

  std::set<std::string> keep(prep.validation.usable_donors.begin(),
                             prep.validation.usable_donors.end());
  keep.insert(spec.treated_unit);
  prep.panel = keep_units(raw, keep);

  prep.residuals = residualize(prep.panel, spec);
  prep.residual_years = annualize(prep.residuals, spec);
  prep.level_years = annualize_levels(prep.panel, spec);
  prep.frame = frame_from_years(prep.residual_years, spec);

  const std::size_t treated = prep.level_years.unit_index(spec.treated_unit);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t yi = 0; yi < prep.level_years.n_years(); ++yi) {
    if (prep.level_years.years[yi] > spec.t0_year) continue;
    if (!prep.level_years.is_observed(treated, yi)) continue;
    total += prep.level_years.at(treated, yi);
    ++n;
  }
  prep.baseline_level = n > 0 ? total / static_cast<double>(n) : 0.0;
  return prep;
}

inline Panel load_counts_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open input file " + path);
  std::vector<Record> records = parse_counts_csv(in);
  return build_panel(records);
}

/// Options of a full pipeline run beyond the parsed configuration.
struct RunOptions {
  bool with_bootstrap = false;
  int threads = 1;
  std::optional<double> zeta;             // SDID regularization override
  std::optional<double> screen_threshold; // trend screen, value per year
};

inline EstimatorRun run_estimator(const PreparedRun& prep, EstimatorKind kind,
                                  const RunOptions& opts) {
  EstimatorRun run;
  run.kind = kind;
  run.years = prep.frame.labels;
  run.treated = prep.frame.treated;
  if (kind == EstimatorKind::scm) {
    ScmFit fit = scm_fit(prep.frame, prep.spec.fit_target, prep.baseline_level);
    run.synthetic = std::move(fit.synthetic);
    run.effect = std::move(fit.effect);
    run.weights = std::move(fit.weights);
  } else {
    SdidFit fit = sdid_fit(prep.frame, opts.zeta, prep.baseline_level);
    run.synthetic = std::move(fit.synthetic);
    run.effect = std::move(fit.effect);
    run.sdid_weights = std::move(fit.weights);
  }
  return run;
}

/// Full pipeline: diagnostics on levels and residuals, then the requested
/// estimators, then (optionally) the donor bootstrap for each of them.
inline RunResult run_pipeline(const PreparedRun& prep, EstimatorChoice choice,
                              const BootstrapSettings& bootstrap, const RunOptions& opts) {
  RunResult result;
  result.spec = prep.spec;
  result.validation = prep.validation;
  result.baseline_level = prep.baseline_level;
  result.level_stats = table_stats(prep.level_years, prep.spec);
  result.residual_stats = table_stats(prep.residual_years, prep.spec);
  result.hull_levels = convex_hull_check(prep.level_years, prep.spec);
  result.hull_residuals = convex_hull_check(prep.residual_years, prep.spec);
  if (opts.screen_threshold)
    result.screen = trend_divergence_screen(prep.residual_years, prep.spec, *opts.screen_threshold);

  std::vector<EstimatorKind> kinds;
  if (choice == EstimatorChoice::scm || choice == EstimatorChoice::both)
    kinds.push_back(EstimatorKind::scm);
  if (choice == EstimatorChoice::sdid || choice == EstimatorChoice::both)
    kinds.push_back(EstimatorKind::sdid);

  for (EstimatorKind kind : kinds) {
    EstimatorRun run = run_estimator(prep, kind, opts);
    if (opts.with_bootstrap) {
      int m = bootstrap.resample_size > 0 ? bootstrap.resample_size
                                          : static_cast<int>(prep.frame.donor_ids.size());
      EstimatorOptions est{kind, prep.spec.fit_target, opts.zeta};
      run.bootstrap = bootstrap_ci(prep.frame, est, bootstrap.replications, m, bootstrap.level,
                                   bootstrap.seed, opts.threads);
    }
    result.runs.push_back(std::move(run));
  }
  return result;
}

}  // namespace synthpanel
