#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "synthpanel/inference.hpp"
#include "synthpanel/ingestion.hpp"
#include "synthpanel/residualize.hpp"
#include "synthpanel/scm.hpp"
#include "synthpanel/sdid.hpp"

namespace synthpanel {

/// Persons shifted per day implied by a vehicle effect and an occupancy rate.
inline double persons_from_effect(double effect, double occupancy) {
  if (!(occupancy > 0.0)) throw std::invalid_argument("persons_from_effect: occupancy must be > 0");
  return std::abs(effect) * occupancy;
}

/// Decomposition of the post-period public-transport ridership into baseline,
/// counterfactual network growth, mode shift and induced demand, all as
/// shares of the post-period total. Components sum to one by construction;
/// inconsistent inputs (negative induced share) yield a warning, not an error.
struct PtShareDecomposition {
  double baseline_share = 0.0;  // pt_before / pt_after
  double growth_share = 0.0;    // pt_before * (growth - 1) / pt_after
  double shift_share = 0.0;     // shifted / pt_after
  double induced_share = 0.0;   // remainder
  bool consistent = true;
  std::string warning;
};

inline PtShareDecomposition decompose_pt_share(double pt_before, double pt_after,
                                               double network_growth, double shifted) {
  if (!(pt_after > 0.0)) throw std::invalid_argument("decompose_pt_share: pt_after must be > 0");
  PtShareDecomposition d;
  d.baseline_share = pt_before / pt_after;
  d.growth_share = pt_before * (network_growth - 1.0) / pt_after;
  d.shift_share = shifted / pt_after;
  d.induced_share = 1.0 - d.baseline_share - d.growth_share - d.shift_share;
  if (d.induced_share < 0.0) {
    d.consistent = false;
    d.warning = "induced share is negative; inputs are mutually inconsistent";
  }
  if (shifted > pt_after) {
    d.consistent = false;
    d.warning = "shifted ridership exceeds the post-period total";
  }
  return d;
}

/// Group x period summary rows in the layout of the descriptive table:
/// treated and pooled donors, pre and post, over yearly means.
struct GroupPeriodStats {
  SummaryStats treated_pre;
  SummaryStats treated_post;
  SummaryStats donors_pre;
  SummaryStats donors_post;
};

inline GroupPeriodStats table_stats(const YearSeries& ys, const TreatmentSpec& spec) {
  const std::size_t treated = ys.unit_index(spec.treated_unit);
  std::vector<double> tp, ta, dp, da;
  for (std::size_t u = 0; u < ys.n_units(); ++u) {
    if (u != treated && spec.excluded_donors.count(ys.units[u])) continue;
    for (std::size_t yi = 0; yi < ys.n_years(); ++yi) {
      if (!ys.is_observed(u, yi)) continue;
      bool pre = ys.years[yi] <= spec.t0_year;
      if (u == treated)
        (pre ? tp : ta).push_back(ys.at(u, yi));
      else
        (pre ? dp : da).push_back(ys.at(u, yi));
    }
  }
  GroupPeriodStats stats;
  stats.treated_pre = descriptive_stats(tp);
  stats.treated_post = descriptive_stats(ta);
  stats.donors_pre = descriptive_stats(dp);
  stats.donors_post = descriptive_stats(da);
  return stats;
}

/// Everything one estimator produced on the yearly residual series.
struct EstimatorRun {
  EstimatorKind kind = EstimatorKind::scm;
  std::vector<int> years;
  std::vector<double> treated;
  std::vector<double> synthetic;
  EffectEstimate effect;
  WeightVector weights;                    // SCM unit weights
  std::optional<SdidWeights> sdid_weights; // present for SDID runs
  std::optional<BootstrapResult> bootstrap;
};

/// Aggregated artifacts of a full run, ready for export.
struct RunResult {
  TreatmentSpec spec;
  ValidationReport validation;
  GroupPeriodStats level_stats;
  GroupPeriodStats residual_stats;
  HullReport hull_levels;
  HullReport hull_residuals;
  std::optional<ScreenReport> screen;
  double baseline_level = 0.0;  // treated pre-treatment mean of yearly level means
  std::vector<EstimatorRun> runs;
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  return out;
}

// Display rule for weight summaries: weights under 1e-3 print as 0 (the
// arithmetic everywhere else keeps full precision).
inline double display_weight(double w) { return w < 1e-3 ? 0.0 : w; }

}  // namespace detail

inline void write_effects_csv(std::ostream& out, const EstimatorRun& run) {
  out << "year,treated,synthetic,gap\n";
  for (std::size_t i = 0; i < run.years.size(); ++i) {
    out << run.years[i] << ',';
    write_csv_double(out, run.treated[i]);
    out << ',';
    write_csv_double(out, run.synthetic[i]);
    out << ',';
    write_csv_double(out, run.treated[i] - run.synthetic[i]);
    out << '\n';
  }
}

inline void write_gap_plot_csv(std::ostream& out, const EstimatorRun& run) {
  out << "year,gap,synthetic,treated\n";
  for (std::size_t i = 0; i < run.years.size(); ++i) {
    out << run.years[i] << ',';
    write_csv_double(out, run.treated[i] - run.synthetic[i]);
    out << ',';
    write_csv_double(out, run.synthetic[i]);
    out << ',';
    write_csv_double(out, run.treated[i]);
    out << '\n';
  }
}

inline void write_weights_csv(std::ostream& out, const WeightVector& weights) {
  out << "donor,weight\n";
  for (std::size_t i = 0; i < weights.donors.size(); ++i) {
    out << weights.donors[i] << ',';
    write_csv_double(out, weights.weights[i]);
    out << '\n';
  }
}

inline void write_sdid_weights_csv(std::ostream& out, const SdidWeights& weights,
                                   std::span<const int> pre_years) {
  out << "kind,id,weight\n";
  for (std::size_t i = 0; i < weights.donor_ids.size(); ++i) {
    out << "unit," << weights.donor_ids[i] << ',';
    write_csv_double(out, weights.unit_weights[i]);
    out << '\n';
  }
  for (std::size_t i = 0; i < weights.time_weights.size(); ++i) {
    out << "time," << pre_years[i] << ',';
    write_csv_double(out, weights.time_weights[i]);
    out << '\n';
  }
}

inline void write_hull_csv(std::ostream& out, const HullReport& report) {
  out << "year,min,max,treated,inside\n";
  for (const auto& row : report.rows) {
    out << row.year << ',';
    write_csv_double(out, row.donor_min);
    out << ',';
    write_csv_double(out, row.donor_max);
    out << ',';
    write_csv_double(out, row.treated);
    out << ',' << (row.inside ? 1 : 0) << '\n';
  }
}

inline void write_screen_csv(std::ostream& out, const ScreenReport& report) {
  out << "unit,slope,divergence,flagged\n";
  for (const auto& row : report.rows) {
    out << row.unit << ',';
    write_csv_double(out, row.slope);
    out << ',';
    write_csv_double(out, row.divergence);
    out << ',' << (row.flagged ? 1 : 0) << '\n';
  }
}

inline void write_replicates_csv(std::ostream& out, const BootstrapResult& result) {
  out << "replicate,effect,degenerate\n";
  for (const auto& rep : result.replicates) {
    out << rep.index << ',';
    if (!rep.degenerate) write_csv_double(out, rep.effect);  // empty field when degenerate
    out << ',' << (rep.degenerate ? 1 : 0) << '\n';
  }
}

inline void write_bootstrap_summary_line(std::ostream& out, const EstimatorRun& run) {
  const BootstrapResult& b = *run.bootstrap;
  out << estimator_name(run.kind) << ',';
  write_csv_double(out, run.effect.average_effect);
  out << ',';
  write_csv_double(out, b.lower);
  out << ',';
  write_csv_double(out, b.upper);
  out << ',';
  write_csv_double(out, b.level);
  out << ',' << b.requested << ',' << b.completed << '\n';
}

inline void write_run_summary(std::ostream& out, const RunResult& result) {
  auto stats_row = [&](const char* label, const SummaryStats& s) {
    out << "  " << label << ": mean " << s.mean << ", sd " << s.sd << ", min " << s.min << ", max "
        << s.max << ", n " << s.n << '\n';
  };
  out << "donors: " << result.validation.donor_count << " usable";
  if (!result.validation.dropped_donors.empty()) {
    out << ", dropped:";
    for (const auto& d : result.validation.dropped_donors) out << ' ' << d;
  }
  if (!result.validation.excluded_donors.empty()) {
    out << ", excluded:";
    for (const auto& d : result.validation.excluded_donors) out << ' ' << d;
  }
  out << "\n\nlevels (yearly means)\n";
  stats_row("treated pre ", result.level_stats.treated_pre);
  stats_row("treated post", result.level_stats.treated_post);
  stats_row("donors  pre ", result.level_stats.donors_pre);
  stats_row("donors  post", result.level_stats.donors_post);
  out << "residuals (yearly means)\n";
  stats_row("treated pre ", result.residual_stats.treated_pre);
  stats_row("treated post", result.residual_stats.treated_post);
  stats_row("donors  pre ", result.residual_stats.donors_pre);
  stats_row("donors  post", result.residual_stats.donors_post);

  out << "\nhull check: levels " << result.hull_levels.violation_fraction * 100.0
      << "% of pre years violated, residuals " << result.hull_residuals.violation_fraction * 100.0
      << "% violated\n";
  if (result.screen) {
    out << "trend screen (threshold " << result.screen->threshold << "/year):";
    bool any = false;
    for (const auto& row : result.screen->rows)
      if (row.flagged) {
        out << ' ' << row.unit;
        any = true;
      }
    out << (any ? "" : " no donors flagged") << '\n';
  }

  for (const auto& run : result.runs) {
    out << "\n" << estimator_name(run.kind) << " average post effect: " << run.effect.average_effect
        << " per day";
    if (std::isfinite(run.effect.relative_effect))
      out << " (" << run.effect.relative_effect * 100.0 << "% of pre-treatment level "
          << result.baseline_level << ")";
    out << "\n  pre-period RMSE: " << run.effect.pre_rmse << '\n';
    out << "  persons equivalent (occupancy " << result.spec.occupancy
        << "): " << persons_from_effect(run.effect.average_effect, result.spec.occupancy) << "/day\n";
    if (run.kind == EstimatorKind::scm) {
      out << "  weights:";
      for (std::size_t i = 0; i < run.weights.donors.size(); ++i)
        out << ' ' << run.weights.donors[i] << '=' << detail::display_weight(run.weights.weights[i]);
      out << '\n';
    } else if (run.sdid_weights) {
      out << "  unit weights:";
      for (std::size_t i = 0; i < run.sdid_weights->donor_ids.size(); ++i)
        out << ' ' << run.sdid_weights->donor_ids[i] << '='
            << detail::display_weight(run.sdid_weights->unit_weights[i]);
      out << "\n  zeta: " << run.sdid_weights->zeta << '\n';
    }
    if (run.bootstrap) {
      out << "  " << run.bootstrap->level * 100.0 << "% bootstrap CI: [" << run.bootstrap->lower
          << ", " << run.bootstrap->upper << "]  (B=" << run.bootstrap->requested
          << ", completed=" << run.bootstrap->completed << ", seed=" << run.bootstrap->seed << ")\n";
    }
  }
}

/// Writes every artifact of a run into the destination directory: per
/// estimator the effect and gap-plot series plus weights (and replicate dump
/// when a bootstrap ran), the hull and screen reports, the bootstrap summary
/// and a human-readable summary.
inline std::vector<std::filesystem::path> export_run(const RunResult& result,
                                                     const std::filesystem::path& destination) {
  std::error_code ec;
  std::filesystem::create_directories(destination, ec);
  if (ec) throw io_error("cannot create output directory " + destination.string());

  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, auto&& writer) {
    std::filesystem::path path = destination / name;
    std::ofstream out = detail::open_out(path);
    writer(out);
    if (!out) throw io_error("write failed for " + path.string());
    written.push_back(path);
  };

  for (const auto& run : result.runs) {
    std::string tag = estimator_name(run.kind);
    emit("effects_" + tag + ".csv", [&](std::ostream& o) { write_effects_csv(o, run); });
    emit("gapplot_" + tag + ".csv", [&](std::ostream& o) { write_gap_plot_csv(o, run); });
    if (run.kind == EstimatorKind::scm) {
      emit("weights_scm.csv", [&](std::ostream& o) { write_weights_csv(o, run.weights); });
    } else if (run.sdid_weights) {
      std::vector<int> pre_years;
      for (int y : run.years)
        if (y <= result.spec.t0_year) pre_years.push_back(y);
      emit("weights_sdid.csv",
           [&](std::ostream& o) { write_sdid_weights_csv(o, *run.sdid_weights, pre_years); });
    }
    if (run.bootstrap)
      emit("bootstrap_replicates_" + tag + ".csv",
           [&](std::ostream& o) { write_replicates_csv(o, *run.bootstrap); });
  }

  emit("hull_levels.csv", [&](std::ostream& o) { write_hull_csv(o, result.hull_levels); });
  emit("hull_residuals.csv", [&](std::ostream& o) { write_hull_csv(o, result.hull_residuals); });
  if (result.screen)
    emit("screen.csv", [&](std::ostream& o) { write_screen_csv(o, *result.screen); });

  bool any_bootstrap = false;
  for (const auto& run : result.runs) any_bootstrap |= run.bootstrap.has_value();
  if (any_bootstrap)
    emit("bootstrap_summary.csv", [&](std::ostream& o) {
      o << "estimator,point,lower,upper,level,B,B_completed\n";
      for (const auto& run : result.runs)
        if (run.bootstrap) write_bootstrap_summary_line(o, run);
    });

  emit("summary.txt", [&](std::ostream& o) { write_run_summary(o, result); });
  return written;
}

}  // namespace synthpanel
