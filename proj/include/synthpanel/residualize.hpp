#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthpanel/panel.hpp"

namespace synthpanel {

/// Pre-treatment monthly means per unit: the seasonal baseline that gets
/// subtracted from every observation of that unit and calendar month.
struct MonthlyBaseline {
  std::vector<std::string> units;
  std::vector<int> months;          // sorted months present in the panel
  std::vector<double> means;        // unit-major, units x months

  double at(std::size_t u, int month) const {
    auto it = std::lower_bound(months.begin(), months.end(), month);
    if (it == months.end() || *it != month)
      throw std::invalid_argument("baseline: no baseline for month " + std::to_string(month));
    return means[u * months.size() + static_cast<std::size_t>(it - months.begin())];
  }
};

/// Deseasonalized panel: same shape and mask as the source, values replaced
/// by residuals against the unit's pre-treatment monthly baseline.
struct ResidualPanel {
  Panel panel;
  MonthlyBaseline baselines;
};

/// Per unit-year mean residuals together with the number of contributing
/// season months. Cells with no observed season month are unobserved.
struct YearSeries {
  std::vector<std::string> units;
  std::vector<int> years;
  std::vector<double> mean_value;       // unit-major, units x years; NaN if unobserved
  std::vector<int> month_count;         // N_iy
  std::vector<std::uint8_t> observed;

  std::size_t n_units() const { return units.size(); }
  std::size_t n_years() const { return years.size(); }
  double at(std::size_t u, std::size_t y) const { return mean_value[u * years.size() + y]; }
  bool is_observed(std::size_t u, std::size_t y) const { return observed[u * years.size() + y] != 0; }

  std::size_t unit_index(const std::string& name) const {
    auto it = std::find(units.begin(), units.end(), name);
    if (it == units.end()) throw std::invalid_argument("year series: unknown unit '" + name + "'");
    return static_cast<std::size_t>(it - units.begin());
  }
};

inline MonthlyBaseline monthly_baseline(const Panel& panel, const TreatmentSpec& spec) {
  MonthlyBaseline base;
  base.units = panel.units;
  std::set<int> month_set;
  for (const auto& p : panel.periods) month_set.insert(p.month);
  base.months.assign(month_set.begin(), month_set.end());
  base.means.assign(panel.n_units() * base.months.size(), 0.0);

  for (std::size_t u = 0; u < panel.n_units(); ++u) {
    for (std::size_t mi = 0; mi < base.months.size(); ++mi) {
      int month = base.months[mi];
      double total = 0.0;
      int n = 0;
      for (std::size_t p = 0; p < panel.n_periods(); ++p) {
        if (panel.periods[p].month != month || panel.periods[p].year > spec.t0_year) continue;
        if (!panel.is_observed(u, p)) continue;
        total += panel.value(u, p);
        ++n;
      }
      if (n == 0)
        throw std::invalid_argument("monthly_baseline: no pre-treatment observation for " +
                                    panel.units[u] + ", month " + std::to_string(month));
      base.means[u * base.months.size() + mi] = total / n;
    }
  }
  return base;
}

inline ResidualPanel residualize(const Panel& panel, const TreatmentSpec& spec) {
  ResidualPanel out;
  out.baselines = monthly_baseline(panel, spec);
  out.panel = panel;
  for (std::size_t u = 0; u < panel.n_units(); ++u)
    for (std::size_t p = 0; p < panel.n_periods(); ++p)
      if (panel.is_observed(u, p))
        out.panel.values[u * panel.n_periods() + p] =
            panel.value(u, p) - out.baselines.at(u, panel.periods[p].month);
  return out;
}

namespace detail {

inline YearSeries year_means(const Panel& panel, const TreatmentSpec& spec) {
  YearSeries ys;
  ys.units = panel.units;
  std::set<int> year_set;
  for (const auto& p : panel.periods) year_set.insert(p.year);
  ys.years.assign(year_set.begin(), year_set.end());
  const std::size_t ny = ys.years.size();
  ys.mean_value.assign(panel.n_units() * ny, std::numeric_limits<double>::quiet_NaN());
  ys.month_count.assign(panel.n_units() * ny, 0);
  ys.observed.assign(panel.n_units() * ny, 0);

  for (std::size_t u = 0; u < panel.n_units(); ++u) {
    for (std::size_t yi = 0; yi < ny; ++yi) {
      double total = 0.0;
      int n = 0;
      for (std::size_t p = 0; p < panel.n_periods(); ++p) {
        if (panel.periods[p].year != ys.years[yi]) continue;
        if (!spec.season_months.count(panel.periods[p].month)) continue;
        if (!panel.is_observed(u, p)) continue;
        total += panel.value(u, p);
        ++n;
      }
      if (n > 0) {
        ys.mean_value[u * ny + yi] = total / n;
        ys.month_count[u * ny + yi] = n;
        ys.observed[u * ny + yi] = 1;
      }
    }
  }
  return ys;
}

}  // namespace detail

/// Yearly means of the deseasonalized residuals within the season months.
inline YearSeries annualize(const ResidualPanel& rpanel, const TreatmentSpec& spec) {
  return detail::year_means(rpanel.panel, spec);
}

/// Yearly means of the raw outcome levels (same slicing as annualize).
/// Used for level-based diagnostics and descriptive statistics.
inline YearSeries annualize_levels(const Panel& panel, const TreatmentSpec& spec) {
  return detail::year_means(panel, spec);
}

/// Per pre-treatment year: donor range, treated value and containment.
struct HullReport {
  struct Row {
    int year = 0;
    double donor_min = 0.0;
    double donor_max = 0.0;
    double treated = 0.0;
    double margin_low = 0.0;   // treated - donor_min (signed)
    double margin_high = 0.0;  // donor_max - treated (signed)
    bool inside = false;
  };
  std::vector<Row> rows;
  double violation_fraction = 0.0;
};

/// Strict convex-hull containment check on the pre-treatment years.
/// Signed margins are reported so borderline violations can be judged.
inline HullReport convex_hull_check(const YearSeries& ys, const TreatmentSpec& spec) {
  const std::size_t treated = ys.unit_index(spec.treated_unit);
  std::vector<std::size_t> donors;
  for (std::size_t u = 0; u < ys.n_units(); ++u)
    if (u != treated && !spec.excluded_donors.count(ys.units[u])) donors.push_back(u);
  if (donors.size() < 2) throw std::invalid_argument("convex_hull_check: need at least 2 donors");

  HullReport report;
  std::size_t violations = 0;
  for (std::size_t yi = 0; yi < ys.n_years(); ++yi) {
    if (ys.years[yi] > spec.t0_year) continue;
    if (!ys.is_observed(treated, yi))
      throw std::invalid_argument("convex_hull_check: treated unobserved in year " +
                                  std::to_string(ys.years[yi]));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t d : donors) {
      if (!ys.is_observed(d, yi)) continue;
      lo = std::min(lo, ys.at(d, yi));
      hi = std::max(hi, ys.at(d, yi));
    }
    if (!std::isfinite(lo))
      throw std::invalid_argument("convex_hull_check: no donor observation in year " +
                                  std::to_string(ys.years[yi]));
    HullReport::Row row;
    row.year = ys.years[yi];
    row.donor_min = lo;
    row.donor_max = hi;
    row.treated = ys.at(treated, yi);
    row.margin_low = row.treated - lo;
    row.margin_high = hi - row.treated;
    row.inside = row.margin_low >= 0.0 && row.margin_high >= 0.0;
    if (!row.inside) ++violations;
    report.rows.push_back(row);
  }
  report.violation_fraction =
      report.rows.empty() ? 0.0 : static_cast<double>(violations) / report.rows.size();
  return report;
}

/// OLS slope of a unit's pre-treatment yearly values on the year index.
struct ScreenReport {
  struct Row {
    std::string unit;
    double slope = 0.0;
    double divergence = 0.0;  // |slope - treated slope|
    bool flagged = false;
  };
  double treated_slope = 0.0;
  double threshold = 0.0;
  std::vector<Row> rows;  // donors only
};

namespace detail {

inline double pre_trend_slope(const YearSeries& ys, std::size_t u, int t0_year) {
  double sx = 0.0, sy = 0.0;
  int n = 0;
  for (std::size_t yi = 0; yi < ys.n_years(); ++yi) {
    if (ys.years[yi] > t0_year || !ys.is_observed(u, yi)) continue;
    sx += ys.years[yi];
    sy += ys.at(u, yi);
    ++n;
  }
  if (n < 2)
    throw std::invalid_argument("trend screen: fewer than 2 pre-treatment years for " + ys.units[u]);
  double mx = sx / n, my = sy / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t yi = 0; yi < ys.n_years(); ++yi) {
    if (ys.years[yi] > t0_year || !ys.is_observed(u, yi)) continue;
    sxy += (ys.years[yi] - mx) * (ys.at(u, yi) - my);
    sxx += (ys.years[yi] - mx) * (ys.years[yi] - mx);
  }
  return sxy / sxx;
}

}  // namespace detail

/// Flags donors whose pre-treatment trend diverges from the treated unit's by
/// more than the threshold (value per year). Advisory: exclusion stays a
/// configuration decision.
inline ScreenReport trend_divergence_screen(const YearSeries& ys, const TreatmentSpec& spec,
                                            double threshold) {
  if (!(threshold >= 0.0)) throw std::invalid_argument("trend screen: negative threshold");
  const std::size_t treated = ys.unit_index(spec.treated_unit);
  ScreenReport report;
  report.threshold = threshold;
  report.treated_slope = detail::pre_trend_slope(ys, treated, spec.t0_year);
  for (std::size_t u = 0; u < ys.n_units(); ++u) {
    if (u == treated || spec.excluded_donors.count(ys.units[u])) continue;
    ScreenReport::Row row;
    row.unit = ys.units[u];
    row.slope = detail::pre_trend_slope(ys, u, spec.t0_year);
    row.divergence = std::abs(row.slope - report.treated_slope);
    row.flagged = row.divergence > threshold;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace synthpanel
