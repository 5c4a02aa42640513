#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace synthpanel {

/// Calendar period at the toolkit's native granularity: (year, month).
struct Period {
  int year = 0;
  int month = 0;  // 1..12

  auto operator<=>(const Period&) const = default;
};

/// One observed cell, as it appears in a counts CSV row.
struct Record {
  std::string unit;
  int year = 0;
  int month = 0;
  double value = 0.0;
};

/// How the pre-treatment fit target is assembled for the weight solver:
/// one row per pre period, or a single row of pre-period means.
enum class FitTarget { per_period, pre_mean };

/// Rectangular unit x period outcome array with an observation mask.
/// Immutable after construction; all operations on it are pure.
struct Panel {
  std::vector<std::string> units;    // unique, in first-appearance order
  std::vector<Period> periods;       // strictly increasing
  std::vector<double> values;        // unit-major, units.size() x periods.size()
  std::vector<std::uint8_t> observed;

  std::size_t n_units() const { return units.size(); }
  std::size_t n_periods() const { return periods.size(); }

  double value(std::size_t u, std::size_t p) const { return values[u * periods.size() + p]; }
  bool is_observed(std::size_t u, std::size_t p) const { return observed[u * periods.size() + p] != 0; }

  std::size_t unit_index(const std::string& name) const {
    auto it = std::find(units.begin(), units.end(), name);
    if (it == units.end()) throw std::invalid_argument("panel: unknown unit '" + name + "'");
    return static_cast<std::size_t>(it - units.begin());
  }

  bool has_unit(const std::string& name) const {
    return std::find(units.begin(), units.end(), name) != units.end();
  }

  int first_year() const { return periods.front().year; }
  int last_year() const { return periods.back().year; }
};

/// Treatment assignment and run conventions for a single treated unit.
struct TreatmentSpec {
  std::string treated_unit;
  int t0_year = 0;                            // last pre-treatment year
  std::set<int> season_months{4, 5, 6, 7, 8, 9, 10};
  std::set<std::string> excluded_donors;
  FitTarget fit_target = FitTarget::per_period;
  double occupancy = 1.89;                    // persons per vehicle
};

inline Panel build_panel(std::span<const Record> records) {
  if (records.empty()) throw std::invalid_argument("build_panel: no records");
  Panel panel;
  std::set<Period> period_set;
  std::map<std::string, std::size_t> unit_pos;
  for (const auto& rec : records) {
    if (!std::isfinite(rec.value))
      throw std::invalid_argument("build_panel: non-finite value for " + rec.unit + " " +
                                  std::to_string(rec.year) + "-" + std::to_string(rec.month));
    if (rec.month < 1 || rec.month > 12)
      throw std::invalid_argument("build_panel: month out of range for " + rec.unit);
    period_set.insert(Period{rec.year, rec.month});
    if (unit_pos.emplace(rec.unit, panel.units.size()).second) panel.units.push_back(rec.unit);
  }
  panel.periods.assign(period_set.begin(), period_set.end());

  const std::size_t np = panel.periods.size();
  panel.values.assign(panel.units.size() * np, std::numeric_limits<double>::quiet_NaN());
  panel.observed.assign(panel.units.size() * np, 0);

  auto period_index = [&](Period p) {
    return static_cast<std::size_t>(
        std::lower_bound(panel.periods.begin(), panel.periods.end(), p) - panel.periods.begin());
  };
  for (const auto& rec : records) {
    std::size_t u = unit_pos.at(rec.unit);
    std::size_t p = period_index(Period{rec.year, rec.month});
    std::size_t idx = u * np + p;
    if (panel.observed[idx])
      throw std::invalid_argument("build_panel: duplicate record for " + rec.unit + " " +
                                  std::to_string(rec.year) + "-" + std::to_string(rec.month));
    panel.values[idx] = rec.value;
    panel.observed[idx] = 1;
  }
  return panel;
}

/// Re-emits the observed cells of a panel as records (unit-major, period order).
inline std::vector<Record> emit_records(const Panel& panel) {
  std::vector<Record> out;
  out.reserve(panel.values.size());
  for (std::size_t u = 0; u < panel.n_units(); ++u)
    for (std::size_t p = 0; p < panel.n_periods(); ++p)
      if (panel.is_observed(u, p))
        out.push_back(Record{panel.units[u], panel.periods[p].year, panel.periods[p].month,
                             panel.value(u, p)});
  return out;
}

/// Copies a panel keeping only the named units (panel order preserved).
inline Panel keep_units(const Panel& panel, const std::set<std::string>& names) {
  Panel out;
  out.periods = panel.periods;
  for (std::size_t u = 0; u < panel.n_units(); ++u) {
    if (!names.count(panel.units[u])) continue;
    out.units.push_back(panel.units[u]);
    for (std::size_t p = 0; p < panel.n_periods(); ++p) {
      out.values.push_back(panel.value(u, p));
      out.observed.push_back(panel.is_observed(u, p) ? 1 : 0);
    }
  }
  if (out.units.empty()) throw std::invalid_argument("keep_units: no units left");
  return out;
}

/// Checks a TreatmentSpec against a panel: treated unit present and not
/// excluded, t0 inside the panel's year range with at least two years at or
/// before it and at least one after.
inline void validate_spec(const Panel& panel, const TreatmentSpec& spec) {
  if (!panel.has_unit(spec.treated_unit))
    throw std::invalid_argument("spec: treated unit '" + spec.treated_unit + "' not in panel");
  if (spec.excluded_donors.count(spec.treated_unit))
    throw std::invalid_argument("spec: treated unit listed in excluded_donors");
  std::set<int> years;
  for (const auto& p : panel.periods) years.insert(p.year);
  std::size_t pre = 0, post = 0;
  for (int y : years) (y <= spec.t0_year ? pre : post)++;
  if (pre < 2)
    throw std::invalid_argument("spec: need at least 2 panel years at or before t0_year");
  if (post < 1)
    throw std::invalid_argument("spec: need at least 1 panel year after t0_year");
  if (spec.season_months.empty()) throw std::invalid_argument("spec: empty season_months");
  for (int m : spec.season_months)
    if (m < 1 || m > 12) throw std::invalid_argument("spec: season month out of range");
}

struct PeriodSplit {
  std::vector<std::size_t> pre;   // indices into panel.periods
  std::vector<std::size_t> post;
};

/// Partitions the panel's season periods by treatment year: pre holds periods
/// with year <= t0_year, post the rest. Periods outside season_months belong
/// to neither set.
inline PeriodSplit split_periods(const Panel& panel, const TreatmentSpec& spec) {
  PeriodSplit split;
  for (std::size_t p = 0; p < panel.n_periods(); ++p) {
    if (!spec.season_months.count(panel.periods[p].month)) continue;
    if (panel.periods[p].year <= spec.t0_year)
      split.pre.push_back(p);
    else
      split.post.push_back(p);
  }
  if (split.pre.empty()) throw std::invalid_argument("split_periods: no pre-treatment season periods");
  if (split.post.empty()) throw std::invalid_argument("split_periods: no post-treatment season periods");
  return split;
}

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;  // sample (n-1); NaN when n == 1
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

inline SummaryStats descriptive_stats(std::span<const double> series) {
  if (series.empty()) throw std::invalid_argument("descriptive_stats: empty slice");
  SummaryStats s;
  s.n = series.size();
  s.min = series[0];
  s.max = series[0];
  double total = 0.0;
  for (double v : series) {
    total += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = total / static_cast<double>(s.n);
  if (s.n >= 2) {
    double ss = 0.0;
    for (double v : series) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  } else {
    s.sd = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

}  // namespace synthpanel
