#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthpanel/matrix.hpp"
#include "synthpanel/residualize.hpp"
#include "synthpanel/simplex_qp.hpp"

namespace synthpanel {

/// Nonnegative donor weights summing to one.
struct WeightVector {
  std::vector<std::string> donors;
  std::vector<double> weights;
};

/// Post-treatment gaps, their average, the pre-treatment fit quality and the
/// effect relative to a supplied baseline level (NaN when none was given).
struct EffectEstimate {
  std::vector<std::size_t> post_indices;
  std::vector<double> gaps;
  double average_effect = 0.0;
  double pre_rmse = 0.0;
  double relative_effect = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline std::vector<std::string> default_donor_ids(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = "donor_" + std::to_string(i);
  return ids;
}

inline double fit_objective(std::span<const double> target, const Matrix& donors,
                            std::span<const double> weights) {
  std::vector<double> fit = mat_vec(donors, weights);
  double obj = 0.0;
  for (std::size_t r = 0; r < fit.size(); ++r) {
    double d = target[r] - fit[r];
    obj += d * d;
  }
  return obj;
}

}  // namespace detail

/// Solves min_w || pre_treated - pre_donors w ||^2 over the simplex.
/// With FitTarget::pre_mean the match targets collapse to the single row of
/// pre-period means before solving.
inline WeightVector solve_weights(std::span<const double> pre_treated, const Matrix& pre_donors,
                                  FitTarget target = FitTarget::per_period,
                                  std::vector<std::string> donor_ids = {}) {
  if (pre_donors.cols == 0) throw std::invalid_argument("solve_weights: no donors");
  if (pre_donors.rows == 0 || pre_treated.size() != pre_donors.rows)
    throw std::invalid_argument("solve_weights: dimension mismatch");
  if (!donor_ids.empty() && donor_ids.size() != pre_donors.cols)
    throw std::invalid_argument("solve_weights: donor id count mismatch");

  Matrix design = pre_donors;
  std::vector<double> targets(pre_treated.begin(), pre_treated.end());
  if (target == FitTarget::pre_mean) {
    Matrix collapsed(1, pre_donors.cols);
    for (std::size_t c = 0; c < pre_donors.cols; ++c) {
      double total = 0.0;
      for (std::size_t r = 0; r < pre_donors.rows; ++r) total += pre_donors(r, c);
      collapsed(0, c) = total / static_cast<double>(pre_donors.rows);
    }
    double mean = 0.0;
    for (double v : targets) mean += v;
    mean /= static_cast<double>(targets.size());
    design = std::move(collapsed);
    targets = {mean};
  }

  Matrix gram;
  std::vector<double> lin;
  normal_equations(design, targets, gram, lin);
  SimplexQpResult sol = minimize_on_simplex(gram, lin, dot(targets, targets));

  WeightVector out;
  out.donors = donor_ids.empty() ? detail::default_donor_ids(pre_donors.cols) : std::move(donor_ids);
  out.weights = std::move(sol.weights);
  return out;
}

/// Weighted donor average per period. Column ids, when supplied, must match
/// the weight vector's donor order exactly.
inline std::vector<double> synthetic_path(const WeightVector& weights, const Matrix& donors_all,
                                          std::span<const std::string> column_ids = {}) {
  if (donors_all.cols != weights.weights.size())
    throw std::invalid_argument("synthetic_path: weight/column count mismatch");
  if (!column_ids.empty()) {
    if (column_ids.size() != weights.donors.size())
      throw std::invalid_argument("synthetic_path: column id count mismatch");
    for (std::size_t i = 0; i < column_ids.size(); ++i)
      if (column_ids[i] != weights.donors[i])
        throw std::invalid_argument("synthetic_path: column '" + column_ids[i] +
                                    "' does not match weight donor '" + weights.donors[i] + "'");
  }
  return mat_vec(donors_all, weights.weights);
}

/// Gaps between the treated and synthetic paths on the post periods, plus the
/// RMSE of the fit on the remaining (pre) periods.
inline EffectEstimate effect_path(std::span<const double> treated, std::span<const double> synthetic,
                                  std::span<const std::size_t> post,
                                  std::optional<double> baseline = std::nullopt) {
  if (treated.size() != synthetic.size())
    throw std::invalid_argument("effect_path: length mismatch");
  if (post.empty()) throw std::invalid_argument("effect_path: empty post period");
  std::vector<std::uint8_t> is_post(treated.size(), 0);
  for (std::size_t idx : post) {
    if (idx >= treated.size()) throw std::invalid_argument("effect_path: post index out of range");
    is_post[idx] = 1;
  }

  EffectEstimate est;
  est.post_indices.assign(post.begin(), post.end());
  double total = 0.0;
  for (std::size_t idx : post) {
    double gap = treated[idx] - synthetic[idx];
    est.gaps.push_back(gap);
    total += gap;
  }
  est.average_effect = total / static_cast<double>(post.size());

  double ss = 0.0;
  std::size_t n_pre = 0;
  for (std::size_t i = 0; i < treated.size(); ++i) {
    if (is_post[i]) continue;
    double d = treated[i] - synthetic[i];
    ss += d * d;
    ++n_pre;
  }
  est.pre_rmse = n_pre > 0 ? std::sqrt(ss / static_cast<double>(n_pre)) : 0.0;
  if (baseline && *baseline != 0.0) est.relative_effect = est.average_effect / *baseline;
  return est;
}

/// Dense estimation input: treated series, donor matrix and the pre/post row
/// index sets, on whatever time basis the caller chose (yearly by default,
/// monthly for the per-month variant).
struct EstimationFrame {
  std::vector<int> labels;  // year per row (yearly basis) or year*100+month
  std::vector<double> treated;
  std::vector<std::string> donor_ids;
  Matrix donors;  // rows x donors
  std::vector<std::size_t> pre;
  std::vector<std::size_t> post;
};

/// Extracts the fully observed treated/donor series from a YearSeries.
/// Excluded donors are left out; any unobserved cell that the estimators
/// would need is an error naming the unit and year.
inline EstimationFrame frame_from_years(const YearSeries& ys, const TreatmentSpec& spec) {
  EstimationFrame frame;
  const std::size_t treated = ys.unit_index(spec.treated_unit);
  std::vector<std::size_t> donor_units;
  for (std::size_t u = 0; u < ys.n_units(); ++u)
    if (u != treated && !spec.excluded_donors.count(ys.units[u])) donor_units.push_back(u);
  if (donor_units.empty()) throw std::invalid_argument("frame_from_years: no donors");

  frame.labels = ys.years;
  frame.treated.resize(ys.n_years());
  frame.donors = Matrix(ys.n_years(), donor_units.size());
  for (std::size_t d : donor_units) frame.donor_ids.push_back(ys.units[d]);

  for (std::size_t yi = 0; yi < ys.n_years(); ++yi) {
    if (!ys.is_observed(treated, yi))
      throw std::invalid_argument("frame_from_years: treated unobserved in year " +
                                  std::to_string(ys.years[yi]));
    frame.treated[yi] = ys.at(treated, yi);
    for (std::size_t c = 0; c < donor_units.size(); ++c) {
      if (!ys.is_observed(donor_units[c], yi))
        throw std::invalid_argument("frame_from_years: donor " + ys.units[donor_units[c]] +
                                    " unobserved in year " + std::to_string(ys.years[yi]));
      frame.donors(yi, c) = ys.at(donor_units[c], yi);
    }
    (ys.years[yi] <= spec.t0_year ? frame.pre : frame.post).push_back(yi);
  }
  if (frame.pre.empty() || frame.post.empty())
    throw std::invalid_argument("frame_from_years: empty pre or post period");
  return frame;
}

/// Monthly-basis frame over the season periods of a residual panel. Same
/// contract as frame_from_years, one row per (year, month).
inline EstimationFrame frame_from_months(const ResidualPanel& rpanel, const TreatmentSpec& spec) {
  const Panel& panel = rpanel.panel;
  EstimationFrame frame;
  const std::size_t treated = panel.unit_index(spec.treated_unit);
  std::vector<std::size_t> donor_units;
  for (std::size_t u = 0; u < panel.n_units(); ++u)
    if (u != treated && !spec.excluded_donors.count(panel.units[u])) donor_units.push_back(u);
  if (donor_units.empty()) throw std::invalid_argument("frame_from_months: no donors");
  for (std::size_t d : donor_units) frame.donor_ids.push_back(panel.units[d]);

  PeriodSplit split = split_periods(panel, spec);
  std::vector<std::size_t> rows = split.pre;
  rows.insert(rows.end(), split.post.begin(), split.post.end());

  frame.donors = Matrix(rows.size(), donor_units.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t p = rows[r];
    const Period& period = panel.periods[p];
    if (!panel.is_observed(treated, p))
      throw std::invalid_argument("frame_from_months: treated unobserved at " +
                                  std::to_string(period.year) + "-" + std::to_string(period.month));
    frame.labels.push_back(period.year * 100 + period.month);
    frame.treated.push_back(panel.value(treated, p));
    for (std::size_t c = 0; c < donor_units.size(); ++c) {
      if (!panel.is_observed(donor_units[c], p))
        throw std::invalid_argument("frame_from_months: donor " + panel.units[donor_units[c]] +
                                    " unobserved at " + std::to_string(period.year) + "-" +
                                    std::to_string(period.month));
      frame.donors(r, c) = panel.value(donor_units[c], p);
    }
    (r < split.pre.size() ? frame.pre : frame.post).push_back(r);
  }
  return frame;
}

namespace detail {

inline Matrix rows_of(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out(r, c) = m(rows[r], c);
  return out;
}

inline std::vector<double> gather(std::span<const double> v, std::span<const std::size_t> idx) {
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

}  // namespace detail

struct ScmFit {
  WeightVector weights;
  std::vector<double> synthetic;  // per frame row
  EffectEstimate effect;
};

/// Full synthetic-control run on a frame: solve weights on the pre rows,
/// extend the synthetic path over all rows, difference on the post rows.
inline ScmFit scm_fit(const EstimationFrame& frame, FitTarget target = FitTarget::per_period,
                      std::optional<double> baseline = std::nullopt) {
  ScmFit fit;
  std::vector<double> pre_treated = detail::gather(frame.treated, frame.pre);
  Matrix pre_donors = detail::rows_of(frame.donors, frame.pre);
  fit.weights = solve_weights(pre_treated, pre_donors, target, frame.donor_ids);
  fit.synthetic = synthetic_path(fit.weights, frame.donors, frame.donor_ids);
  fit.effect = effect_path(frame.treated, fit.synthetic, frame.post, baseline);
  return fit;
}

/// Convenience wrapper: yearly-basis SCM on a residualized YearSeries.
inline ScmFit scm_estimate(const YearSeries& ys, const TreatmentSpec& spec,
                           std::optional<double> baseline = std::nullopt) {
  return scm_fit(frame_from_years(ys, spec), spec.fit_target, baseline);
}

}  // namespace synthpanel
