#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthpanel/matrix.hpp"
#include "synthpanel/scm.hpp"
#include "synthpanel/simplex_qp.hpp"

namespace synthpanel {

/// Unit and time weights of a synthetic difference-in-differences fit.
/// Both weight vectors live on the simplex; the intercepts absorb level
/// differences and do not enter the effect formula.
struct SdidWeights {
  std::vector<std::string> donor_ids;
  double unit_intercept = 0.0;       // omega_0
  std::vector<double> unit_weights;  // omega, one per donor
  double time_intercept = 0.0;       // lambda_0
  std::vector<double> time_weights;  // lambda, one per pre period
  double zeta = 0.0;
};

namespace detail {

// Centers the columns of a least-squares design and its target, returning the
// column means so the free intercept can be recovered afterwards.
inline void center_columns(Matrix& design, std::vector<double>& target,
                           std::vector<double>& col_means, double& target_mean) {
  col_means.assign(design.cols, 0.0);
  for (std::size_t c = 0; c < design.cols; ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < design.rows; ++r) total += design(r, c);
    col_means[c] = total / static_cast<double>(design.rows);
    for (std::size_t r = 0; r < design.rows; ++r) design(r, c) -= col_means[c];
  }
  target_mean = 0.0;
  for (double v : target) target_mean += v;
  target_mean /= static_cast<double>(target.size());
  for (double& v : target) v -= target_mean;
}

}  // namespace detail

/// Simplex-constrained ridge regression of the treated pre path on the donor
/// pre paths with a free intercept:
///   min_{w0, w}  sum_t (w0 + (Dw)_t - y_t)^2 + zeta^2 * P * ||w||^2.
inline std::pair<double, std::vector<double>> sdid_unit_weights(const Matrix& pre_donors,
                                                                std::span<const double> pre_treated,
                                                                double zeta) {
  if (pre_donors.rows < 2 || pre_donors.cols < 2)
    throw std::invalid_argument("sdid_unit_weights: need at least 2 pre periods and 2 donors");
  if (pre_treated.size() != pre_donors.rows)
    throw std::invalid_argument("sdid_unit_weights: dimension mismatch");

  Matrix design = pre_donors;
  std::vector<double> target(pre_treated.begin(), pre_treated.end());
  std::vector<double> col_means;
  double target_mean = 0.0;
  detail::center_columns(design, target, col_means, target_mean);

  Matrix gram;
  std::vector<double> lin;
  normal_equations(design, target, gram, lin);
  const double ridge = zeta * zeta * static_cast<double>(pre_donors.rows);
  for (std::size_t i = 0; i < gram.rows; ++i) gram(i, i) += ridge;

  SimplexQpResult sol = minimize_on_simplex(gram, lin, dot(target, target));
  double intercept = target_mean - dot(col_means, sol.weights);
  return {intercept, std::move(sol.weights)};
}

/// Simplex-constrained regression of the donors' post-period means on their
/// pre-period paths with a free intercept (no regularizer):
///   min_{l0, l}  sum_i (l0 + sum_t l_t D_{t,i} - m_i)^2.
inline std::pair<double, std::vector<double>> sdid_time_weights(
    const Matrix& pre_donors, std::span<const double> post_donor_means) {
  if (pre_donors.rows < 2 || pre_donors.cols < 2)
    throw std::invalid_argument("sdid_time_weights: need at least 2 pre periods and 2 donors");
  if (post_donor_means.size() != pre_donors.cols)
    throw std::invalid_argument("sdid_time_weights: dimension mismatch");

  Matrix design = pre_donors.transposed();  // donors x pre periods
  std::vector<double> target(post_donor_means.begin(), post_donor_means.end());
  std::vector<double> col_means;
  double target_mean = 0.0;
  detail::center_columns(design, target, col_means, target_mean);

  Matrix gram;
  std::vector<double> lin;
  normal_equations(design, target, gram, lin);
  SimplexQpResult sol = minimize_on_simplex(gram, lin, dot(target, target));
  double intercept = target_mean - dot(col_means, sol.weights);
  return {intercept, std::move(sol.weights)};
}

/// Default regularization strength: (post period count)^(1/4) times the
/// standard deviation of first differences of the donor pre-treatment
/// outcomes (single treated unit).
inline double sdid_default_zeta(const Matrix& pre_donors, std::size_t n_post) {
  std::vector<double> diffs;
  for (std::size_t c = 0; c < pre_donors.cols; ++c)
    for (std::size_t r = 1; r < pre_donors.rows; ++r)
      diffs.push_back(pre_donors(r, c) - pre_donors(r - 1, c));
  if (diffs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : diffs) mean += v;
  mean /= static_cast<double>(diffs.size());
  double ss = 0.0;
  for (double v : diffs) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / static_cast<double>(diffs.size() - 1));
  return std::pow(static_cast<double>(n_post), 0.25) * sd;
}

/// The SDID double difference for given weights:
///   tau = (Ybar_treated_post - sum_i w_i Ybar_i_post)
///       - (sum_t l_t Y_treated_t - sum_i sum_t w_i l_t Y_it).
/// Exposed separately so fixed/degenerate weights can be cross-checked.
inline double sdid_tau(const EstimationFrame& frame, std::span<const double> unit_weights,
                       std::span<const double> time_weights) {
  if (unit_weights.size() != frame.donors.cols)
    throw std::invalid_argument("sdid_tau: unit weight count mismatch");
  if (time_weights.size() != frame.pre.size())
    throw std::invalid_argument("sdid_tau: time weight count mismatch");

  double treated_post = 0.0;
  std::vector<double> donor_post(frame.donors.cols, 0.0);
  for (std::size_t idx : frame.post) {
    treated_post += frame.treated[idx];
    for (std::size_t c = 0; c < frame.donors.cols; ++c) donor_post[c] += frame.donors(idx, c);
  }
  treated_post /= static_cast<double>(frame.post.size());
  for (double& v : donor_post) v /= static_cast<double>(frame.post.size());

  double treated_pre = 0.0, donor_pre = 0.0;
  for (std::size_t k = 0; k < frame.pre.size(); ++k) {
    std::size_t idx = frame.pre[k];
    treated_pre += time_weights[k] * frame.treated[idx];
    for (std::size_t c = 0; c < frame.donors.cols; ++c)
      donor_pre += time_weights[k] * unit_weights[c] * frame.donors(idx, c);
  }
  return (treated_post - dot(unit_weights, donor_post)) - (treated_pre - donor_pre);
}

struct SdidFit {
  SdidWeights weights;
  std::vector<double> synthetic;  // donor-weighted path shifted by the pre alignment
  EffectEstimate effect;
};

/// Full SDID run on a frame. The per-period gaps are the treated-minus-
/// aligned-synthetic differences, so their post average equals tau.
inline SdidFit sdid_fit(const EstimationFrame& frame, std::optional<double> zeta = std::nullopt,
                        std::optional<double> baseline = std::nullopt) {
  if (frame.pre.size() < 2) throw std::invalid_argument("sdid_fit: need at least 2 pre periods");
  if (frame.post.empty()) throw std::invalid_argument("sdid_fit: empty post period");
  if (frame.donors.cols < 2) throw std::invalid_argument("sdid_fit: need at least 2 donors");

  Matrix pre_donors = detail::rows_of(frame.donors, frame.pre);
  std::vector<double> pre_treated = detail::gather(frame.treated, frame.pre);

  SdidFit fit;
  fit.weights.donor_ids = frame.donor_ids;
  fit.weights.zeta = zeta ? *zeta : sdid_default_zeta(pre_donors, frame.post.size());

  auto [w0, omega] = sdid_unit_weights(pre_donors, pre_treated, fit.weights.zeta);
  fit.weights.unit_intercept = w0;
  fit.weights.unit_weights = std::move(omega);

  std::vector<double> post_means(frame.donors.cols, 0.0);
  for (std::size_t idx : frame.post)
    for (std::size_t c = 0; c < frame.donors.cols; ++c) post_means[c] += frame.donors(idx, c);
  for (double& v : post_means) v /= static_cast<double>(frame.post.size());

  auto [l0, lambda] = sdid_time_weights(pre_donors, post_means);
  fit.weights.time_intercept = l0;
  fit.weights.time_weights = std::move(lambda);

  // Pre alignment offset: weighted treated pre level minus weighted donor pre level.
  double offset = 0.0;
  for (std::size_t k = 0; k < frame.pre.size(); ++k) {
    std::size_t idx = frame.pre[k];
    double donor_val = 0.0;
    for (std::size_t c = 0; c < frame.donors.cols; ++c)
      donor_val += fit.weights.unit_weights[c] * frame.donors(idx, c);
    offset += fit.weights.time_weights[k] * (frame.treated[idx] - donor_val);
  }

  fit.synthetic.resize(frame.treated.size());
  for (std::size_t r = 0; r < frame.treated.size(); ++r) {
    double donor_val = 0.0;
    for (std::size_t c = 0; c < frame.donors.cols; ++c)
      donor_val += fit.weights.unit_weights[c] * frame.donors(r, c);
    fit.synthetic[r] = donor_val + offset;
  }
  fit.effect = effect_path(frame.treated, fit.synthetic, frame.post, baseline);
  return fit;
}

/// Convenience wrapper: yearly-basis SDID on a residualized YearSeries.
inline SdidFit sdid_estimate(const YearSeries& ys, const TreatmentSpec& spec,
                             std::optional<double> zeta = std::nullopt,
                             std::optional<double> baseline = std::nullopt) {
  return sdid_fit(frame_from_years(ys, spec), zeta, baseline);
}

}  // namespace synthpanel
