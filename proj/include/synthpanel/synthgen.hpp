#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthpanel/matrix.hpp"
#include "synthpanel/panel.hpp"
#include "synthpanel/rng.hpp"

namespace synthpanel {

/// Factor-model panel generator configuration. The data-generating process is
///   Y_it = alpha_i + beta_t + sum_k L_ik F_kt + eps_it + tau * 1[i treated, t post]
/// with the first unit treated and t0 = start_year + pre_years - 1.
struct GeneratorConfig {
  int n_units = 10;
  int start_year = 2013;
  int n_years = 7;
  int pre_years = 4;
  std::set<int> season_months{4, 5, 6, 7, 8, 9, 10};
  int n_factors = 2;          // K
  double loading_scale = 10.0;
  double noise_sd = 50.0;
  double tau = 0.0;
  std::uint64_t seed = 42;
  // Two-way component scales; zero them (with K = 0) to isolate the noise.
  double level_mean = 3000.0;
  double level_sd = 800.0;
  double period_sd = 150.0;
};

inline std::string generator_unit_name(int index, int n_units) {
  int width = 1;
  for (int n = n_units; n >= 10; n /= 10) ++width;
  std::string digits = std::to_string(index + 1);
  while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
  return "U" + digits;
}

inline int generator_t0_year(const GeneratorConfig& cfg) {
  return cfg.start_year + cfg.pre_years - 1;
}

/// TreatmentSpec matching a generated panel: first unit treated, season and
/// t0 taken from the configuration.
inline TreatmentSpec generator_spec(const GeneratorConfig& cfg) {
  TreatmentSpec spec;
  spec.treated_unit = generator_unit_name(0, cfg.n_units);
  spec.t0_year = generator_t0_year(cfg);
  spec.season_months = cfg.season_months;
  return spec;
}

/// Draws a fully observed factor panel. The draw order is fixed (unit levels,
/// period shocks, loadings, factors, cell noise) and every draw comes from a
/// single xoshiro256++ stream, so a seed pins the panel bit-for-bit; tau is
/// added after all draws and therefore shifts treated post cells without
/// perturbing anything else.
inline std::pair<Panel, double> generate_factor_panel(const GeneratorConfig& cfg) {
  if (cfg.n_units < 2) throw std::invalid_argument("generator: need at least 2 units");
  if (cfg.n_years < 2 || cfg.pre_years < 1 || cfg.pre_years >= cfg.n_years)
    throw std::invalid_argument("generator: invalid pre/post year split");
  if (cfg.n_factors < 0) throw std::invalid_argument("generator: negative factor count");
  if (cfg.noise_sd < 0.0) throw std::invalid_argument("generator: negative noise sd");
  if (cfg.season_months.empty()) throw std::invalid_argument("generator: empty season");

  std::vector<Period> periods;
  for (int y = 0; y < cfg.n_years; ++y)
    for (int m : cfg.season_months) periods.push_back(Period{cfg.start_year + y, m});

  const std::size_t n = static_cast<std::size_t>(cfg.n_units);
  const std::size_t t = periods.size();
  const std::size_t k = static_cast<std::size_t>(cfg.n_factors);
  Xoshiro256pp rng(cfg.seed);

  std::vector<double> unit_level(n);
  for (auto& v : unit_level) v = cfg.level_mean + cfg.level_sd * rng.next_normal();
  std::vector<double> period_shock(t);
  for (auto& v : period_shock) v = cfg.period_sd * rng.next_normal();
  std::vector<double> loadings(n * k);
  for (auto& v : loadings) v = cfg.loading_scale * rng.next_normal();
  std::vector<double> factors(k * t);
  for (auto& v : factors) v = rng.next_normal();

  Panel panel;
  panel.periods = periods;
  for (std::size_t u = 0; u < n; ++u)
    panel.units.push_back(generator_unit_name(static_cast<int>(u), cfg.n_units));
  panel.values.assign(n * t, 0.0);
  panel.observed.assign(n * t, 1);

  const int t0 = generator_t0_year(cfg);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t p = 0; p < t; ++p) {
      double common = 0.0;
      for (std::size_t f = 0; f < k; ++f) common += loadings[u * k + f] * factors[f * t + p];
      double value = unit_level[u] + period_shock[p] + common + cfg.noise_sd * rng.next_normal();
      if (u == 0 && periods[p].year > t0) value += cfg.tau;
      panel.values[u * t + p] = value;
    }
  }
  return {std::move(panel), cfg.tau};
}

struct GridOracleResult {
  std::vector<double> weights;
  double objective = 0.0;
  std::size_t points_evaluated = 0;
};

/// Exhaustive simplex-grid search certifying the weight solver on small
/// instances. Grid points are the multiples of 1/N with N = round(1/step).
/// Deliberately brute force and independent of the solver's code path.
inline GridOracleResult grid_oracle_weights(std::span<const double> pre_treated,
                                            const Matrix& pre_donors, double step) {
  const std::size_t d = pre_donors.cols;
  if (d == 0 || d > 3) throw std::invalid_argument("grid_oracle: donor count must be in 1..3");
  if (!(step > 0.0 && step <= 0.5)) throw std::invalid_argument("grid_oracle: step must be in (0, 0.5]");
  if (pre_treated.size() != pre_donors.rows || pre_donors.rows == 0)
    throw std::invalid_argument("grid_oracle: dimension mismatch");

  const long n = std::lround(1.0 / step);

  // Precomputed quadratic form keeps each grid point O(d^2).
  Matrix gram;
  std::vector<double> lin;
  normal_equations(pre_donors, pre_treated, gram, lin);
  const double c0 = dot(pre_treated, pre_treated);

  auto eval = [&](std::span<const double> w) {
    return dot(w, mat_vec(gram, w)) - 2.0 * dot(lin, w) + c0;
  };

  GridOracleResult best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<double> w(d, 0.0);

  auto consider = [&](std::span<const double> candidate) {
    ++best.points_evaluated;
    double obj = eval(candidate);
    if (obj < best.objective) {
      best.objective = obj;
      best.weights.assign(candidate.begin(), candidate.end());
    }
  };

  if (d == 1) {
    w[0] = 1.0;
    consider(w);
  } else if (d == 2) {
    for (long i = 0; i <= n; ++i) {
      w[0] = static_cast<double>(i) / n;
      w[1] = static_cast<double>(n - i) / n;
      consider(w);
    }
  } else {
    for (long i = 0; i <= n; ++i) {
      for (long j = 0; j <= n - i; ++j) {
        w[0] = static_cast<double>(i) / n;
        w[1] = static_cast<double>(j) / n;
        w[2] = static_cast<double>(n - i - j) / n;
        consider(w);
      }
    }
  }

  // Report the exact residual objective for the winning point.
  std::vector<double> fit = mat_vec(pre_donors, best.weights);
  double obj = 0.0;
  for (std::size_t r = 0; r < fit.size(); ++r) {
    double diff = pre_treated[r] - fit[r];
    obj += diff * diff;
  }
  best.objective = obj;
  return best;
}

}  // namespace synthpanel
