#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "synthpanel/rng.hpp"
#include "synthpanel/scm.hpp"
#include "synthpanel/sdid.hpp"

namespace synthpanel {

enum class EstimatorKind { scm, sdid };

inline const char* estimator_name(EstimatorKind kind) {
  return kind == EstimatorKind::scm ? "scm" : "sdid";
}

/// Options shared by every estimator invocation inside inference loops.
struct EstimatorOptions {
  EstimatorOptions(EstimatorKind k = EstimatorKind::scm,
                   FitTarget target = FitTarget::per_period,
                   std::optional<double> zeta_override = std::nullopt)
      : kind(k), fit_target(target), zeta(zeta_override) {}

  EstimatorKind kind;
  FitTarget fit_target;
  std::optional<double> zeta;  // SDID regularization override
};

/// Average post-treatment effect of one estimator run on a frame.
inline double average_effect(const EstimationFrame& frame, const EstimatorOptions& opts) {
  if (opts.kind == EstimatorKind::scm) return scm_fit(frame, opts.fit_target).effect.average_effect;
  return sdid_fit(frame, opts.zeta).effect.average_effect;
}

/// Linear-interpolation quantile (the common "type 7" definition) of an
/// already sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  double h = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(h);
  double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct BootstrapReplicate {
  int index = 0;
  double effect = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;
};

struct BootstrapResult {
  std::vector<BootstrapReplicate> replicates;  // length B, in replicate order
  std::vector<double> effects;                 // completed replicates only
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  double level = 0.95;
  int requested = 0;
  int completed = 0;
  int degenerate_count = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline EstimationFrame resample_donors(const EstimationFrame& frame,
                                       std::span<const std::size_t> picks) {
  EstimationFrame out;
  out.labels = frame.labels;
  out.treated = frame.treated;
  out.pre = frame.pre;
  out.post = frame.post;
  out.donors = Matrix(frame.donors.rows, picks.size());
  for (std::size_t c = 0; c < picks.size(); ++c) {
    out.donor_ids.push_back(frame.donor_ids[picks[c]]);
    for (std::size_t r = 0; r < frame.donors.rows; ++r)
      out.donors(r, c) = frame.donors(r, picks[c]);
  }
  return out;
}

}  // namespace detail

/// Donor bootstrap: each replicate draws m donors with replacement from the
/// frame's donor pool (never the treated unit), re-runs the full estimator
/// and records the average effect. Per-replicate generators are seeded from
/// (seed, replicate index), so results are identical at any thread count.
/// Estimator failures mark the replicate degenerate instead of aborting.
inline BootstrapResult bootstrap_ci(const EstimationFrame& frame, const EstimatorOptions& opts,
                                    int replications, int resample_size, double level,
                                    std::uint64_t seed, int threads = 1) {
  if (replications < 1) throw std::invalid_argument("bootstrap: replications must be >= 1");
  if (resample_size < 2) throw std::invalid_argument("bootstrap: resample size must be >= 2");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap: level must be in (0,1)");
  if (frame.donor_ids.empty()) throw std::invalid_argument("bootstrap: no donors");
  if (threads < 1) threads = 1;

  BootstrapResult res;
  res.level = level;
  res.requested = replications;
  res.seed = seed;
  res.replicates.assign(static_cast<std::size_t>(replications), BootstrapReplicate{});

  const std::size_t pool = frame.donor_ids.size();
  auto run_range = [&](int begin, int end) {
    std::vector<std::size_t> picks(static_cast<std::size_t>(resample_size));
    for (int r = begin; r < end; ++r) {
      Xoshiro256pp rng(derive_stream_seed(seed, static_cast<std::uint64_t>(r)));
      for (auto& p : picks) p = rng.next_index(pool);
      BootstrapReplicate& rep = res.replicates[static_cast<std::size_t>(r)];
      rep.index = r;
      try {
        rep.effect = average_effect(detail::resample_donors(frame, picks), opts);
        rep.degenerate = !std::isfinite(rep.effect);
      } catch (const std::exception&) {
        rep.degenerate = true;
      }
    }
  };

  if (threads == 1 || replications < 2 * threads) {
    run_range(0, replications);
  } else {
    std::vector<std::thread> workers;
    int chunk = (replications + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      int begin = t * chunk;
      int end = std::min(replications, begin + chunk);
      if (begin >= end) break;
      workers.emplace_back(run_range, begin, end);
    }
    for (auto& worker : workers) worker.join();
  }

  for (const auto& rep : res.replicates) {
    if (rep.degenerate)
      ++res.degenerate_count;
    else
      res.effects.push_back(rep.effect);
  }
  res.completed = static_cast<int>(res.effects.size());
  if (res.completed > 0) {
    std::vector<double> sorted = res.effects;
    std::sort(sorted.begin(), sorted.end());
    double tail = (1.0 - level) / 2.0;
    res.lower = quantile_sorted(sorted, tail);
    res.upper = quantile_sorted(sorted, 1.0 - tail);
  }
  return res;
}

/// Yearly-basis wrapper over a residualized YearSeries.
inline BootstrapResult bootstrap_ci(const YearSeries& ys, const TreatmentSpec& spec,
                                    const EstimatorOptions& opts, int replications,
                                    int resample_size, double level, std::uint64_t seed,
                                    int threads = 1) {
  return bootstrap_ci(frame_from_years(ys, spec), opts, replications, resample_size, level, seed,
                      threads);
}

struct PlaceboResult {
  struct Row {
    std::string unit;
    double effect = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    std::string note;
  };
  double true_effect = 0.0;
  std::size_t true_rank = 0;  // 1 = largest |effect| among treated and donors
  std::vector<Row> rows;      // one per donor
};

/// In-space placebo: treatment is reassigned to each donor in turn, with the
/// true treated unit removed from the pool, and the estimator re-run. The
/// rank benchmarks the true effect against the pseudo-effect distribution.
inline PlaceboResult in_space_placebo(const EstimationFrame& frame, const EstimatorOptions& opts) {
  const std::size_t n_donors = frame.donor_ids.size();
  if (n_donors < 3) throw std::invalid_argument("placebo: need at least 3 donors");

  PlaceboResult res;
  res.true_effect = average_effect(frame, opts);

  for (std::size_t d = 0; d < n_donors; ++d) {
    EstimationFrame pseudo;
    pseudo.labels = frame.labels;
    pseudo.pre = frame.pre;
    pseudo.post = frame.post;
    pseudo.treated = frame.donors.col(d);
    pseudo.donors = Matrix(frame.donors.rows, n_donors - 1);
    for (std::size_t c = 0, out = 0; c < n_donors; ++c) {
      if (c == d) continue;
      pseudo.donor_ids.push_back(frame.donor_ids[c]);
      for (std::size_t r = 0; r < frame.donors.rows; ++r)
        pseudo.donors(r, out) = frame.donors(r, c);
      ++out;
    }
    PlaceboResult::Row row;
    row.unit = frame.donor_ids[d];
    try {
      row.effect = average_effect(pseudo, opts);
      row.ok = std::isfinite(row.effect);
      if (!row.ok) row.note = "non-finite effect";
    } catch (const std::exception& e) {
      row.note = e.what();
    }
    res.rows.push_back(std::move(row));
  }

  res.true_rank = 1;
  for (const auto& row : res.rows)
    if (row.ok && std::abs(row.effect) > std::abs(res.true_effect)) ++res.true_rank;
  return res;
}

inline PlaceboResult in_space_placebo(const YearSeries& ys, const TreatmentSpec& spec,
                                      const EstimatorOptions& opts) {
  return in_space_placebo(frame_from_years(ys, spec), opts);
}

}  // namespace synthpanel
