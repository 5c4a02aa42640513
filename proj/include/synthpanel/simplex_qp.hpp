#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "synthpanel/matrix.hpp"

namespace synthpanel {

struct SimplexQpResult {
  std::vector<double> weights;
  double objective = 0.0;
  int iterations = 0;
};

namespace detail {

// Minimizer of w'Gw - 2c'w over the affine hull of the support face
// (sum of the supported coordinates = 1, others fixed at zero).
// KKT system: [2 G_SS, 1; 1', 0] [w; mu] = [2 c_S; 1].
inline bool solve_face(const Matrix& gram, std::span<const double> lin,
                       const std::vector<std::size_t>& support, std::vector<double>& out) {
  const std::size_t k = support.size();
  Matrix kkt(k + 1, k + 1, 0.0);
  std::vector<double> rhs(k + 1, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) kkt(a, b) = 2.0 * gram(support[a], support[b]);
    kkt(a, k) = 1.0;
    kkt(k, a) = 1.0;
    rhs[a] = 2.0 * lin[support[a]];
  }
  rhs[k] = 1.0;
  std::vector<double> sol;
  if (!solve_linear_system(kkt, rhs, sol)) {
    // Singular face (duplicate or collinear donors): retry with a ridge that
    // sits far below every tolerance used downstream.
    double trace = 0.0;
    for (std::size_t a = 0; a < k; ++a) trace += std::abs(gram(support[a], support[a]));
    const double ridge = 1e-10 * (1.0 + trace / static_cast<double>(k));
    for (std::size_t a = 0; a < k; ++a) kkt(a, a) += 2.0 * ridge;
    if (!solve_linear_system(kkt, rhs, sol)) return false;
  }
  out.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(k));
  return true;
}

}  // namespace detail

/// Minimizes f(w) = w'Gw - 2 c'w + c0 over the probability simplex.
///
/// Fully corrective Frank-Wolfe: every outer iteration re-solves the active
/// face exactly (ratio tests keep iterates feasible, zeroed coordinates leave
/// the face), then activates the steepest descent vertex. The Frank-Wolfe
/// gap bounds the suboptimality directly, so the returned point is optimal up
/// to the gap tolerance; feasibility holds by construction.
inline SimplexQpResult minimize_on_simplex(const Matrix& gram, std::span<const double> lin,
                                           double constant = 0.0) {
  const std::size_t dim = gram.rows;
  if (dim == 0) throw std::invalid_argument("minimize_on_simplex: empty problem");
  if (gram.cols != dim || lin.size() != dim)
    throw std::invalid_argument("minimize_on_simplex: dimension mismatch");

  auto objective = [&](std::span<const double> w) {
    return dot(w, mat_vec(gram, w)) - 2.0 * dot(lin, w) + constant;
  };

  SimplexQpResult res;
  res.weights.assign(dim, 1.0 / static_cast<double>(dim));
  if (dim == 1) {
    res.objective = objective(res.weights);
    res.iterations = 1;
    return res;
  }

  double scale = 1.0;
  for (double v : gram.data) scale = std::max(scale, std::abs(v));
  for (double v : lin) scale = std::max(scale, std::abs(v));
  const double gap_tol = 1e-11 * scale;
  const int max_iter = 10000;

  std::vector<double>& w = res.weights;
  std::vector<std::uint8_t> active(dim, 1);

  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    // Corrective phase: optimize exactly over the active face.
    for (;;) {
      std::vector<std::size_t> support;
      for (std::size_t i = 0; i < dim; ++i)
        if (active[i]) support.push_back(i);

      std::vector<double> z;
      if (support.size() == 1) {
        z = {1.0};
      } else if (!detail::solve_face(gram, lin, support, z)) {
        break;  // degenerate face even after ridge; keep the current iterate
      }

      bool inside = true;
      for (double v : z)
        if (v < -1e-13) {
          inside = false;
          break;
        }

      if (inside) {
        std::fill(w.begin(), w.end(), 0.0);
        double total = 0.0;
        for (std::size_t a = 0; a < support.size(); ++a) {
          double v = std::max(z[a], 0.0);
          w[support[a]] = v;
          total += v;
        }
        for (double& v : w) v /= total;
        for (std::size_t i = 0; i < dim; ++i) active[i] = w[i] > 0.0 ? 1 : 0;
        break;
      }

      // Ratio test: walk toward z until the first coordinate hits zero.
      double alpha = 1.0;
      std::size_t drop = dim;
      for (std::size_t a = 0; a < support.size(); ++a) {
        if (z[a] >= 0.0) continue;
        double wi = w[support[a]];
        double step = wi / (wi - z[a]);
        if (step < alpha) {
          alpha = step;
          drop = support[a];
        }
      }
      double total = 0.0;
      for (std::size_t a = 0; a < support.size(); ++a) {
        std::size_t i = support[a];
        w[i] = (1.0 - alpha) * w[i] + alpha * z[a];
        if (i == drop || w[i] < 1e-15) w[i] = 0.0;
        total += w[i];
      }
      for (std::size_t a = 0; a < support.size(); ++a) w[support[a]] /= total;
      if (drop != dim) active[drop] = 0;
    }

    // Vertex selection; the gap certifies optimality.
    std::vector<double> gw = mat_vec(gram, w);
    std::size_t best = 0;
    double best_grad = std::numeric_limits<double>::infinity();
    double grad_dot_w = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      double gi = 2.0 * (gw[i] - lin[i]);
      grad_dot_w += gi * w[i];
      if (gi < best_grad) {
        best_grad = gi;
        best = i;
      }
    }
    if (grad_dot_w - best_grad <= gap_tol) break;
    if (active[best]) break;  // face already optimal; remaining gap is noise
    active[best] = 1;
  }

  res.objective = objective(w);
  return res;
}

}  // namespace synthpanel
