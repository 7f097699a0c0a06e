#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dabg/legendre.hpp"
#include "dabg/temporal_basis.hpp"

namespace dabg {

/// Gauss-Legendre rule on [0,T]; weights sum to T.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  double T = 0.0;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

// K-point Gauss-Legendre nodes/weights on [-1,1]: Newton iteration on L_K
// from Chebyshev initial guesses. Symmetric pairs are mirrored.
inline void gauss_reference(int K, std::vector<double>& x, std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(K), 0.0);
  w.assign(static_cast<std::size_t>(K), 0.0);
  const int half = (K + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (K + 0.5));
    double dL = 0.0;
    for (int it = 0; it < 100; ++it) {
      // recurrence for L_K(z) and L_K'(z)
      double p0 = 1.0, p1 = z;
      for (int n = 1; n < K; ++n) {
        const double p2 = ((2.0 * n + 1.0) * z * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dL = K * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dL;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[K - 1 - i] = z;
    const double wi = 2.0 / ((1.0 - z * z) * dL * dL);
    w[i] = wi;
    w[K - 1 - i] = wi;
  }
}

}  // namespace detail

/// K-node Gauss-Legendre rule mapped to [0,T] (exact for degree 2K-1).
inline QuadratureRule gauss_quadrature_nodes(int K, const TimeInterval& T) {
  if (K < 1) throw std::invalid_argument("gauss_quadrature_nodes: need at least one node");
  std::vector<double> x, w;
  detail::gauss_reference(K, x, w);
  QuadratureRule rule;
  rule.T = T.T;
  rule.nodes.resize(x.size());
  rule.weights.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    rule.nodes[i] = 0.5 * T.T * (x[i] + 1.0);
    rule.weights[i] = 0.5 * T.T * w[i];
  }
  return rule;
}

/// Smallest rule exact for polynomials of the given degree on [0,T].
inline QuadratureRule gauss_quadrature(int degree, const TimeInterval& T) {
  if (degree < 1) throw std::invalid_argument("gauss_quadrature: degree must be >= 1");
  return gauss_quadrature_nodes(degree / 2 + 1, T);
}

inline double integrate(const QuadratureRule& rule, const std::function<double(double)>& g) {
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) acc += rule.weights[k] * g(rule.nodes[k]);
  return acc;
}

/// Quadrature approximation of the inner product (g, psi_id) over [0,T].
inline double time_inner_product(const std::function<double(double)>& g,
                                 const TemporalBasisId& id, const QuadratureRule& rule) {
  const TimeInterval T(rule.T);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k)
    acc += rule.weights[k] * g(rule.nodes[k]) * eval_basis(id, rule.nodes[k], T);
  return acc;
}

/// Legendre coefficients g_hat_0..g_hat_N of the L^2 projection onto P^N([0,T]),
/// g_hat_n = (2n+1)/T * integral of g(t) L_n(2t/T - 1).
inline std::vector<double> project_time(const std::function<double(double)>& g, int N,
                                        const TimeInterval& T, int nodes = 0) {
  if (N < 0) throw std::invalid_argument("project_time: N must be >= 0");
  if (nodes <= 0) nodes = std::max(2 * N + 16, 64);
  const QuadratureRule rule = gauss_quadrature_nodes(nodes, T);
  std::vector<double> coeffs(static_cast<std::size_t>(N) + 1, 0.0);
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double z = 2.0 * rule.nodes[k] / T.T - 1.0;
    const auto L = legendre_all(N, z);
    const double wg = rule.weights[k] * g(rule.nodes[k]);
    for (int n = 0; n <= N; ++n) coeffs[n] += wg * L[n];
  }
  for (int n = 0; n <= N; ++n) coeffs[n] *= (2.0 * n + 1.0) / T.T;
  return coeffs;
}

/// Evaluate a shifted-Legendre series sum c_n L_n(2t/T - 1).
inline double legendre_series_eval(const std::vector<double>& coeffs, double t,
                                   const TimeInterval& T) {
  if (coeffs.empty()) return 0.0;
  const int N = static_cast<int>(coeffs.size()) - 1;
  const auto L = legendre_all(N, 2.0 * t / T.T - 1.0);
  double v = 0.0;
  for (int n = 0; n <= N; ++n) v += coeffs[n] * L[n];
  return v;
}

}  // namespace dabg
