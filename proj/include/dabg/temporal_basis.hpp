#pragma once

#include <stdexcept>
#include <vector>

#include "dabg/legendre.hpp"

namespace dabg {

/// Final time of the evolution interval [0,T].
struct TimeInterval {
  double T;
  explicit TimeInterval(double final_time) : T(final_time) {
    if (!(T > 0.0)) throw std::invalid_argument("TimeInterval: T must be positive");
  }
};

enum class BasisOrder { first, second };
enum class BasisKind { trial, test };

/// Identifies one member of the four temporal basis families.
struct TemporalBasisId {
  BasisOrder order;
  BasisKind kind;
  int index;  // n >= 1
};

namespace detail {

inline void check_index(int n) {
  if (n < 1) throw std::invalid_argument("temporal basis: index must be >= 1");
}

// Combination coefficients of the basis member in terms of L_{n}, L_{n-1}, L_{n-2}
// of the shifted variable z = 2t/T - 1. Unused slots are zero.
struct Combo {
  int deg;  // highest Legendre degree involved
  double c0, c1, c2;  // coefficients of L_{deg}, L_{deg-1}, L_{deg-2}
};

inline Combo basis_combo(const TemporalBasisId& id) {
  check_index(id.index);
  const int n = id.index;
  if (id.order == BasisOrder::first) {
    if (id.kind == BasisKind::trial) return {n, 1.0, 1.0, 0.0};          // L_n + L_{n-1}
    if (n == 1) return {0, 1.0, 0.0, 0.0};                               // L_0
    return {n - 1, 1.0, -1.0, 0.0};                                      // L_{n-1} - L_{n-2}
  }
  if (id.kind == BasisKind::trial) {
    if (n == 1) return {1, 1.0, 1.0, 0.0};                               // L_1 + L_0
    return {n, 1.0 - 1.0 / n, 2.0 - 1.0 / n, 1.0};
  }
  if (n == 1) return {1, 1.0, -1.0, 0.0};                                // L_1 - L_0
  return {n, 1.0 - 1.0 / n, -(2.0 - 1.0 / n), 1.0};
}

}  // namespace detail

/// Basis value at time t in [0,T].
inline double eval_basis(const TemporalBasisId& id, double t, const TimeInterval& T) {
  const auto c = detail::basis_combo(id);
  const double z = 2.0 * t / T.T - 1.0;
  const auto L = legendre_all(c.deg, z);
  double v = c.c0 * L[c.deg];
  if (c.deg >= 1) v += c.c1 * L[c.deg - 1];
  if (c.deg >= 2) v += c.c2 * L[c.deg - 2];
  return v;
}

/// d/dt of the basis member; chain rule carries the 2/T factor.
inline double eval_basis_deriv(const TemporalBasisId& id, double t, const TimeInterval& T) {
  const auto c = detail::basis_combo(id);
  const double z = 2.0 * t / T.T - 1.0;
  const auto D = legendre_deriv_all(c.deg, z);
  double v = c.c0 * D[c.deg];
  if (c.deg >= 1) v += c.c1 * D[c.deg - 1];
  if (c.deg >= 2) v += c.c2 * D[c.deg - 2];
  return v * 2.0 / T.T;
}

/// d^2/dt^2 of the basis member.
inline double eval_basis_deriv2(const TemporalBasisId& id, double t, const TimeInterval& T) {
  const auto c = detail::basis_combo(id);
  const double z = 2.0 * t / T.T - 1.0;
  const auto D2 = legendre_deriv2_all(c.deg, z);
  double v = c.c0 * D2[c.deg];
  if (c.deg >= 1) v += c.c1 * D2[c.deg - 1];
  if (c.deg >= 2) v += c.c2 * D2[c.deg - 2];
  const double s = 2.0 / T.T;
  return v * s * s;
}

/// Values of one whole family (n = 1..N) at a single time, sharing one recurrence sweep.
inline std::vector<double> eval_basis_family(BasisOrder order, BasisKind kind, int N, double t,
                                             const TimeInterval& T) {
  if (N < 1) throw std::invalid_argument("eval_basis_family: N must be >= 1");
  const double z = 2.0 * t / T.T - 1.0;
  const auto L = legendre_all(N, z);
  std::vector<double> out(static_cast<std::size_t>(N));
  for (int n = 1; n <= N; ++n) {
    const auto c = detail::basis_combo({order, kind, n});
    double v = c.c0 * L[c.deg];
    if (c.deg >= 1) v += c.c1 * L[c.deg - 1];
    if (c.deg >= 2) v += c.c2 * L[c.deg - 2];
    out[n - 1] = v;
  }
  return out;
}

inline std::vector<double> eval_basis_family_deriv(BasisOrder order, BasisKind kind, int N,
                                                   double t, const TimeInterval& T) {
  if (N < 1) throw std::invalid_argument("eval_basis_family_deriv: N must be >= 1");
  const double z = 2.0 * t / T.T - 1.0;
  const auto D = legendre_deriv_all(N, z);
  std::vector<double> out(static_cast<std::size_t>(N));
  for (int n = 1; n <= N; ++n) {
    const auto c = detail::basis_combo({order, kind, n});
    double v = c.c0 * D[c.deg];
    if (c.deg >= 1) v += c.c1 * D[c.deg - 1];
    if (c.deg >= 2) v += c.c2 * D[c.deg - 2];
    out[n - 1] = v * 2.0 / T.T;
  }
  return out;
}

}  // namespace dabg
