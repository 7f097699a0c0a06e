#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dabg {

namespace detail {

inline double clamp_unit(double z) {
  constexpr double slack = 1e-12;
  if (z > 1.0) {
    if (z > 1.0 + slack) throw std::invalid_argument("legendre: argument outside [-1,1]");
    return 1.0;
  }
  if (z < -1.0) {
    if (z < -1.0 - slack) throw std::invalid_argument("legendre: argument outside [-1,1]");
    return -1.0;
  }
  return z;
}

}  // namespace detail

/// Values L_0(z)..L_N(z) by the upward three-term recurrence.
inline std::vector<double> legendre_all(int N, double z) {
  if (N < 0) throw std::invalid_argument("legendre_all: N must be >= 0");
  z = detail::clamp_unit(z);
  std::vector<double> L(static_cast<std::size_t>(N) + 1);
  L[0] = 1.0;
  if (N >= 1) L[1] = z;
  for (int n = 1; n < N; ++n)
    L[n + 1] = ((2.0 * n + 1.0) * z * L[n] - n * L[n - 1]) / (n + 1.0);
  return L;
}

/// Values L_0'(z)..L_N'(z) via L'_{n+1} = L'_{n-1} + (2n+1) L_n.
inline std::vector<double> legendre_deriv_all(int N, double z) {
  if (N < 0) throw std::invalid_argument("legendre_deriv_all: N must be >= 0");
  z = detail::clamp_unit(z);
  std::vector<double> L = legendre_all(N, z);
  std::vector<double> D(static_cast<std::size_t>(N) + 1);
  D[0] = 0.0;
  if (N >= 1) D[1] = 1.0;
  for (int n = 1; n < N; ++n) D[n + 1] = D[n - 1] + (2.0 * n + 1.0) * L[n];
  return D;
}

/// Second derivatives, same recurrence applied once more.
inline std::vector<double> legendre_deriv2_all(int N, double z) {
  if (N < 0) throw std::invalid_argument("legendre_deriv2_all: N must be >= 0");
  z = detail::clamp_unit(z);
  std::vector<double> D = legendre_deriv_all(N, z);
  std::vector<double> D2(static_cast<std::size_t>(N) + 1);
  D2[0] = 0.0;
  if (N >= 1) D2[1] = 0.0;
  for (int n = 1; n < N; ++n) D2[n + 1] = D2[n - 1] + (2.0 * n + 1.0) * D[n];
  return D2;
}

}  // namespace dabg
