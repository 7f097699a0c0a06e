#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dabg {

/// First n primes by trial division.
inline std::vector<int> first_primes(int n) {
  if (n < 1) throw std::invalid_argument("first_primes: n must be >= 1");
  std::vector<int> primes;
  primes.reserve(static_cast<std::size_t>(n));
  for (int candidate = 2; static_cast<int>(primes.size()) < n; ++candidate) {
    bool ok = true;
    for (int p : primes) {
      if (p * p > candidate) break;
      if (candidate % p == 0) {
        ok = false;
        break;
      }
    }
    if (ok) primes.push_back(candidate);
  }
  return primes;
}

/// Radical inverse of index i (>= 1) in the given base.
inline double radical_inverse(std::uint64_t i, int base) {
  double f = 1.0 / base, r = 0.0;
  while (i > 0) {
    r += static_cast<double>(i % static_cast<std::uint64_t>(base)) * f;
    i /= static_cast<std::uint64_t>(base);
    f /= base;
  }
  return r;
}

/// Position in a d-dimensional Halton sequence (prime bases, index from 1).
struct HaltonState {
  int dimension;
  std::uint64_t next_index = 1;
  std::vector<int> bases;

  explicit HaltonState(int d) : dimension(d), bases(first_primes(d)) {
    if (d < 1) throw std::invalid_argument("HaltonState: dimension must be >= 1");
  }

  /// Next point in [0,1)^d; advances the stream.
  Eigen::VectorXd next() {
    Eigen::VectorXd p(dimension);
    for (int i = 0; i < dimension; ++i) p(i) = radical_inverse(next_index, bases[i]);
    ++next_index;
    return p;
  }
};

/// `count` consecutive points as columns of a d x count matrix; state advances.
inline Eigen::MatrixXd halton_block(HaltonState& state, int count) {
  if (count < 1) throw std::invalid_argument("halton_block: count must be >= 1");
  Eigen::MatrixXd pts(state.dimension, count);
  for (int c = 0; c < count; ++c) pts.col(c) = state.next();
  return pts;
}

}  // namespace dabg
