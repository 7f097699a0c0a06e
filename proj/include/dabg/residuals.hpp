#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dabg/band_matrix.hpp"
#include "dabg/quadrature.hpp"
#include "dabg/temporal_basis.hpp"

namespace dabg {

/// Residual weights r_j = N^{-3} sum_{k=j..N} k(2k-1); decreasing, r_1 = O(1),
/// r_N = (2N-1)/N^2.
inline Eigen::VectorXd residual_weights(int N) {
  if (N < 1) throw std::invalid_argument("residual_weights: N must be >= 1");
  Eigen::VectorXd r(N);
  double suffix = 0.0;
  for (int j = N; j >= 1; --j) {
    suffix += static_cast<double>(j) * (2.0 * j - 1.0);
    r(j - 1) = suffix;
  }
  r /= static_cast<double>(N) * N * N;
  return r;
}

/// Forcing evaluated on fixed quadrature nodes for one spatial point; heavy
/// per-point subexpressions can be hoisted by supplying a slice factory.
using TimeSlice = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& out)>;
using TimeSliceFactory = std::function<TimeSlice(const Eigen::VectorXd& nodes)>;

inline TimeSliceFactory slice_factory_from_pointwise(
    std::function<double(const Eigen::VectorXd&, double)> f) {
  return [f = std::move(f)](const Eigen::VectorXd& nodes) -> TimeSlice {
    return [f, nodes](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
      out.resize(nodes.size());
      for (Eigen::Index k = 0; k < nodes.size(); ++k) out(k) = f(x, nodes(k));
    };
  };
}

/// Per-j time integrals (f(x,.), psi_j) cached as closures over x, evaluated
/// by a fixed Gauss rule; optionally also the inner product against
/// L_N(2t/T-1) needed by the second-order regularization term.
class FProjectionCache {
 public:
  FProjectionCache(TimeSliceFactory factory, BasisOrder order, int N, const TimeInterval& T,
                   int nodes = 0, bool with_ln_term = false)
      : N_(N), with_ln_(with_ln_term) {
    if (N < 1) throw std::invalid_argument("FProjectionCache: N must be >= 1");
    if (nodes <= 0) nodes = std::max(2 * N + 16, 64);
    rule_ = gauss_quadrature_nodes(nodes, T);
    const Eigen::Index K = static_cast<Eigen::Index>(rule_.size());
    nodes_ = Eigen::Map<const Eigen::VectorXd>(rule_.nodes.data(), K);
    P_.resize(N, K);
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto psi = eval_basis_family(order, BasisKind::test, N, rule_.nodes[k], T);
      for (int j = 0; j < N; ++j) P_(j, k) = rule_.weights[static_cast<std::size_t>(k)] * psi[static_cast<std::size_t>(j)];
    }
    if (with_ln_) {
      LN_.resize(K);
      for (Eigen::Index k = 0; k < K; ++k) {
        const double z = 2.0 * rule_.nodes[k] / T.T - 1.0;
        LN_(k) = rule_.weights[static_cast<std::size_t>(k)] * legendre_all(N, z)[static_cast<std::size_t>(N)];
      }
    }
    slice_ = factory(nodes_);
  }

  FProjectionCache(std::function<double(const Eigen::VectorXd&, double)> f, BasisOrder order,
                   int N, const TimeInterval& T, int nodes = 0, bool with_ln_term = false)
      : FProjectionCache(slice_factory_from_pointwise(std::move(f)), order, N, T, nodes,
                         with_ln_term) {}

  int basis_count() const { return N_; }
  const QuadratureRule& rule() const { return rule_; }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  /// Quadrature projector: row j holds w_k psi_j(t_k).
  const Eigen::MatrixXd& projector() const { return P_; }
  /// Weighted L_N values (empty unless requested).
  const Eigen::VectorXd& ln_row() const { return LN_; }

  /// All N projections at one point (plus the L_N integral when cached).
  void eval(const Eigen::VectorXd& x, Eigen::VectorXd& proj, double* ln = nullptr) const {
    Eigen::VectorXd fx;
    slice_(x, fx);
    proj.noalias() = P_ * fx;
    if (ln) *ln = with_ln_ ? LN_.dot(fx) : 0.0;
  }

  /// Batched: F is N x Q; FLN (optional) is Q.
  void eval_batch(const Eigen::MatrixXd& X, Eigen::MatrixXd& F, Eigen::VectorXd* FLN) const {
    const Eigen::Index Q = X.cols();
    F.resize(N_, Q);
    if (FLN) FLN->resize(Q);
    Eigen::VectorXd fx;
    for (Eigen::Index q = 0; q < Q; ++q) {
      slice_(X.col(q), fx);
      F.col(q).noalias() = P_ * fx;
      if (FLN) (*FLN)(q) = with_ln_ ? LN_.dot(fx) : 0.0;
    }
  }

  /// The per-j closure form of the cache.
  std::function<double(const Eigen::VectorXd&)> closure(int j) const {
    if (j < 1 || j > N_) throw std::out_of_range("FProjectionCache: j outside 1..N");
    return [this, j](const Eigen::VectorXd& x) {
      Eigen::VectorXd proj;
      eval(x, proj);
      return proj(j - 1);
    };
  }

 private:
  int N_;
  bool with_ln_;
  QuadratureRule rule_;
  Eigen::VectorXd nodes_;
  Eigen::MatrixXd P_;
  Eigen::VectorXd LN_;
  TimeSlice slice_;
};

/// Band-sweep counters (verifies the sparsity claims of the residual sums).
struct ResidualStats {
  int max_terms_row_ge2 = 0;    // nonzero a- plus b-terms in one residual row
  int max_bundles_row_ge2 = 0;  // distinct spatial networks touched
};

/// Row sweep R = sign_a * A W + sign_b * B L over stored nonzeros only.
inline void band_residual_rows(const BandMatrix& A, const BandMatrix& B,
                               const Eigen::MatrixXd& W, const Eigen::MatrixXd& L,
                               double sign_b, Eigen::MatrixXd& R, ResidualStats* stats) {
  const int N = A.dim();
  for (int j = 1; j <= N; ++j) {
    auto row = R.row(j - 1);
    int terms = 0;
    std::vector<int> touched;
    for (const auto& [n, v] : A.row(j)) {
      row += v * W.row(n - 1);
      ++terms;
      touched.push_back(n);
    }
    for (const auto& [n, v] : B.row(j)) {
      row += sign_b * v * L.row(n - 1);
      ++terms;
      touched.push_back(n);
    }
    if (stats && j >= 2) {
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      stats->max_terms_row_ge2 = std::max(stats->max_terms_row_ge2, terms);
      stats->max_bundles_row_ge2 =
          std::max(stats->max_bundles_row_ge2, static_cast<int>(touched.size()));
    }
  }
}

}  // namespace dabg
