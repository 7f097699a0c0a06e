#pragma once

#include <Eigen/Dense>
#include <utility>

#include "dabg/loss.hpp"
#include "dabg/train.hpp"

namespace dabg {

/// Lagged-cubic forcing adjustment of the fixed-point scheme
/// u_t - lap u - u = f_AC - (u_prev)^3: subtracts the time projections of the
/// cubed previous iterate from the forcing projections. The previous iterate
/// is read off the current network values, which enter as data only.
class LaggedCubicHook {
 public:
  LaggedCubicHook(const FProjectionCache& cache, int N, double T) : P_(cache.projector()) {
    const TimeInterval Ti(T);
    const Eigen::VectorXd& nodes = cache.nodes();
    Phi_.resize(N, nodes.size());
    for (Eigen::Index k = 0; k < nodes.size(); ++k) {
      const auto phi = eval_basis_family(BasisOrder::first, BasisKind::trial, N, nodes(k), Ti);
      for (int n = 0; n < N; ++n) Phi_(n, k) = phi[static_cast<std::size_t>(n)];
    }
  }

  /// F(j,q) -= (u_prev(x_q,.)^3, psi_j)
  void operator()(const Eigen::MatrixXd& Wv, const Eigen::MatrixXd& /*X*/,
                  Eigen::MatrixXd& F) const {
    const Eigen::MatrixXd U = Phi_.transpose() * Wv;  // K x Q values of u_prev at the nodes
    F.noalias() -= P_ * U.array().cube().matrix();
  }

  /// Cubic projections alone (oracle hook for tests).
  Eigen::MatrixXd cubic_projections(const Eigen::MatrixXd& Wv) const {
    const Eigen::MatrixXd U = Phi_.transpose() * Wv;
    return P_ * U.array().cube().matrix();
  }

 private:
  Eigen::MatrixXd P_;    // N x K quadrature projector
  Eigen::MatrixXd Phi_;  // N x K trial values at the nodes
};

/// Fixed-point training for the Allen-Cahn benchmark: the base loss must be
/// first order with the -u reaction absorbed into the operator (zeroth = -1)
/// and f_AC as its forcing; the lagged cubic is refreshed from the current
/// iterate inside every descent iteration.
inline TrainTrace fixed_point_allen_cahn(GalerkinLoss& loss, SpatialNets& nets,
                                         const BoundaryFactor& bf, const BatchProvider& batches,
                                         const TrainConfig& config) {
  loss.set_forcing_hook(LaggedCubicHook(loss.forcing_cache(), loss.spec().N, loss.spec().T));
  Eigen::VectorXd theta = nets.flatten();
  auto objective = [&](const Eigen::VectorXd& th, const Eigen::MatrixXd& batch,
                       Eigen::VectorXd& grad) {
    nets.set_flat(th);
    return loss.loss_and_grad(nets, bf, batch, grad);
  };
  TrainTrace trace = train(objective, batches, theta, config);
  nets.set_flat(theta);
  loss.set_forcing_hook(nullptr);
  return trace;
}

}  // namespace dabg
