#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dabg/boundary.hpp"
#include "dabg/galerkin.hpp"
#include "dabg/operators.hpp"
#include "dabg/residuals.hpp"
#include "dabg/solution.hpp"

namespace dabg {

/// Everything that defines one Galerkin least-squares objective: truncation,
/// horizon, regularization weight, spatial operator, forcing, and (second
/// order) the initial-velocity data.
struct GalerkinLossSpec {
  BasisOrder order = BasisOrder::first;
  int N = 1;
  double T = 1.0;
  double lambda = 1.0;
  SpatialOperator op = SpatialOperator::neg_laplacian();
  TimeSliceFactory f_factory;
  std::function<double(const Eigen::VectorXd&)> g0;  // second order; null means zero
  int quad_nodes = 0;
  double domain_volume = 1.0;
};

/// Weighted least-squares residual of the time-Galerkin system over the
/// spatial networks. First order: J = sum_j r_j ||R_j||^2 + lambda N^-4
/// ||L w_N||^2. Second order: J = sum_j ||R_j||^2 + lambda N^-5 ||I||^2 with
/// I = (phi_N, L~_N) L w_N - integral of f L~_N.
class GalerkinLoss {
 public:
  explicit GalerkinLoss(GalerkinLossSpec spec)
      : spec_(std::move(spec)),
        fproj_(spec_.f_factory, spec_.order, spec_.N, TimeInterval(spec_.T), spec_.quad_nodes,
               /*with_ln_term=*/spec_.order == BasisOrder::second) {
    const TimeInterval T(spec_.T);
    const int N = spec_.N;
    auto [A, B] = spec_.order == BasisOrder::first ? assemble_first_order(N, T)
                                                   : assemble_second_order(N, T);
    A_ = std::move(A);
    B_ = std::move(B);
    acols_.assign(static_cast<std::size_t>(N), {});
    bcols_.assign(static_cast<std::size_t>(N), {});
    for (int j = 1; j <= N; ++j) {
      for (const auto& [n, v] : A_.row(j)) acols_[static_cast<std::size_t>(n - 1)].emplace_back(j, v);
      for (const auto& [n, v] : B_.row(j)) bcols_[static_cast<std::size_t>(n - 1)].emplace_back(j, v);
    }
    if (spec_.order == BasisOrder::first) {
      weights_ = residual_weights(N);
    } else {
      psi0_.resize(N);
      for (int j = 1; j <= N; ++j)
        psi0_(j - 1) = eval_basis({BasisOrder::second, BasisKind::test, j}, 0.0, T);
      // (phi_N, L_N(2t/T-1)): leading Legendre coefficient of phi_N times T/(2N+1)
      const double lead = N == 1 ? 1.0 : 1.0 - 1.0 / N;
      kappa_ = lead * spec_.T / (2.0 * N + 1.0);
    }
  }

  /// Lagged forcing adjustment: called with the current network values before
  /// residual assembly; mutates F in place and is treated as data (no
  /// gradient flows through it).
  using ForcingHook =
      std::function<void(const Eigen::MatrixXd& Wv, const Eigen::MatrixXd& X, Eigen::MatrixXd& F)>;
  void set_forcing_hook(ForcingHook hook) { hook_ = std::move(hook); }

  const GalerkinLossSpec& spec() const { return spec_; }
  const BandMatrix& A() const { return A_; }
  const BandMatrix& B() const { return B_; }
  const FProjectionCache& forcing_cache() const { return fproj_; }
  double regularizer_coefficient() const { return kappa_; }

  double loss(const SpatialNets& nets, const BoundaryFactor& bf, const Eigen::MatrixXd& X,
              ResidualStats* stats = nullptr) const {
    Batch b;
    prepare(nets, bf, X, b, stats);
    return b.loss;
  }

  double loss_and_grad(const SpatialNets& nets, const BoundaryFactor& bf,
                       const Eigen::MatrixXd& X, Eigen::VectorXd& grad) const {
    Batch b;
    prepare(nets, bf, X, b, nullptr);
    const int N = spec_.N;
    const Eigen::Index Q = X.cols();
    const double scale = spec_.domain_volume / static_cast<double>(Q);

    // seeds on the residual rows
    Eigen::MatrixXd S = 2.0 * scale * b.R;
    if (spec_.order == BasisOrder::first)
      S.array().colwise() *= weights_.array();

    // seeds on W (values) and LW (operator outputs)
    Eigen::MatrixXd Vbar = Eigen::MatrixXd::Zero(N, Q);
    Eigen::MatrixXd Lbar = Eigen::MatrixXd::Zero(N, Q);
    const double bsign = spec_.order == BasisOrder::first ? 1.0 : -1.0;
    for (int n = 1; n <= N; ++n) {
      for (const auto& [j, v] : acols_[static_cast<std::size_t>(n - 1)])
        Vbar.row(n - 1) += v * S.row(j - 1);
      for (const auto& [j, v] : bcols_[static_cast<std::size_t>(n - 1)])
        Lbar.row(n - 1) += bsign * v * S.row(j - 1);
    }
    if (spec_.order == BasisOrder::first) {
      const double c = 2.0 * spec_.lambda * std::pow(static_cast<double>(N), -4.0) * scale;
      Lbar.row(N - 1) += c * b.LW.row(N - 1);
    } else {
      const double c = 2.0 * spec_.lambda * std::pow(static_cast<double>(N), -5.0) * scale;
      Lbar.row(N - 1) += c * kappa_ * b.I.transpose();
    }

    // operator and boundary-product adjoints per network
    std::vector<BundleSeeds> seeds(static_cast<std::size_t>(N));
    const int d = nets.input_dim();
    for (int n = 0; n < N; ++n) {
      const Eigen::VectorXd lrow = Lbar.row(n).transpose();
      Eigen::VectorXd wv_bar = Vbar.row(n).transpose() + spec_.op.zeroth() * lrow;
      Eigen::MatrixXd wg_bar(d, Q);
      for (int i = 0; i < d; ++i)
        wg_bar.row(i) = -b.grad_a.row(i).cwiseProduct(lrow.transpose());
      Eigen::VectorXd wl_bar = -b.a.cwiseProduct(lrow);
      auto& s = seeds[static_cast<std::size_t>(n)];
      product_bundle_adjoint(b.nu, wv_bar, wg_bar, wl_bar, s.vbar, s.gbar, s.lbar);
    }
    grad = nets.backward(X, seeds);
    return b.loss;
  }

  /// Residual vector (R_1..R_N)(x) at a single point.
  Eigen::VectorXd residuals(const SpatialNets& nets, const BoundaryFactor& bf,
                            const Eigen::VectorXd& x, ResidualStats* stats = nullptr) const {
    Batch b;
    prepare(nets, bf, x, b, stats);
    return b.R.col(0);
  }

  /// Residual matrix (N x Q) over a batch.
  Eigen::MatrixXd residual_batch(const SpatialNets& nets, const BoundaryFactor& bf,
                                 const Eigen::MatrixXd& X, ResidualStats* stats = nullptr) const {
    Batch b;
    prepare(nets, bf, X, b, stats);
    return b.R;
  }

 private:
  struct Batch {
    BoundaryBatch nu;
    Eigen::VectorXd a;
    Eigen::MatrixXd grad_a;
    Eigen::MatrixXd W, LW;  // N x Q values and operator outputs
    Eigen::MatrixXd F;      // N x Q forcing projections
    Eigen::VectorXd FLN;    // Q (second order)
    Eigen::VectorXd I;      // Q (second order)
    Eigen::MatrixXd R;      // N x Q residuals
    double loss = 0.0;
  };

  void prepare(const SpatialNets& nets, const BoundaryFactor& bf, const Eigen::MatrixXd& X,
               Batch& b, ResidualStats* stats) const {
    const int N = spec_.N;
    if (nets.count() != N) throw std::invalid_argument("GalerkinLoss: nets.count() != N");
    const Eigen::Index Q = X.cols();
    bf.bundle_batch(X, b.nu);
    spec_.op.coefficients(X, b.a, b.grad_a);

    b.W.resize(N, Q);
    b.LW.resize(N, Q);
    {
      const auto bundles = nets.forward(X);
      BundleBatch w;
      for (int n = 0; n < N; ++n) {
        product_bundle(b.nu, bundles[static_cast<std::size_t>(n)], w);
        b.W.row(n) = w.value.transpose();
        Eigen::VectorXd lw = -b.a.cwiseProduct(w.laplacian) + spec_.op.zeroth() * w.value;
        lw -= (b.grad_a.cwiseProduct(w.gradient)).colwise().sum().transpose();
        b.LW.row(n) = lw.transpose();
      }
    }
    if (!b.W.allFinite() || !b.LW.allFinite()) {
      for (int n = 0; n < N; ++n)
        for (Eigen::Index q = 0; q < Q; ++q)
          if (!std::isfinite(b.W(n, q)) || !std::isfinite(b.LW(n, q)))
            throw std::runtime_error("GalerkinLoss: non-finite bundle for network " +
                                     std::to_string(n + 1) + " at batch point " +
                                     std::to_string(q));
    }

    fproj_.eval_batch(X, b.F, spec_.order == BasisOrder::second ? &b.FLN : nullptr);
    if (hook_) hook_(b.W, X, b.F);

    b.R = Eigen::MatrixXd::Zero(N, Q);
    if (spec_.order == BasisOrder::first) {
      b.R -= b.F;
      band_residual_rows(A_, B_, b.W, b.LW, +1.0, b.R, stats);
      double acc = 0.0;
      for (int j = 0; j < N; ++j) acc += weights_(j) * b.R.row(j).squaredNorm();
      const double reg = spec_.lambda * std::pow(static_cast<double>(N), -4.0) *
                         b.LW.row(N - 1).squaredNorm();
      b.loss = spec_.domain_volume / static_cast<double>(Q) * (acc + reg);
    } else {
      b.R += b.F;
      if (spec_.g0) {
        Eigen::VectorXd g0v(Q);
        for (Eigen::Index q = 0; q < Q; ++q) g0v(q) = spec_.g0(X.col(q));
        b.R += psi0_ * g0v.transpose();
      }
      band_residual_rows(A_, B_, b.W, b.LW, -1.0, b.R, stats);
      b.I = kappa_ * b.LW.row(N - 1).transpose() - b.FLN;
      const double reg =
          spec_.lambda * std::pow(static_cast<double>(N), -5.0) * b.I.squaredNorm();
      b.loss = spec_.domain_volume / static_cast<double>(Q) * (b.R.squaredNorm() + reg);
    }
  }

  GalerkinLossSpec spec_;
  FProjectionCache fproj_;
  BandMatrix A_{1}, B_{1};
  std::vector<std::vector<std::pair<int, double>>> acols_, bcols_;
  Eigen::VectorXd weights_;  // first order
  Eigen::VectorXd psi0_;     // second order: psi_j(0)
  double kappa_ = 0.0;       // second order: (phi_N, L~_N)
  ForcingHook hook_;
};

/// Space-time least-squares baseline on the hypothesis u = t^beta nu(x)
/// phi(x,t): J = ||du/dt + L u - f||^2 over Omega x (0,T] (beta = 1), or with
/// the second time derivative for beta = 2.
struct DlsLossSpec {
  int beta = 1;
  SpatialOperator op = SpatialOperator::neg_laplacian();
  std::function<double(const Eigen::VectorXd&, double)> f;
  double T = 1.0;
  double domain_volume = 1.0;
};

class DlsLoss {
 public:
  DlsLossSpec spec;

  explicit DlsLoss(DlsLossSpec s) : spec(std::move(s)) {
    if (spec.beta != 1 && spec.beta != 2)
      throw std::invalid_argument("DlsLoss: beta must be 1 or 2");
  }

  double loss(const MlpParams& net, const BoundaryFactor& bf, const Eigen::MatrixXd& XT) const {
    MlpWorkspace ws;
    return run(ws, net, bf, XT, nullptr);
  }

  double loss_and_grad(const MlpParams& net, const BoundaryFactor& bf, const Eigen::MatrixXd& XT,
                       Eigen::VectorXd& grad) const {
    MlpWorkspace ws;
    return run(ws, net, bf, XT, &grad);
  }

 private:
  double run(MlpWorkspace& ws, const MlpParams& net, const BoundaryFactor& bf,
             const Eigen::MatrixXd& XT, Eigen::VectorXd* grad) const {
    const int dt = net.input_dim;  // spatial dims + time
    const int d = dt - 1;
    const Eigen::Index Q = XT.cols();
    if (XT.rows() != dt) throw std::invalid_argument("DlsLoss: batch must be (d+1) x Q");
    const Eigen::MatrixXd X = XT.topRows(d);
    const Eigen::ArrayXd t = XT.row(d).transpose().array();

    const BundleBatch& bu = ws.forward(net, XT, true);
    Eigen::MatrixXd Hd;
    ws.readout_hdiag(net.a, dt, Q, Hd);

    BoundaryBatch nu;
    bf.bundle_batch(X, nu);
    Eigen::VectorXd aw;
    Eigen::MatrixXd ga;
    spec.op.coefficients(X, aw, ga);

    const Eigen::ArrayXd V = bu.value.array();
    const Eigen::ArrayXd Jt = bu.gradient.row(d).transpose().array();
    const Eigen::ArrayXd Ht = Hd.row(d).transpose().array();
    const Eigen::ArrayXd nv = nu.value.array();
    const Eigen::ArrayXd nl = nu.laplacian.array();

    const Eigen::ArrayXd tb = spec.beta == 1 ? Eigen::ArrayXd(t) : Eigen::ArrayXd(t.square());

    // spatial bundle of nu * phi at fixed time and its operator image
    Eigen::ArrayXd gdot = Eigen::ArrayXd::Zero(Q);  // grad a . grad(nu phi)
    Eigen::ArrayXd cross = Eigen::ArrayXd::Zero(Q);
    Eigen::ArrayXd hsum = Eigen::ArrayXd::Zero(Q);
    for (int i = 0; i < d; ++i) {
      const Eigen::ArrayXd ngi = nu.gradient.row(i).transpose().array();
      const Eigen::ArrayXd pgi = bu.gradient.row(i).transpose().array();
      gdot += ga.row(i).transpose().array() * (V * ngi + nv * pgi);
      cross += ngi * pgi;
      hsum += Hd.row(i).transpose().array();
    }
    const Eigen::ArrayXd wlap = V * nl + 2.0 * cross + nv * hsum;
    const Eigen::ArrayXd wv = nv * V;
    const Eigen::ArrayXd Lw = -gdot - aw.array() * wlap + spec.op.zeroth() * wv;

    Eigen::ArrayXd Dt;
    if (spec.beta == 1)
      Dt = nv * (V + t * Jt);
    else
      Dt = nv * (2.0 * V + 4.0 * t * Jt + t.square() * Ht);

    Eigen::ArrayXd fv(Q);
    for (Eigen::Index q = 0; q < Q; ++q) fv(q) = spec.f(X.col(q), t(q));

    const Eigen::ArrayXd res = Dt + tb * Lw - fv;
    const double scale = spec.domain_volume * spec.T / static_cast<double>(Q);
    const double loss = scale * res.square().sum();
    if (!std::isfinite(loss)) throw std::runtime_error("DlsLoss: non-finite loss");
    if (!grad) return loss;

    const Eigen::ArrayXd rbar = 2.0 * scale * res;
    Eigen::VectorXd vbar = Eigen::VectorXd::Zero(Q);
    Eigen::MatrixXd gbar = Eigen::MatrixXd::Zero(dt, Q);
    Eigen::MatrixXd hbar = Eigen::MatrixXd::Zero(dt, Q);

    // time-derivative block
    if (spec.beta == 1) {
      vbar.array() += rbar * nv;
      gbar.row(d).transpose().array() += rbar * nv * t;
    } else {
      vbar.array() += 2.0 * rbar * nv;
      gbar.row(d).transpose().array() += 4.0 * rbar * nv * t;
      hbar.row(d).transpose().array() += rbar * nv * t.square();
    }

    // t^beta * L(nu phi) block
    const Eigen::ArrayXd lL = rbar * tb;                  // adjoint on Lw
    const Eigen::ArrayXd wv_bar = spec.op.zeroth() * lL;  // onto w value
    const Eigen::ArrayXd wl_bar = -aw.array() * lL;       // onto w laplacian
    vbar.array() += nv * wv_bar + nl * wl_bar;
    for (int i = 0; i < d; ++i) {
      const Eigen::ArrayXd ngi = nu.gradient.row(i).transpose().array();
      const Eigen::ArrayXd wg_bar = -ga.row(i).transpose().array() * lL;  // onto w grad_i
      vbar.array() += ngi * wg_bar;
      gbar.row(i).transpose().array() += nv * wg_bar + 2.0 * ngi * wl_bar;
      hbar.row(i).transpose().array() += nv * wl_bar;
    }

    grad->resize(net.parameter_count());
    grad->setZero();
    ws.backward(net, XT, vbar, gbar, hbar, *grad);
    return loss;
  }
};

}  // namespace dabg
