#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "dabg/boundary.hpp"
#include "dabg/mlp.hpp"
#include "dabg/temporal_basis.hpp"

namespace dabg {

/// Loss adjoints of one network's bundle over a batch.
struct BundleSeeds {
  Eigen::VectorXd vbar;   // Q
  Eigen::MatrixXd gbar;   // d x Q
  Eigen::VectorXd lbar;   // Q
};

/// The N trainable spatial coefficient networks. Either N independent scalar
/// networks (default) or one shared trunk with N readout heads.
class SpatialNets {
 public:
  static SpatialNets independent(std::vector<MlpParams> nets) {
    if (nets.empty()) throw std::invalid_argument("SpatialNets: need at least one network");
    SpatialNets s;
    s.shared_ = false;
    s.nets_ = std::move(nets);
    return s;
  }

  static SpatialNets shared(MlpParams trunk, Eigen::MatrixXd heads) {
    if (heads.rows() != trunk.a.size())
      throw std::invalid_argument("SpatialNets: head rows must match trunk width");
    SpatialNets s;
    s.shared_ = true;
    s.nets_.push_back(std::move(trunk));
    s.heads_ = std::move(heads);
    return s;
  }

  /// Seeded construction of N networks of the given architecture.
  static SpatialNets init(int N, std::uint64_t seed, int d, int M, int L,
                          Activation act = Activation::sigmoid, double scale = -1.0,
                          bool shared_trunk = false) {
    if (N < 1) throw std::invalid_argument("SpatialNets: N must be >= 1");
    SplitMix64 seeder(seed);
    if (!shared_trunk) {
      std::vector<MlpParams> nets;
      nets.reserve(static_cast<std::size_t>(N));
      for (int n = 0; n < N; ++n) nets.push_back(init_params(seeder.next_u64(), d, M, L, act, scale));
      return independent(std::move(nets));
    }
    MlpParams trunk = init_params(seeder.next_u64(), d, M, L, act, scale);
    const double s = scale > 0.0 ? scale : std::sqrt(static_cast<double>(M));
    Eigen::MatrixXd heads(M, N);
    for (Eigen::Index j = 0; j < heads.size(); ++j) heads.data()[j] = seeder.uniform(-s, s);
    return shared(std::move(trunk), std::move(heads));
  }

  bool shared_trunk() const { return shared_; }
  int count() const { return shared_ ? static_cast<int>(heads_.cols()) : static_cast<int>(nets_.size()); }
  int input_dim() const { return nets_[0].input_dim; }
  const MlpParams& net(int n) const { return shared_ ? nets_[0] : nets_[static_cast<std::size_t>(n)]; }
  const Eigen::MatrixXd& heads() const { return heads_; }

  Eigen::Index parameter_count() const {
    if (shared_) return layer_count(nets_[0]) + heads_.size();
    Eigen::Index c = 0;
    for (const auto& p : nets_) c += p.parameter_count();
    return c;
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(parameter_count());
    Eigen::Index at = 0;
    if (shared_) {
      const Eigen::VectorXd full = param_flatten(nets_[0]);
      const Eigen::Index lc = layer_count(nets_[0]);
      v.segment(0, lc) = full.segment(0, lc);
      v.segment(lc, heads_.size()) = Eigen::Map<const Eigen::VectorXd>(heads_.data(), heads_.size());
      return v;
    }
    for (const auto& p : nets_) {
      const Eigen::VectorXd f = param_flatten(p);
      v.segment(at, f.size()) = f;
      at += f.size();
    }
    return v;
  }

  void set_flat(const Eigen::VectorXd& v) {
    if (v.size() != parameter_count()) throw std::invalid_argument("SpatialNets: flat size mismatch");
    Eigen::Index at = 0;
    if (shared_) {
      const Eigen::Index lc = layer_count(nets_[0]);
      Eigen::VectorXd full = param_flatten(nets_[0]);
      full.segment(0, lc) = v.segment(0, lc);
      nets_[0] = param_unflatten(nets_[0], full);
      Eigen::Map<Eigen::VectorXd>(heads_.data(), heads_.size()) = v.segment(lc, heads_.size());
      return;
    }
    for (auto& p : nets_) {
      const Eigen::Index c = p.parameter_count();
      p = param_unflatten(p, v.segment(at, c));
      at += c;
    }
  }

  /// Pass-one bundles of every network over the batch (no tape retained).
  std::vector<BundleBatch> forward(const Eigen::MatrixXd& X) const {
    std::vector<BundleBatch> out(static_cast<std::size_t>(count()));
    MlpWorkspace ws;
    if (shared_) {
      ws.forward_trunk(nets_[0], X);
      for (int n = 0; n < count(); ++n)
        ws.readout(heads_.col(n), nets_[0].input_dim, X.cols(), out[static_cast<std::size_t>(n)]);
      return out;
    }
    for (int n = 0; n < count(); ++n)
      out[static_cast<std::size_t>(n)] = ws.forward(nets_[static_cast<std::size_t>(n)], X, false);
    return out;
  }

  /// Gradient of a scalar loss over the flat layout, from per-network bundle
  /// seeds. Recomputes forward per network to keep one tape alive at a time.
  Eigen::VectorXd backward(const Eigen::MatrixXd& X, const std::vector<BundleSeeds>& seeds) const {
    if (seeds.size() != static_cast<std::size_t>(count()))
      throw std::invalid_argument("SpatialNets: one seed set per network required");
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(parameter_count());
    const int d = input_dim();
    const Eigen::Index Q = X.cols();
    const Eigen::Index SW = (1 + 2 * static_cast<Eigen::Index>(d)) * Q;
    MlpWorkspace ws;
    if (shared_) {
      ws.forward_trunk(nets_[0], X);
      const int M = static_cast<int>(heads_.rows());
      Eigen::MatrixXd Pbar = Eigen::MatrixXd::Zero(M, SW);
      Eigen::MatrixXd heads_bar = Eigen::MatrixXd::Zero(M, heads_.cols());
      for (int n = 0; n < count(); ++n) {
        Eigen::VectorXd hb = Eigen::VectorXd::Zero(M);
        const auto& s = seeds[static_cast<std::size_t>(n)];
        ws.readout_adjoint(heads_.col(n), d, Q, s.vbar, s.gbar, s.lbar, hb, Pbar);
        heads_bar.col(n) = hb;
      }
      const Eigen::Index at = ws.backward_layers(nets_[0], X, Pbar, grad);
      grad.segment(at, heads_bar.size()) +=
          Eigen::Map<const Eigen::VectorXd>(heads_bar.data(), heads_bar.size());
      return grad;
    }
    Eigen::Index at = 0;
    for (int n = 0; n < count(); ++n) {
      const auto& p = nets_[static_cast<std::size_t>(n)];
      ws.forward(p, X, true);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(p.parameter_count());
      const auto& s = seeds[static_cast<std::size_t>(n)];
      ws.backward(p, X, s.vbar, s.gbar, s.lbar, g);
      ws.drop_tape();
      grad.segment(at, g.size()) += g;
      at += g.size();
    }
    return grad;
  }

  /// Raw network values, one row per network (no boundary factor applied).
  Eigen::MatrixXd values(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd out(count(), X.cols());
    if (shared_) {
      MlpParams probe = nets_[0];
      Eigen::MatrixXd cur = X;
      Eigen::ArrayXXd V, d1, d2;
      for (int l = 0; l < probe.hidden_layers(); ++l) {
        Eigen::MatrixXd Z = probe.W[static_cast<std::size_t>(l)] * cur;
        Z.colwise() += probe.b[static_cast<std::size_t>(l)];
        detail::act_forward(probe.activation, Z.array(), V, d1, d2);
        cur = V.matrix();
      }
      out = heads_.transpose() * cur;
      return out;
    }
    for (int n = 0; n < count(); ++n)
      out.row(n) = MlpWorkspace::values(nets_[static_cast<std::size_t>(n)], X).transpose();
    return out;
  }

 private:
  static Eigen::Index layer_count(const MlpParams& p) {
    return p.parameter_count() - p.a.size();
  }

  bool shared_ = false;
  std::vector<MlpParams> nets_;
  Eigen::MatrixXd heads_;
};

/// Full space-time approximation: N boundary-factored networks paired with the
/// temporal trial family of the given order.
struct AdaptiveBasisSolution {
  SpatialNets nets;
  BoundaryFactor boundary;
  BasisOrder order;
  double T;

  int basis_count() const { return nets.count(); }
};

inline double eval_solution(const AdaptiveBasisSolution& sol, const Eigen::VectorXd& x, double t) {
  const TimeInterval T(sol.T);
  const auto phi = eval_basis_family(sol.order, BasisKind::trial, sol.basis_count(), t, T);
  const Eigen::MatrixXd vals = sol.nets.values(x);
  BoundaryBatch nu;
  sol.boundary.bundle_batch(x, nu);
  double acc = 0.0;
  for (int n = 0; n < sol.basis_count(); ++n) acc += vals(n, 0) * nu.value(0) * phi[static_cast<std::size_t>(n)];
  return acc;
}

/// Values on a test grid: rows index the spatial points, columns the times.
inline Eigen::MatrixXd eval_solution_grid(const AdaptiveBasisSolution& sol,
                                          const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& tgrid) {
  const TimeInterval T(sol.T);
  const int N = sol.basis_count();
  Eigen::MatrixXd W = sol.nets.values(X);  // N x Q raw values
  BoundaryBatch nu;
  sol.boundary.bundle_batch(X, nu);
  W = W.array().rowwise() * nu.value.transpose().array();
  Eigen::MatrixXd Phi(N, tgrid.size());
  for (Eigen::Index k = 0; k < tgrid.size(); ++k) {
    const auto phi = eval_basis_family(sol.order, BasisKind::trial, N, tgrid(k), T);
    for (int n = 0; n < N; ++n) Phi(n, k) = phi[static_cast<std::size_t>(n)];
  }
  return W.transpose() * Phi;
}

}  // namespace dabg
