#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>

#include "dabg/domain.hpp"
#include "dabg/mlp.hpp"

namespace dabg {

enum class BoundaryKind { box, ball, level_set };

/// Batched value/gradient/laplacian of the boundary-governing function.
struct BoundaryBatch {
  Eigen::VectorXd value;
  Eigen::MatrixXd gradient;  // d x Q
  Eigen::VectorXd laplacian;
};

/// Smooth factor nu vanishing exactly on the domain boundary, multiplied into
/// every spatial network. Constructed normalized so that the sampled
/// max{|nu|, |grad nu|^2, |lap nu|} equals 1; the raw orientation follows the
/// usual closed forms (|x|^2 - r^2 for balls, prod (x_i-a_i)(x_i-b_i) for
/// boxes), so the sign inside the domain depends on the shape.
class BoundaryFactor {
 public:
  static BoundaryFactor make_box(Eigen::VectorXd lo, Eigen::VectorXd hi, bool normalize = true,
                                 int sample_count = 100000) {
    if (lo.size() != hi.size() || lo.size() < 1)
      throw std::invalid_argument("BoundaryFactor: inconsistent box bounds");
    BoundaryFactor bf;
    bf.kind_ = BoundaryKind::box;
    bf.d_ = static_cast<int>(lo.size());
    bf.lo_ = std::move(lo);
    bf.hi_ = std::move(hi);
    if (normalize)
      bf.scale_ = bf.estimate_scale(DomainSpec::make_box(bf.lo_, bf.hi_), sample_count);
    return bf;
  }

  static BoundaryFactor make_ball(int d, double radius = 1.0, bool normalize = true,
                                  int sample_count = 100000) {
    if (d < 1 || !(radius > 0.0)) throw std::invalid_argument("BoundaryFactor: bad ball");
    BoundaryFactor bf;
    bf.kind_ = BoundaryKind::ball;
    bf.d_ = d;
    bf.radius_ = radius;
    if (normalize) bf.scale_ = bf.estimate_scale(DomainSpec::make_unit_ball(d), sample_count);
    return bf;
  }

  /// Interior of the level set rho(x) < a; the closure must supply the exact
  /// bundle of rho. Normalization needs caller-provided sample points.
  static BoundaryFactor make_level_set(std::function<EvalBundle(const Eigen::VectorXd&)> rho,
                                       double a, int d,
                                       const Eigen::MatrixXd* normalize_points = nullptr) {
    BoundaryFactor bf;
    bf.kind_ = BoundaryKind::level_set;
    bf.d_ = d;
    bf.rho_ = std::move(rho);
    bf.level_a_ = a;
    if (normalize_points) bf.scale_ = bf.scale_from_points(*normalize_points);
    return bf;
  }

  int dim() const { return d_; }
  BoundaryKind kind() const { return kind_; }
  double scale() const { return scale_; }

  EvalBundle bundle(const Eigen::VectorXd& x) const {
    BoundaryBatch b;
    bundle_batch(x, b);
    return {b.value(0), b.gradient.col(0), b.laplacian(0)};
  }

  void bundle_batch(const Eigen::MatrixXd& X, BoundaryBatch& out) const {
    const Eigen::Index Q = X.cols();
    if (X.rows() != d_) throw std::invalid_argument("BoundaryFactor: dimension mismatch");
    out.value.resize(Q);
    out.gradient.resize(d_, Q);
    out.laplacian.resize(Q);
    switch (kind_) {
      case BoundaryKind::ball: {
        const double r2 = radius_ * radius_;
        out.value = (X.colwise().squaredNorm().array() - r2).matrix();
        out.gradient = 2.0 * X;
        out.laplacian.setConstant(2.0 * d_);
        break;
      }
      case BoundaryKind::box: {
        // prefix/suffix products keep partial products valid at boundary zeros
        Eigen::MatrixXd p(d_, Q), dp(d_, Q);
        for (int i = 0; i < d_; ++i) {
          p.row(i) = ((X.row(i).array() - lo_(i)) * (X.row(i).array() - hi_(i))).matrix();
          dp.row(i) = (2.0 * X.row(i).array() - lo_(i) - hi_(i)).matrix();
        }
        for (Eigen::Index q = 0; q < Q; ++q) {
          double pre = 1.0;
          Eigen::VectorXd excl(d_);
          for (int i = 0; i < d_; ++i) {
            excl(i) = pre;
            pre *= p(i, q);
          }
          double suf = 1.0;
          for (int i = d_ - 1; i >= 0; --i) {
            excl(i) *= suf;
            suf *= p(i, q);
          }
          out.value(q) = suf;  // full product
          double lap = 0.0;
          for (int i = 0; i < d_; ++i) {
            out.gradient(i, q) = dp(i, q) * excl(i);
            lap += 2.0 * excl(i);
          }
          out.laplacian(q) = lap;
        }
        break;
      }
      case BoundaryKind::level_set: {
        for (Eigen::Index q = 0; q < Q; ++q) {
          const EvalBundle eb = rho_(X.col(q));
          out.value(q) = eb.value - level_a_;
          out.gradient.col(q) = eb.gradient;
          out.laplacian(q) = eb.laplacian;
        }
        break;
      }
    }
    if (scale_ != 1.0) {
      out.value /= scale_;
      out.gradient /= scale_;
      out.laplacian /= scale_;
    }
  }

 private:
  double estimate_scale(const DomainSpec& domain, int count) {
    HaltonState state(halton_dim_for(domain));
    Eigen::MatrixXd pts = map_to_domain(state, count, domain);
    if (kind_ == BoundaryKind::ball && radius_ != 1.0) pts *= radius_;
    return scale_from_points(pts);
  }

  double scale_from_points(const Eigen::MatrixXd& pts) {
    const double saved = scale_;
    scale_ = 1.0;  // raw bundles while estimating
    BoundaryBatch b;
    bundle_batch(pts, b);
    scale_ = saved;
    const double sup_v = b.value.cwiseAbs().maxCoeff();
    const double sup_g2 = b.gradient.colwise().squaredNorm().maxCoeff();
    const double sup_l = b.laplacian.cwiseAbs().maxCoeff();
    return std::max({sup_v, std::sqrt(sup_g2), sup_l});
  }

  BoundaryKind kind_ = BoundaryKind::ball;
  int d_ = 1;
  Eigen::VectorXd lo_, hi_;
  double radius_ = 1.0;
  std::function<EvalBundle(const Eigen::VectorXd&)> rho_;
  double level_a_ = 0.0;
  double scale_ = 1.0;
};

/// Bundle of w = nu * phi from the bundles of the factors.
inline void product_bundle(const BoundaryBatch& nu, const BundleBatch& phi, BundleBatch& w) {
  const Eigen::Index Q = nu.value.size();
  const Eigen::Index d = nu.gradient.rows();
  w.value = nu.value.cwiseProduct(phi.value);
  w.gradient.resize(d, Q);
  for (Eigen::Index i = 0; i < d; ++i)
    w.gradient.row(i) = phi.value.transpose().cwiseProduct(nu.gradient.row(i)) +
                        nu.value.transpose().cwiseProduct(phi.gradient.row(i));
  w.laplacian = phi.value.cwiseProduct(nu.laplacian) + nu.value.cwiseProduct(phi.laplacian) +
                2.0 * (nu.gradient.cwiseProduct(phi.gradient)).colwise().sum().transpose();
}

/// Adjoint of product_bundle with respect to the phi bundle.
inline void product_bundle_adjoint(const BoundaryBatch& nu, const Eigen::VectorXd& wv_bar,
                                   const Eigen::MatrixXd& wg_bar, const Eigen::VectorXd& wl_bar,
                                   Eigen::VectorXd& pv_bar, Eigen::MatrixXd& pg_bar,
                                   Eigen::VectorXd& pl_bar) {
  const Eigen::Index Q = nu.value.size();
  const Eigen::Index d = nu.gradient.rows();
  pv_bar = nu.value.cwiseProduct(wv_bar) + nu.laplacian.cwiseProduct(wl_bar);
  for (Eigen::Index i = 0; i < d; ++i)
    pv_bar += nu.gradient.row(i).transpose().cwiseProduct(wg_bar.row(i).transpose());
  pg_bar.resize(d, Q);
  for (Eigen::Index i = 0; i < d; ++i)
    pg_bar.row(i) = nu.value.transpose().cwiseProduct(wg_bar.row(i)) +
                    2.0 * nu.gradient.row(i).cwiseProduct(wl_bar.transpose());
  pl_bar = nu.value.cwiseProduct(wl_bar);
}

/// Bundle of one boundary-factored network w = nu * phi at a point.
inline EvalBundle spatial_net_bundle(const MlpParams& net, const BoundaryFactor& bf,
                                     const Eigen::VectorXd& x) {
  MlpWorkspace ws;
  const BundleBatch& phi = ws.forward(net, x, false);
  BoundaryBatch nu;
  bf.bundle_batch(x, nu);
  BundleBatch w;
  product_bundle(nu, phi, w);
  return {w.value(0), w.gradient.col(0), w.laplacian(0)};
}

}  // namespace dabg
