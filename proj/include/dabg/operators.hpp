#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

#include "dabg/domain.hpp"
#include "dabg/mlp.hpp"

namespace dabg {

/// Uniformly elliptic spatial operator L u = -div(a grad u) + c u, applied to
/// bundles. The zeroth-order coefficient c absorbs reaction terms (the lagged
/// Allen-Cahn linearization uses c = -1).
class SpatialOperator {
 public:
  enum class Kind { neg_laplacian, neg_div_a_grad, custom };

  static SpatialOperator neg_laplacian(double zeroth = 0.0) {
    SpatialOperator op;
    op.kind_ = Kind::neg_laplacian;
    op.zeroth_ = zeroth;
    return op;
  }

  /// a(x) = 1 + |x|^2 / 2.
  static SpatialOperator neg_div_quadratic_a(double zeroth = 0.0) {
    SpatialOperator op;
    op.kind_ = Kind::neg_div_a_grad;
    op.zeroth_ = zeroth;
    return op;
  }

  static SpatialOperator custom(std::function<double(const Eigen::VectorXd&)> a,
                                std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_a,
                                double zeroth = 0.0) {
    SpatialOperator op;
    op.kind_ = Kind::custom;
    op.a_ = std::move(a);
    op.grad_a_ = std::move(grad_a);
    op.zeroth_ = zeroth;
    return op;
  }

  Kind kind() const { return kind_; }
  double zeroth() const { return zeroth_; }

  /// Diffusion coefficient and its gradient tabulated over a batch.
  void coefficients(const Eigen::MatrixXd& X, Eigen::VectorXd& a, Eigen::MatrixXd& grad_a) const {
    const Eigen::Index Q = X.cols();
    switch (kind_) {
      case Kind::neg_laplacian:
        a = Eigen::VectorXd::Ones(Q);
        grad_a = Eigen::MatrixXd::Zero(X.rows(), Q);
        return;
      case Kind::neg_div_a_grad:
        a = (0.5 * X.colwise().squaredNorm().array() + 1.0).matrix();
        grad_a = X;
        return;
      case Kind::custom:
        a.resize(Q);
        grad_a.resize(X.rows(), Q);
        for (Eigen::Index q = 0; q < Q; ++q) {
          a(q) = a_(X.col(q));
          grad_a.col(q) = grad_a_(X.col(q));
        }
        return;
    }
  }

  /// Pointwise application to a bundle.
  double apply(const EvalBundle& b, const Eigen::VectorXd& x) const {
    Eigen::VectorXd a;
    Eigen::MatrixXd ga;
    coefficients(x, a, ga);
    return -(ga.col(0).dot(b.gradient) + a(0) * b.laplacian) + zeroth_ * b.value;
  }

  /// Sampled lower bound of the diffusion coefficient (ellipticity check).
  double min_a_sampled(const DomainSpec& domain, int samples = 2000,
                       std::uint64_t seed = 1234) const {
    auto [X, tg] = test_sets(domain, samples, 1, 1.0, seed);
    Eigen::VectorXd a;
    Eigen::MatrixXd ga;
    coefficients(X, a, ga);
    return a.minCoeff();
  }

 private:
  Kind kind_ = Kind::neg_laplacian;
  double zeroth_ = 0.0;
  std::function<double(const Eigen::VectorXd&)> a_;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_a_;
};

inline double apply_operator(const SpatialOperator& op, const EvalBundle& bundle,
                             const Eigen::VectorXd& x) {
  return op.apply(bundle, x);
}

}  // namespace dabg
