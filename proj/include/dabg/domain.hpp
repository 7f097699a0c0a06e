#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dabg/halton.hpp"
#include "dabg/rng.hpp"

namespace dabg {

enum class DomainKind { box, ball };

/// Spatial domain: an axis-aligned box or the unit ball.
struct DomainSpec {
  DomainKind kind;
  int d;
  Eigen::VectorXd lo, hi;  // box bounds

  static DomainSpec make_box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
    if (lower.size() != upper.size() || lower.size() < 1)
      throw std::invalid_argument("DomainSpec: inconsistent box bounds");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower(i) < upper(i))) throw std::invalid_argument("DomainSpec: need lo < hi per axis");
    DomainSpec s;
    s.kind = DomainKind::box;
    s.d = static_cast<int>(lower.size());
    s.lo = std::move(lower);
    s.hi = std::move(upper);
    return s;
  }

  static DomainSpec make_symmetric_box(int d, double half_width = 1.0) {
    return make_box(Eigen::VectorXd::Constant(d, -half_width),
                    Eigen::VectorXd::Constant(d, half_width));
  }

  static DomainSpec make_unit_ball(int d) {
    if (d < 1) throw std::invalid_argument("DomainSpec: ball dimension must be >= 1");
    DomainSpec s;
    s.kind = DomainKind::ball;
    s.d = d;
    return s;
  }

  bool contains(const Eigen::VectorXd& x) const {
    if (kind == DomainKind::box) {
      for (int i = 0; i < d; ++i)
        if (x(i) <= lo(i) || x(i) >= hi(i)) return false;
      return true;
    }
    return x.squaredNorm() < 1.0;
  }

  double volume() const {
    if (kind == DomainKind::box) return (hi - lo).prod();
    // unit ball: pi^{d/2} / Gamma(d/2 + 1)
    return std::exp(0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d + 1.0));
  }
};

/// Affine map of unit-cube points into a box (columns are points).
inline Eigen::MatrixXd map_to_domain(const Eigen::MatrixXd& unit_pts, const DomainSpec& domain) {
  if (domain.kind != DomainKind::box)
    throw std::invalid_argument("map_to_domain: stateless overload only maps boxes");
  if (unit_pts.rows() != domain.d)
    throw std::invalid_argument("map_to_domain: dimension mismatch");
  return ((domain.hi - domain.lo).asDiagonal() * unit_pts).colwise() + domain.lo;
}

namespace detail {

constexpr int kBallRejectionMaxDim = 6;
constexpr std::int64_t kRejectionMissLimit = 1000000;

}  // namespace detail

/// How many Halton coordinates a domain consumes per candidate point.
inline int halton_dim_for(const DomainSpec& domain) {
  if (domain.kind == DomainKind::box || domain.d <= detail::kBallRejectionMaxDim)
    return domain.d;
  return domain.d + 1;  // radial map: d gaussian directions + 1 radius
}

/// Map `count` points of the Halton stream into the domain, consuming further
/// sequence elements on rejection misses. For balls above dimension 6 the
/// rejection acceptance rate is impractically small and a radial construction
/// is used instead: direction from inverse-normal-transformed coordinates,
/// radius U^{1/d}.
inline Eigen::MatrixXd map_to_domain(HaltonState& state, int count, const DomainSpec& domain) {
  if (state.dimension != halton_dim_for(domain))
    throw std::invalid_argument("map_to_domain: stream dimension mismatch");
  Eigen::MatrixXd out(domain.d, count);
  if (domain.kind == DomainKind::box) {
    out = map_to_domain(halton_block(state, count), domain);
    return out;
  }
  if (domain.d <= detail::kBallRejectionMaxDim) {
    std::int64_t misses = 0;
    for (int c = 0; c < count;) {
      const Eigen::VectorXd u = state.next();
      const Eigen::VectorXd x = 2.0 * u.array() - 1.0;
      if (x.squaredNorm() < 1.0) {
        out.col(c++) = x;
        misses = 0;
      } else if (++misses > detail::kRejectionMissLimit) {
        throw std::runtime_error(
            "map_to_domain: rejection sampler exceeded 1e6 consecutive misses");
      }
    }
    return out;
  }
  for (int c = 0; c < count; ++c) {
    const Eigen::VectorXd u = state.next();
    Eigen::VectorXd g(domain.d);
    for (int i = 0; i < domain.d; ++i) {
      const double ui = std::min(std::max(u(i), 1e-15), 1.0 - 1e-15);
      g(i) = detail::inverse_normal_cdf(ui);
    }
    double norm = g.norm();
    if (norm == 0.0) {
      g.setZero();
      g(0) = 1.0;
      norm = 1.0;
    }
    const double r = std::pow(u(domain.d), 1.0 / domain.d);
    out.col(c) = g * (r / norm);
  }
  return out;
}

/// Halton-backed batch source for a spatial domain, optionally extended with a
/// time coordinate in (0,T] (used by the space-time least-squares baseline).
/// Rejected ball candidates discard the whole stream element so the time
/// coordinate stays paired with its accepted spatial sample.
class DomainSampler {
 public:
  explicit DomainSampler(DomainSpec domain, bool with_time = false, double T = 1.0)
      : domain_(std::move(domain)),
        with_time_(with_time),
        T_(T),
        state_(halton_dim_for(domain_) + (with_time ? 1 : 0)) {}

  /// Columns are points; rows are the d spatial coordinates (+ time last).
  Eigen::MatrixXd block(int count) {
    const int rows = domain_.d + (with_time_ ? 1 : 0);
    Eigen::MatrixXd out(rows, count);
    const bool rejecting =
        domain_.kind == DomainKind::ball && domain_.d <= detail::kBallRejectionMaxDim;
    for (int c = 0; c < count; ++c) {
      Eigen::VectorXd u = state_.next();
      if (rejecting) {
        std::int64_t misses = 0;
        while ((2.0 * u.head(domain_.d).array() - 1.0).matrix().squaredNorm() >= 1.0) {
          if (++misses > detail::kRejectionMissLimit)
            throw std::runtime_error(
                "DomainSampler: rejection sampler exceeded 1e6 consecutive misses");
          u = state_.next();
        }
      }
      out.col(c).head(domain_.d) = spatial_from_unit(u);
      if (with_time_) out(domain_.d, c) = T_ * (1.0 - u(state_.dimension - 1));
    }
    return out;
  }

  const DomainSpec& domain() const { return domain_; }

 private:
  // Pure map of one (already accepted) unit-cube sample.
  Eigen::VectorXd spatial_from_unit(const Eigen::VectorXd& u) const {
    if (domain_.kind == DomainKind::box)
      return domain_.lo.array() + (domain_.hi - domain_.lo).array() * u.head(domain_.d).array();
    if (domain_.d <= detail::kBallRejectionMaxDim)
      return 2.0 * u.head(domain_.d).array() - 1.0;
    Eigen::VectorXd g(domain_.d);
    for (int i = 0; i < domain_.d; ++i) {
      const double ui = std::min(std::max(u(i), 1e-15), 1.0 - 1e-15);
      g(i) = detail::inverse_normal_cdf(ui);
    }
    double norm = g.norm();
    if (norm == 0.0) {
      g.setZero();
      g(0) = 1.0;
      norm = 1.0;
    }
    const double r = std::pow(u(domain_.d), 1.0 / domain_.d);
    return g * (r / norm);
  }

  DomainSpec domain_;
  bool with_time_;
  double T_;
  HaltonState state_;
};

/// Pseudo-random spatial test set X (columns) and the equidistant time grid
/// {kT/N_T, k=1..N_T}.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> test_sets(const DomainSpec& domain, int n_x,
                                                             int n_t, double T,
                                                             std::uint64_t seed) {
  if (n_x < 1 || n_t < 1) throw std::invalid_argument("test_sets: need n_x, n_t >= 1");
  SplitMix64 rng(seed);
  Eigen::MatrixXd X(domain.d, n_x);
  for (int c = 0; c < n_x; ++c) {
    if (domain.kind == DomainKind::box) {
      for (int i = 0; i < domain.d; ++i) X(i, c) = rng.uniform(domain.lo(i), domain.hi(i));
    } else {
      Eigen::VectorXd g(domain.d);
      for (int i = 0; i < domain.d; ++i) g(i) = rng.normal();
      double norm = g.norm();
      if (norm == 0.0) {
        g(0) = 1.0;
        norm = 1.0;
      }
      X.col(c) = g * (std::pow(rng.next_double(), 1.0 / domain.d) / norm);
    }
  }
  Eigen::VectorXd tgrid(n_t);
  for (int k = 1; k <= n_t; ++k) tgrid(k - 1) = T * k / n_t;
  return {std::move(X), std::move(tgrid)};
}

}  // namespace dabg
