#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "dabg/boundary.hpp"
#include "dabg/domain.hpp"
#include "dabg/operators.hpp"
#include "dabg/residuals.hpp"

namespace dabg {

/// One manufactured benchmark: which equation, on which domain, with which
/// exact solution family (picked by id and wave number).
struct CaseSpec {
  int id = 1;
  double w = 1.0;
  double T = 1.0;
  int d = 2;
  DomainSpec domain = DomainSpec::make_symmetric_box(2);
  SpatialOperator op = SpatialOperator::neg_laplacian();
  BasisOrder order = BasisOrder::first;
  bool allen_cahn = false;
};

inline double default_wave_number(int id) { return id == 1 ? 1.0 : 3.0; }

inline CaseSpec make_case(int id, double w = -1.0, double T = 1.0) {
  if (id < 1 || id > 5) throw std::invalid_argument("make_case: id must be 1..5");
  CaseSpec c;
  c.id = id;
  c.w = w > 0.0 ? w : default_wave_number(id);
  c.T = T;
  switch (id) {
    case 1:
    case 2:
      c.d = 2;
      c.domain = DomainSpec::make_symmetric_box(2);
      c.op = SpatialOperator::neg_laplacian();
      c.order = BasisOrder::first;
      break;
    case 3:
      c.d = 20;
      c.domain = DomainSpec::make_unit_ball(20);
      c.op = SpatialOperator::neg_div_quadratic_a();
      c.order = BasisOrder::first;
      break;
    case 4:
      c.d = 20;
      c.domain = DomainSpec::make_unit_ball(20);
      c.op = SpatialOperator::neg_laplacian(-1.0);  // u_t - lap u - u = f_AC - u_prev^3
      c.order = BasisOrder::first;
      c.allen_cahn = true;
      break;
    case 5:
      c.d = 20;
      c.domain = DomainSpec::make_unit_ball(20);
      c.op = SpatialOperator::neg_div_quadratic_a();
      c.order = BasisOrder::second;
      break;
  }
  return c;
}

/// The boundary-governing factor matching the case domain (normalized).
inline BoundaryFactor case_boundary_factor(const CaseSpec& c) {
  if (c.domain.kind == DomainKind::box)
    return BoundaryFactor::make_box(c.domain.lo, c.domain.hi);
  return BoundaryFactor::make_ball(c.d);
}

/// Exact solution, matching forcing, and (second order) initial velocity.
/// The forcing includes every term of the case's equation (for the
/// Allen-Cahn case it is the right-hand side of the full nonlinear PDE).
struct ManufacturedSolution {
  std::function<double(const Eigen::VectorXd&, double)> u;
  std::function<double(const Eigen::VectorXd&, double)> f;
  std::function<double(const Eigen::VectorXd&)> g0;  // null means zero data
  TimeSliceFactory f_factory;
};

namespace detail {

// (x1^2-1)(x2^2-1) and its calculus on the unit box
inline void box_nu(const Eigen::VectorXd& x, double& nu, double& grad2, double& lap) {
  const double p1 = x(0) * x(0) - 1.0, p2 = x(1) * x(1) - 1.0;
  nu = p1 * p2;
  grad2 = 4.0 * x(0) * x(0) * p2 * p2 + 4.0 * x(1) * x(1) * p1 * p1;
  lap = 2.0 * p1 + 2.0 * p2;
}

}  // namespace detail

inline ManufacturedSolution manufactured_case(const CaseSpec& c) {
  ManufacturedSolution m;
  const double w = c.w;
  const double tau = 2.0 * M_PI * w;
  switch (c.id) {
    case 1: {
      // u = exp(sin(2 pi w t) nu(x)) - 1 on the box
      m.u = [tau](const Eigen::VectorXd& x, double t) {
        double nu, g2, lap;
        detail::box_nu(x, nu, g2, lap);
        return std::exp(std::sin(tau * t) * nu) - 1.0;
      };
      m.f = [tau](const Eigen::VectorXd& x, double t) {
        double nu, g2, lap;
        detail::box_nu(x, nu, g2, lap);
        const double s = std::sin(tau * t), ds = tau * std::cos(tau * t);
        return std::exp(s * nu) * (ds * nu - s * lap - s * s * g2);
      };
      m.f_factory = [tau](const Eigen::VectorXd& ts) -> TimeSlice {
        Eigen::ArrayXd s(ts.size()), ds(ts.size());
        for (Eigen::Index k = 0; k < ts.size(); ++k) {
          s(k) = std::sin(tau * ts(k));
          ds(k) = tau * std::cos(tau * ts(k));
        }
        return [s, ds](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
          double nu, g2, lap;
          detail::box_nu(x, nu, g2, lap);
          out = ((s * nu).exp() * (ds * nu - s * lap - s.square() * g2)).matrix();
        };
      };
      break;
    }
    case 2: {
      // u = exp(sin(2 pi w t nu(x))) - 1: the wave couples t and x
      m.u = [tau](const Eigen::VectorXd& x, double t) {
        double nu, g2, lap;
        detail::box_nu(x, nu, g2, lap);
        return std::exp(std::sin(tau * t * nu)) - 1.0;
      };
      m.f = [tau](const Eigen::VectorXd& x, double t) {
        double nu, g2, lap;
        detail::box_nu(x, nu, g2, lap);
        const double h = tau * t * nu;
        const double sh = std::sin(h), ch = std::cos(h), e = std::exp(sh);
        const double ct = tau * t;
        return e * (tau * nu * ch - ct * ct * (ch * ch - sh) * g2 - ct * ch * lap);
      };
      m.f_factory = [tau](const Eigen::VectorXd& ts) -> TimeSlice {
        const Eigen::ArrayXd t = ts.array();
        return [t, tau](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
          double nu, g2, lap;
          detail::box_nu(x, nu, g2, lap);
          const Eigen::ArrayXd h = tau * t * nu;
          const Eigen::ArrayXd sh = h.sin(), ch = h.cos(), e = sh.exp();
          const Eigen::ArrayXd ct = tau * t;
          out = (e * (tau * nu * ch - ct.square() * (ch.square() - sh) * g2 - ct * ch * lap))
                    .matrix();
        };
      };
      break;
    }
    case 3:
    case 4: {
      // u = sin(sin(2 pi w t) (|x|^2 - 1)) on the unit ball
      m.u = [tau](const Eigen::VectorXd& x, double t) {
        return std::sin(std::sin(tau * t) * (x.squaredNorm() - 1.0));
      };
      const bool cubic = c.id == 4;
      const int d = c.d;
      m.f = [tau, cubic, d](const Eigen::VectorXd& x, double t) {
        const double r2 = x.squaredNorm(), rho = r2 - 1.0;
        const double s = std::sin(tau * t), ds = tau * std::cos(tau * t);
        const double g = s * rho, sg = std::sin(g), cg = std::cos(g);
        const double ut = cg * ds * rho;
        const double lap_u = -sg * s * s * 4.0 * r2 + cg * s * 2.0 * d;
        if (cubic)  // u_t - lap u + u^3 - u
          return ut - lap_u + sg * sg * sg - sg;
        // u_t - div(a grad u), a = 1 + r^2/2: grad a . grad u = cg s 2 r^2
        return ut - (cg * s * 2.0 * r2 + (1.0 + 0.5 * r2) * lap_u);
      };
      m.f_factory = [tau, cubic, d](const Eigen::VectorXd& ts) -> TimeSlice {
        Eigen::ArrayXd s(ts.size()), dsv(ts.size());
        for (Eigen::Index k = 0; k < ts.size(); ++k) {
          s(k) = std::sin(tau * ts(k));
          dsv(k) = tau * std::cos(tau * ts(k));
        }
        return [s, dsv, cubic, d](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
          const double r2 = x.squaredNorm(), rho = r2 - 1.0;
          const Eigen::ArrayXd g = s * rho;
          const Eigen::ArrayXd sg = g.sin(), cg = g.cos();
          const Eigen::ArrayXd ut = cg * dsv * rho;
          const Eigen::ArrayXd lap_u = -sg * s.square() * 4.0 * r2 + cg * s * 2.0 * d;
          if (cubic)
            out = (ut - lap_u + sg.cube() - sg).matrix();
          else
            out = (ut - (cg * s * 2.0 * r2 + (1.0 + 0.5 * r2) * lap_u)).matrix();
        };
      };
      break;
    }
    case 5: {
      // u = sin(t sin(2 pi w t) (|x|^2 - 1)), wave equation with a(x)
      const int d = c.d;
      auto qfun = [tau](double t, double& q, double& dq, double& d2q) {
        const double s = std::sin(tau * t), cts = std::cos(tau * t);
        q = t * s;
        dq = s + t * tau * cts;
        d2q = 2.0 * tau * cts - t * tau * tau * s;
      };
      m.u = [tau](const Eigen::VectorXd& x, double t) {
        return std::sin(t * std::sin(tau * t) * (x.squaredNorm() - 1.0));
      };
      m.f = [qfun, d](const Eigen::VectorXd& x, double t) {
        const double r2 = x.squaredNorm(), rho = r2 - 1.0;
        double q, dq, d2q;
        qfun(t, q, dq, d2q);
        const double g = q * rho, sg = std::sin(g), cg = std::cos(g);
        const double utt = -sg * dq * dq * rho * rho + cg * d2q * rho;
        const double lap_u = -sg * q * q * 4.0 * r2 + cg * q * 2.0 * d;
        return utt - (cg * q * 2.0 * r2 + (1.0 + 0.5 * r2) * lap_u);
      };
      m.g0 = [](const Eigen::VectorXd&) { return 0.0; };
      m.f_factory = [qfun, d](const Eigen::VectorXd& ts) -> TimeSlice {
        Eigen::ArrayXd q(ts.size()), dq(ts.size()), d2q(ts.size());
        for (Eigen::Index k = 0; k < ts.size(); ++k) qfun(ts(k), q(k), dq(k), d2q(k));
        return [q, dq, d2q, d](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
          const double r2 = x.squaredNorm(), rho = r2 - 1.0;
          const Eigen::ArrayXd g = q * rho;
          const Eigen::ArrayXd sg = g.sin(), cg = g.cos();
          const Eigen::ArrayXd utt = -sg * dq.square() * rho * rho + cg * d2q * rho;
          const Eigen::ArrayXd lap_u = -sg * q.square() * 4.0 * r2 + cg * q * 2.0 * d;
          out = (utt - (cg * q * 2.0 * r2 + (1.0 + 0.5 * r2) * lap_u)).matrix();
        };
      };
      break;
    }
    default:
      throw std::invalid_argument("manufactured_case: id must be 1..5");
  }
  return m;
}

}  // namespace dabg
