#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "dabg/loss.hpp"
#include "dabg/rng.hpp"
#include "support/consistency.hpp"

using namespace dabg;

namespace {

void check_close(double got, double want, double rel, double abs_floor) {
  CHECK(std::abs(got - want) <= rel * std::max(std::abs(want), abs_floor / rel));
}

BoundaryFactor unit_box_bf(int d) {
  return BoundaryFactor::make_box(Eigen::VectorXd::Constant(d, -1.0),
                                  Eigen::VectorXd::Constant(d, 1.0));
}

Eigen::MatrixXd interior_points(const DomainSpec& dom, int count, std::uint64_t seed) {
  auto [X, tg] = test_sets(dom, count, 1, 1.0, seed);
  return X;
}

GalerkinLossSpec consistency_spec(BasisOrder order, int N, double T, const SpatialOperator& op,
                                  const SpatialNets& nets, const BoundaryFactor& bf,
                                  double volume, double lambda = 1.0) {
  const auto forcing = testsupport::make_consistency_forcing(nets, bf, op, order, T);
  GalerkinLossSpec spec;
  spec.order = order;
  spec.N = N;
  spec.T = T;
  spec.lambda = lambda;
  spec.op = op;
  spec.f_factory = forcing.f_factory;
  spec.g0 = forcing.g0;
  spec.domain_volume = volume;
  return spec;
}

}  // namespace

TEST_CASE("residual weights", "[operators_loss]") {
  const auto r2 = residual_weights(2);
  CHECK(r2(0) == Catch::Approx(0.875));
  CHECK(r2(1) == Catch::Approx(0.75));
  CHECK(residual_weights(1)(0) == Catch::Approx(1.0));
  const auto r10 = residual_weights(10);
  for (int j = 1; j < 10; ++j) CHECK(r10(j) < r10(j - 1));
  for (int N : {5, 50, 200}) {
    const auto r = residual_weights(N);
    CHECK(r(N - 1) >= 1.0 / N);
    CHECK(r(N - 1) == Catch::Approx((2.0 * N - 1.0) / (static_cast<double>(N) * N)));
    CHECK(r(0) <= 2.0);
  }
}

TEST_CASE("spatial operator application", "[operators_loss]") {
  {
    EvalBundle b;
    b.value = 3.0;
    b.gradient = Eigen::VectorXd::Zero(2);
    b.laplacian = 1.7;
    CHECK(apply_operator(SpatialOperator::neg_laplacian(), b, Eigen::VectorXd::Zero(2)) ==
          Catch::Approx(-1.7));
  }
  {
    // a(x) = 1 + |x|^2/2 has vanishing gradient at the origin
    EvalBundle b;
    b.value = 0.0;
    b.gradient = (Eigen::VectorXd(2) << 5.0, -2.0).finished();
    b.laplacian = 0.9;
    CHECK(apply_operator(SpatialOperator::neg_div_quadratic_a(), b, Eigen::VectorXd::Zero(2)) ==
          Catch::Approx(-0.9));
  }
  {
    // u = |x|^2 in d = 2: -div(a grad u) = -4 - 4|x|^2
    SplitMix64 rng(4);
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd x(2);
      x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
      EvalBundle b;
      b.value = x.squaredNorm();
      b.gradient = 2.0 * x;
      b.laplacian = 4.0;
      CHECK(apply_operator(SpatialOperator::neg_div_quadratic_a(), b, x) ==
            Catch::Approx(-4.0 - 4.0 * x.squaredNorm()));
    }
  }
  // zeroth-order shift
  {
    EvalBundle b;
    b.value = 2.0;
    b.gradient = Eigen::VectorXd::Zero(1);
    b.laplacian = 0.0;
    CHECK(apply_operator(SpatialOperator::neg_laplacian(-1.0), b, Eigen::VectorXd::Zero(1)) ==
          Catch::Approx(-2.0));
  }
  CHECK(SpatialOperator::neg_div_quadratic_a().min_a_sampled(DomainSpec::make_unit_ball(20)) >=
        1.0);
}

TEST_CASE("forcing projection cache", "[operators_loss]") {
  const TimeInterval T(1.5);
  const int N = 5;
  // f(x,t) = g(x) * psi_1(t) with psi_1 = 1: the j = 1 projection is g(x) T
  auto f = [](const Eigen::VectorXd& x, double) { return x(0) + 2.0; };
  FProjectionCache cache(f, BasisOrder::first, N, T);
  Eigen::VectorXd x(1);
  x << 0.25;
  Eigen::VectorXd proj;
  cache.eval(x, proj);
  CHECK(proj(0) == Catch::Approx((0.25 + 2.0) * 1.5).epsilon(1e-13));
  CHECK(cache.closure(1)(x) == Catch::Approx(proj(0)));
  CHECK_THROWS_AS(cache.closure(0), std::out_of_range);

  FProjectionCache zero([](const Eigen::VectorXd&, double) { return 0.0; }, BasisOrder::second,
                        N, T, 0, true);
  double ln = 1.0;
  zero.eval(x, proj, &ln);
  CHECK(proj.cwiseAbs().maxCoeff() == 0.0);
  CHECK(ln == 0.0);

  // polynomial forcing is integrated exactly: compare against a 4x denser rule
  SplitMix64 rng(10);
  std::vector<double> c(7);
  for (auto& v : c) v = rng.uniform(-1.0, 1.0);
  auto fp = [&c](const Eigen::VectorXd& x0, double t) {
    double p = 0.0, tn = 1.0;
    for (double ci : c) {
      p += ci * tn;
      tn *= t;
    }
    return (1.0 + x0(0)) * p;
  };
  FProjectionCache coarse(fp, BasisOrder::first, N, T);
  FProjectionCache dense(fp, BasisOrder::first, N, T, 256);
  Eigen::VectorXd pa, pb;
  coarse.eval(x, pa);
  dense.eval(x, pb);
  CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("galerkin consistency drives residuals to zero", "[operators_loss]") {
  galerkin_quiet() = true;
  const int N = 4, d = 2;
  const double T = 1.3;
  struct Setup {
    SpatialOperator op;
    DomainSpec dom;
    BoundaryFactor bf;
  };
  const Setup setups[] = {
      {SpatialOperator::neg_laplacian(), DomainSpec::make_symmetric_box(d), unit_box_bf(d)},
      {SpatialOperator::neg_div_quadratic_a(), DomainSpec::make_unit_ball(d),
       BoundaryFactor::make_ball(d)},
  };
  for (const auto& setup : setups) {
    for (BasisOrder order : {BasisOrder::first, BasisOrder::second}) {
      SpatialNets nets = SpatialNets::init(N, 2024, d, 5, 3, Activation::sigmoid, 1.0);
      const auto spec = consistency_spec(order, N, T, setup.op, nets, setup.bf,
                                         setup.dom.volume());
      GalerkinLoss loss(spec);
      const Eigen::MatrixXd X = interior_points(setup.dom, 100, 77);
      const Eigen::MatrixXd R = loss.residual_batch(nets, setup.bf, X);
      CHECK(R.cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("zero networks and zero forcing give zero residuals and loss", "[operators_loss]") {
  galerkin_quiet() = true;
  const int N = 3, d = 2;
  SpatialNets nets = SpatialNets::init(N, 5, d, 4, 3);
  // zero every parameter
  nets.set_flat(Eigen::VectorXd::Zero(nets.parameter_count()));
  const auto bf = unit_box_bf(d);
  for (BasisOrder order : {BasisOrder::first, BasisOrder::second}) {
    GalerkinLossSpec spec;
    spec.order = order;
    spec.N = N;
    spec.T = 1.0;
    spec.op = SpatialOperator::neg_laplacian();
    spec.f_factory =
        slice_factory_from_pointwise([](const Eigen::VectorXd&, double) { return 0.0; });
    spec.domain_volume = 4.0;
    GalerkinLoss loss(spec);
    const Eigen::MatrixXd X = interior_points(DomainSpec::make_symmetric_box(d), 20, 3);
    CHECK(loss.residual_batch(nets, bf, X).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loss.loss(nets, bf, X) == 0.0);
  }
}

TEST_CASE("single-row residual matches hand assembly", "[operators_loss]") {
  // N = 1 parabolic: R_1(x) = 2 w(x) + T (L w)(x) - (f, psi_1)
  const double T = 2.0;
  SpatialNets nets = SpatialNets::init(1, 9, 2, 4, 3, Activation::sigmoid, 1.0);
  const auto bf = unit_box_bf(2);
  const auto op = SpatialOperator::neg_laplacian();
  auto f = [](const Eigen::VectorXd& x, double t) { return x(0) * t; };
  GalerkinLossSpec spec;
  spec.order = BasisOrder::first;
  spec.N = 1;
  spec.T = T;
  spec.op = op;
  spec.f_factory = slice_factory_from_pointwise(f);
  spec.domain_volume = 4.0;
  GalerkinLoss loss(spec);

  Eigen::VectorXd x(2);
  x << 0.3, -0.6;
  const auto wb = spatial_net_bundle(nets.net(0), bf, x);
  const double w = wb.value;
  const double lw = apply_operator(op, wb, x);
  // (x0 t, psi_1) = x0 T^2 / 2
  const double proj = x(0) * T * T / 2.0;
  const double expect = 2.0 * w + T * lw - proj;
  CHECK(loss.residuals(nets, bf, x)(0) == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("parabolic loss equals regularization at consistency and scales with lambda",
          "[operators_loss]") {
  galerkin_quiet() = true;
  const int N = 4, d = 2;
  const double T = 1.0;
  const auto dom = DomainSpec::make_symmetric_box(d);
  const auto bf = unit_box_bf(d);
  const auto op = SpatialOperator::neg_laplacian();
  SpatialNets nets = SpatialNets::init(N, 31, d, 5, 3, Activation::sigmoid, 1.0);
  const Eigen::MatrixXd X = interior_points(dom, 50, 11);

  auto spec = consistency_spec(BasisOrder::first, N, T, op, nets, bf, dom.volume(), 1.0);
  const double loss1 = GalerkinLoss(spec).loss(nets, bf, X);

  // regularization term computed independently
  BoundaryBatch nu;
  bf.bundle_batch(X, nu);
  const auto bundles = nets.forward(X);
  BundleBatch w;
  product_bundle(nu, bundles[N - 1], w);
  const double reg_unit =
      std::pow(static_cast<double>(N), -4.0) * dom.volume() / X.cols() *
      w.laplacian.array().square().sum();  // L = -laplacian, squared
  CHECK(loss1 == Catch::Approx(reg_unit).epsilon(1e-6));

  spec.lambda = 0.0;
  const double loss0 = GalerkinLoss(spec).loss(nets, bf, X);
  spec.lambda = 2.0;
  const double loss2 = GalerkinLoss(spec).loss(nets, bf, X);
  CHECK(loss0 < 1e-16);
  CHECK(loss2 == Catch::Approx(2.0 * (loss1 - loss0) + loss0).epsilon(1e-9));
}

TEST_CASE("hyperbolic consistency annihilates the regularizer too", "[operators_loss]") {
  galerkin_quiet() = true;
  const int N = 5, d = 2;
  const double T = 1.0;
  const auto dom = DomainSpec::make_unit_ball(d);
  const auto bf = BoundaryFactor::make_ball(d);
  const auto op = SpatialOperator::neg_laplacian();
  SpatialNets nets = SpatialNets::init(N, 13, d, 5, 3, Activation::sigmoid, 1.0);
  const Eigen::MatrixXd X = interior_points(dom, 40, 5);
  const auto spec = consistency_spec(BasisOrder::second, N, T, op, nets, bf, dom.volume());
  // f = u_tt + L u makes both the residuals and the L_N inner product vanish
  CHECK(GalerkinLoss(spec).loss(nets, bf, X) < 1e-18);
}

TEST_CASE("band structure is exploited in residual sweeps", "[operators_loss]") {
  galerkin_quiet() = true;
  const int N = 10, d = 2;
  SpatialNets nets = SpatialNets::init(N, 3, d, 4, 3, Activation::sigmoid, 1.0);
  const auto bf = unit_box_bf(d);
  auto fzero = [](const Eigen::VectorXd&, double) { return 0.0; };
  for (BasisOrder order : {BasisOrder::first, BasisOrder::second}) {
    GalerkinLossSpec spec;
    spec.order = order;
    spec.N = N;
    spec.T = 1.0;
    spec.op = SpatialOperator::neg_laplacian();
    spec.f_factory = slice_factory_from_pointwise(fzero);
    spec.domain_volume = 4.0;
    GalerkinLoss loss(spec);
    ResidualStats stats;
    loss.residuals(nets, bf, Eigen::VectorXd::Zero(d), &stats);
    if (order == BasisOrder::first) {
      CHECK(stats.max_terms_row_ge2 <= 4);
      CHECK(stats.max_bundles_row_ge2 <= 4);
    } else {
      CHECK(stats.max_terms_row_ge2 <= 7);
      CHECK(stats.max_bundles_row_ge2 <= 7);
    }
  }
}

TEST_CASE("loss parameter gradients match finite differences", "[operators_loss]") {
  galerkin_quiet() = true;
  const int N = 3, d = 2, Q = 16;
  const double T = 1.2;
  const auto dom = DomainSpec::make_symmetric_box(d);
  const Eigen::MatrixXd X = interior_points(dom, Q, 21);
  auto f = [](const Eigen::VectorXd& x, double t) {
    return std::sin(t + x(0)) + 0.5 * x(1) * t * t;
  };
  auto g0 = [](const Eigen::VectorXd& x) { return 0.3 * x(0); };

  struct Config {
    BasisOrder order;
    SpatialOperator op;
  };
  const Config configs[] = {
      {BasisOrder::first, SpatialOperator::neg_laplacian()},
      {BasisOrder::first, SpatialOperator::neg_div_quadratic_a(-1.0)},
      {BasisOrder::second, SpatialOperator::neg_laplacian()},
      {BasisOrder::second, SpatialOperator::neg_div_quadratic_a()},
  };
  for (const auto& cfg : configs) {
    const auto bf = unit_box_bf(d);
    GalerkinLossSpec spec;
    spec.order = cfg.order;
    spec.N = N;
    spec.T = T;
    spec.lambda = 0.7;
    spec.op = cfg.op;
    spec.f_factory = slice_factory_from_pointwise(f);
    spec.g0 = cfg.order == BasisOrder::second ? std::function<double(const Eigen::VectorXd&)>(g0)
                                              : nullptr;
    spec.domain_volume = dom.volume();
    GalerkinLoss loss(spec);

    SpatialNets nets = SpatialNets::init(N, 1234, d, 4, 3, Activation::sigmoid, 0.9);
    Eigen::VectorXd grad;
    const double l0 = loss.loss_and_grad(nets, bf, X, grad);
    CHECK(l0 == Catch::Approx(loss.loss(nets, bf, X)));

    const Eigen::VectorXd theta = nets.flatten();
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      SpatialNets np = nets, nm = nets;
      np.set_flat(tp);
      nm.set_flat(tm);
      const double fd = (loss.loss(np, bf, X) - loss.loss(nm, bf, X)) / (2.0 * h);
      check_close(grad(k), fd, 1e-5, 1e-7);
    }
  }
}

TEST_CASE("dls loss anchors and gradients", "[operators_loss]") {
  const int d = 2;
  const double T = 1.5;
  const auto dom = DomainSpec::make_symmetric_box(d);
  const auto bf = unit_box_bf(d);

  // zero network, zero forcing: loss is exactly zero
  for (int beta : {1, 2}) {
    DlsLossSpec spec;
    spec.beta = beta;
    spec.op = SpatialOperator::neg_laplacian();
    spec.f = [](const Eigen::VectorXd&, double) { return 0.0; };
    spec.T = T;
    spec.domain_volume = dom.volume();
    DlsLoss dls(spec);
    auto net = init_params(3, d + 1, 4, 3);
    MlpParams zero = param_unflatten(net, Eigen::VectorXd::Zero(net.parameter_count()));
    Eigen::MatrixXd XT(d + 1, 5);
    SplitMix64 rng(6);
    for (int q = 0; q < 5; ++q) {
      XT(0, q) = rng.uniform(-1.0, 1.0);
      XT(1, q) = rng.uniform(-1.0, 1.0);
      XT(2, q) = rng.uniform(0.1, T);
    }
    CHECK(dls.loss(zero, bf, XT) == 0.0);
  }

  // beta = 2 with a constant network: residual = 2 nu c - t^2 c lap(nu)
  {
    const auto ball_bf = BoundaryFactor::make_ball(d, 1.0, false);
    auto net = init_params(8, d + 1, 4, 3);
    for (auto& W : net.W) W.setZero();
    Eigen::VectorXd x0(d);
    x0 << 0.3, -0.4;
    const double t0 = 0.8;
    const double c = mlp_bundle(net, (Eigen::VectorXd(3) << x0(0), x0(1), t0).finished()).value;
    DlsLossSpec spec;
    spec.beta = 2;
    spec.op = SpatialOperator::neg_laplacian();
    spec.f = [](const Eigen::VectorXd&, double) { return 0.0; };
    spec.T = T;
    spec.domain_volume = M_PI;
    DlsLoss dls(spec);
    Eigen::MatrixXd XT(3, 1);
    XT << x0(0), x0(1), t0;
    const double nuv = x0.squaredNorm() - 1.0;
    const double res = 2.0 * nuv * c - t0 * t0 * c * (2.0 * d);
    CHECK(dls.loss(net, ball_bf, XT) == Catch::Approx(M_PI * T * res * res).epsilon(1e-12));
  }

  // parameter gradients against finite differences, both orders
  for (int beta : {1, 2}) {
    DlsLossSpec spec;
    spec.beta = beta;
    spec.op = beta == 1 ? SpatialOperator::neg_laplacian()
                        : SpatialOperator::neg_div_quadratic_a();
    spec.f = [](const Eigen::VectorXd& x, double t) { return std::cos(x(0) * t) - x(1); };
    spec.T = T;
    spec.domain_volume = dom.volume();
    DlsLoss dls(spec);
    auto net = init_params(77, d + 1, 4, 3, Activation::sigmoid, 0.9);
    Eigen::MatrixXd XT(d + 1, 16);
    SplitMix64 rng(9);
    for (int q = 0; q < 16; ++q) {
      XT(0, q) = rng.uniform(-0.9, 0.9);
      XT(1, q) = rng.uniform(-0.9, 0.9);
      XT(2, q) = rng.uniform(0.05, T);
    }
    Eigen::VectorXd grad;
    dls.loss_and_grad(net, bf, XT, grad);
    const Eigen::VectorXd theta = param_flatten(net);
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      const double fd = (dls.loss(param_unflatten(net, tp), bf, XT) -
                         dls.loss(param_unflatten(net, tm), bf, XT)) /
                        (2.0 * h);
      check_close(grad(k), fd, 1e-5, 1e-7);
    }
  }
}

TEST_CASE("non-finite bundles abort with a located diagnostic", "[operators_loss]") {
  const int N = 2, d = 2;
  SpatialNets nets = SpatialNets::init(N, 8, d, 4, 3);
  Eigen::VectorXd bad = nets.flatten();
  bad(3) = std::numeric_limits<double>::quiet_NaN();
  nets.set_flat(bad);
  GalerkinLossSpec spec;
  spec.order = BasisOrder::first;
  spec.N = N;
  spec.T = 1.0;
  spec.op = SpatialOperator::neg_laplacian();
  spec.f_factory =
      slice_factory_from_pointwise([](const Eigen::VectorXd&, double) { return 0.0; });
  spec.domain_volume = 4.0;
  GalerkinLoss loss(spec);
  const Eigen::MatrixXd X = interior_points(DomainSpec::make_symmetric_box(d), 4, 2);
  CHECK_THROWS_WITH(loss.loss(SpatialNets(nets), unit_box_bf(d), X),
                    Catch::Matchers::ContainsSubstring("network"));
}
