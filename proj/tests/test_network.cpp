#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <sstream>

#include "dabg/boundary.hpp"
#include "dabg/mlp.hpp"
#include "dabg/solution.hpp"

using namespace dabg;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

MlpParams single_neuron(const Eigen::VectorXd& w, double b, double a) {
  MlpParams p;
  p.input_dim = static_cast<int>(w.size());
  p.depth = 2;
  p.widths = {1};
  p.W = {w.transpose()};
  p.b = {Eigen::VectorXd::Constant(1, b)};
  p.a = Eigen::VectorXd::Constant(1, a);
  return p;
}

double fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                   const Eigen::VectorXd& x, int i, double h) {
  Eigen::VectorXd xp = x, xm = x;
  xp(i) += h;
  xm(i) -= h;
  return (f(xp) - f(xm)) / (2.0 * h);
}

double fd_laplacian(const std::function<double(const Eigen::VectorXd&)>& f,
                    const Eigen::VectorXd& x, double h) {
  const double fc = f(x);
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    acc += (f(xp) - 2.0 * fc + f(xm)) / (h * h);
  }
  return acc;
}

void check_close(double got, double want, double rel, double abs_floor) {
  CHECK(std::abs(got - want) <= rel * std::max(std::abs(want), abs_floor / rel));
}

}  // namespace

TEST_CASE("initialization is seeded and bounded", "[network]") {
  const auto p1 = init_params(42, 3, 20, 3);
  const auto p2 = init_params(42, 3, 20, 3);
  CHECK(param_flatten(p1) == param_flatten(p2));
  const auto p3 = init_params(43, 3, 20, 3);
  CHECK(param_flatten(p1) != param_flatten(p3));
  const double bound = std::sqrt(20.0);
  const Eigen::VectorXd flat = param_flatten(p1);
  CHECK(flat.cwiseAbs().maxCoeff() <= bound);
  CHECK(flat.cwiseAbs().maxCoeff() > 0.5 * bound);  // spread over the range

  const auto small = init_params(1, 3, 20, 3, Activation::sigmoid, 0.05);
  CHECK(param_flatten(small).cwiseAbs().maxCoeff() <= 0.05);
}

TEST_CASE("single-neuron bundles match hand calculus", "[network]") {
  {
    const auto p = single_neuron((Eigen::VectorXd(2) << 1.0, 0.0).finished(), 0.0, 1.0);
    const auto b = mlp_bundle(p, Eigen::VectorXd::Zero(2));
    CHECK(b.value == Catch::Approx(0.5));
    CHECK(b.gradient(0) == Catch::Approx(0.25));
    CHECK(b.gradient(1) == Catch::Approx(0.0).margin(1e-15));
    CHECK(b.laplacian == Catch::Approx(0.0).margin(1e-15));
  }
  {
    const auto p = single_neuron(Eigen::VectorXd::Constant(1, 3.0), 0.0, 2.0);
    const auto b = mlp_bundle(p, Eigen::VectorXd::Constant(1, 0.1));
    const double s = sigmoid(0.3);
    const double d2 = s * (1.0 - s) * (1.0 - 2.0 * s);
    CHECK(b.value == Catch::Approx(2.0 * s));
    CHECK(b.gradient(0) == Catch::Approx(2.0 * s * (1.0 - s) * 3.0));
    CHECK(b.laplacian == Catch::Approx(2.0 * d2 * 9.0));
  }
}

TEST_CASE("zero-weight networks are constant", "[network]") {
  auto p = init_params(5, 3, 6, 3);
  for (auto& W : p.W) W.setZero();
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.37);
  const auto b = mlp_bundle(p, x);
  Eigen::ArrayXd h2 = (1.0 + (-p.b[1].array()).exp()).inverse();
  CHECK(b.value == Catch::Approx((p.a.array() * h2).sum()));
  CHECK(b.gradient.cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.laplacian == 0.0);
}

TEST_CASE("analytic bundles match central finite differences", "[network]") {
  SplitMix64 rng(99);
  int pair = 0;
  for (int d : {1, 2, 5, 20}) {
    for (int rep = 0; rep < 25; ++rep, ++pair) {
      const Activation act = static_cast<Activation>(pair % 4);
      const auto p = init_params(1000 + static_cast<std::uint64_t>(pair), d, 8, 3, act, 1.0);
      Eigen::VectorXd x(d);
      for (int i = 0; i < d; ++i) x(i) = rng.uniform(-1.0, 1.0);
      const auto b = mlp_bundle(p, x);
      auto f = [&](const Eigen::VectorXd& y) { return mlp_bundle(p, y).value; };
      for (int i = 0; i < d; ++i)
        check_close(b.gradient(i), fd_gradient(f, x, i, 1e-5), 1e-5, 1e-7);
      check_close(b.laplacian, fd_laplacian(f, x, 1e-4), 1e-5, 1e-6);
    }
  }
  CHECK(pair == 100);
}

TEST_CASE("batched evaluation is reproducible and matches single points", "[network]") {
  const auto p = init_params(7, 4, 10, 3);
  Eigen::MatrixXd X(4, 17);
  SplitMix64 rng(3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.0, 1.0);
  MlpWorkspace ws;
  const BundleBatch batch = ws.forward(p, X, false);

  // identical computation twice -> bitwise identical
  MlpWorkspace ws2;
  const BundleBatch again = ws2.forward(p, X, false);
  CHECK((batch.value - again.value).cwiseAbs().maxCoeff() == 0.0);
  CHECK((batch.gradient - again.gradient).cwiseAbs().maxCoeff() == 0.0);
  CHECK((batch.laplacian - again.laplacian).cwiseAbs().maxCoeff() == 0.0);

  // single-point path reorders the reductions; agreement to rounding only
  for (int q = 0; q < 17; ++q) {
    const auto one = mlp_bundle(p, X.col(q));
    CHECK(one.value == Catch::Approx(batch.value(q)).epsilon(1e-13));
    CHECK((one.gradient - batch.gradient.col(q)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(one.laplacian == Catch::Approx(batch.laplacian(q)).epsilon(1e-12).margin(1e-13));
  }
}

TEST_CASE("parameter gradients of a bundle functional match finite differences", "[network]") {
  // loss = sum_q (v^2 + |g|^2 + lap^2) / 2 exercises value, jacobian and
  // laplacian adjoints including the third activation derivative.
  for (bool shared : {false, true}) {
    const int d = 2, N = 3;
    SpatialNets nets = SpatialNets::init(N, 77, d, 5, 3, Activation::tanh, 0.8, shared);
    Eigen::MatrixXd X(d, 9);
    SplitMix64 rng(17);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.0, 1.0);

    auto loss_of = [&](const SpatialNets& s) {
      double acc = 0.0;
      for (const auto& b : s.forward(X))
        acc += 0.5 * (b.value.squaredNorm() + b.gradient.squaredNorm() +
                      b.laplacian.squaredNorm());
      return acc;
    };

    const auto bundles = nets.forward(X);
    std::vector<BundleSeeds> seeds(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n)
      seeds[static_cast<std::size_t>(n)] = {bundles[static_cast<std::size_t>(n)].value,
                                            bundles[static_cast<std::size_t>(n)].gradient,
                                            bundles[static_cast<std::size_t>(n)].laplacian};
    const Eigen::VectorXd grad = nets.backward(X, seeds);

    const Eigen::VectorXd theta = nets.flatten();
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < theta.size(); k += 7) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      SpatialNets sp = nets, sm = nets;
      sp.set_flat(tp);
      sm.set_flat(tm);
      const double fd = (loss_of(sp) - loss_of(sm)) / (2.0 * h);
      check_close(grad(k), fd, 1e-5, 1e-7);
    }
  }
}

TEST_CASE("boundary factor bundles on anchor points", "[network]") {
  const auto ball = BoundaryFactor::make_ball(3, 1.0, /*normalize=*/false);
  const auto b0 = ball.bundle(Eigen::VectorXd::Zero(3));
  CHECK(b0.value == Catch::Approx(-1.0));
  CHECK(b0.gradient.cwiseAbs().maxCoeff() == 0.0);
  CHECK(b0.laplacian == Catch::Approx(6.0));

  const auto box = BoundaryFactor::make_box(Eigen::VectorXd::Constant(2, -1.0),
                                            Eigen::VectorXd::Constant(2, 1.0));
  CHECK(box.bundle((Eigen::VectorXd(2) << 1.0, 0.3).finished()).value == 0.0);

  Eigen::VectorXd on_sphere = (Eigen::VectorXd(3) << 0.6, 0.8, 0.0).finished();
  CHECK(std::abs(ball.bundle(on_sphere).value) < 1e-15);

  // box gradient/laplacian against finite differences of the raw product
  const auto box4 = BoundaryFactor::make_box(Eigen::VectorXd::Constant(4, -1.0),
                                             Eigen::VectorXd::Constant(4, 1.0), false);
  auto f = [&](const Eigen::VectorXd& y) { return box4.bundle(y).value; };
  Eigen::VectorXd x(4);
  x << 0.3, -0.5, 0.1, 0.7;
  const auto bb = box4.bundle(x);
  for (int i = 0; i < 4; ++i)
    check_close(bb.gradient(i), fd_gradient(f, x, i, 1e-5), 1e-7, 1e-9);
  check_close(bb.laplacian, fd_laplacian(f, x, 1e-4), 1e-6, 1e-8);
}

TEST_CASE("boundary factor normalization hits the sampled sup", "[network]") {
  // max{|nu|, |grad nu|^2, |lap nu|} == 1 within 5% on a fresh sample
  struct CaseDomain {
    BoundaryFactor bf;
    DomainSpec domain;
  };
  const CaseDomain cases[] = {
      {BoundaryFactor::make_box(Eigen::VectorXd::Constant(2, -1.0),
                                Eigen::VectorXd::Constant(2, 1.0)),
       DomainSpec::make_symmetric_box(2)},
      {BoundaryFactor::make_ball(20), DomainSpec::make_unit_ball(20)},
      {BoundaryFactor::make_ball(2), DomainSpec::make_unit_ball(2)},
  };
  for (const auto& c : cases) {
    auto [X, tg] = test_sets(c.domain, 20000, 1, 1.0, 321);
    BoundaryBatch nb;
    c.bf.bundle_batch(X, nb);
    const double sup = std::max({nb.value.cwiseAbs().maxCoeff(),
                                 nb.gradient.colwise().squaredNorm().maxCoeff(),
                                 nb.laplacian.cwiseAbs().maxCoeff()});
    CHECK(sup == Catch::Approx(1.0).margin(0.05));
  }
}

TEST_CASE("level-set boundary factor uses the supplied bundle", "[network]") {
  // rho(x) = x1^2 + 2 x2^2, interior of rho < 1
  auto rho = [](const Eigen::VectorXd& x) {
    EvalBundle b;
    b.value = x(0) * x(0) + 2.0 * x(1) * x(1);
    b.gradient = (Eigen::VectorXd(2) << 2.0 * x(0), 4.0 * x(1)).finished();
    b.laplacian = 6.0;
    return b;
  };
  const auto bf = BoundaryFactor::make_level_set(rho, 1.0, 2);
  const auto b = bf.bundle((Eigen::VectorXd(2) << 1.0, 0.0).finished());
  CHECK(b.value == Catch::Approx(0.0).margin(1e-15));
  CHECK(b.laplacian == Catch::Approx(6.0));
}

TEST_CASE("boundary-factored networks vanish on the boundary", "[network]") {
  SplitMix64 rng(55);
  const auto net2 = init_params(12, 2, 8, 3);
  const auto box = BoundaryFactor::make_box(Eigen::VectorXd::Constant(2, -1.0),
                                            Eigen::VectorXd::Constant(2, 1.0));
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd x(2);
    x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    const int face = static_cast<int>(rng.next_u64() % 2);
    x(face) = rng.next_u64() % 2 ? 1.0 : -1.0;
    CHECK(std::abs(spatial_net_bundle(net2, box, x).value) <= 1e-12);
  }
  const auto net20 = init_params(13, 20, 8, 3);
  const auto ball = BoundaryFactor::make_ball(20);
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd g(20);
    for (int i = 0; i < 20; ++i) g(i) = rng.normal();
    g.normalize();
    CHECK(std::abs(spatial_net_bundle(net20, ball, g).value) <= 1e-12);
  }
}

TEST_CASE("product-rule bundle degenerates for constant networks", "[network]") {
  auto p = init_params(21, 3, 6, 3);
  for (auto& W : p.W) W.setZero();
  const auto ball = BoundaryFactor::make_ball(3, 1.0, false);
  Eigen::VectorXd x(3);
  x << 0.2, -0.1, 0.4;
  const double c = mlp_bundle(p, x).value;
  const auto w = spatial_net_bundle(p, ball, x);
  const auto nu = ball.bundle(x);
  CHECK(w.laplacian == Catch::Approx(c * nu.laplacian));
  CHECK(w.value == Catch::Approx(c * nu.value));
}

TEST_CASE("boundary-factored bundle matches finite differences in d=4", "[network]") {
  const auto net = init_params(31, 4, 6, 3, Activation::sigmoid, 1.0);
  const auto box = BoundaryFactor::make_box(Eigen::VectorXd::Constant(4, -1.0),
                                            Eigen::VectorXd::Constant(4, 1.0));
  SplitMix64 rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = rng.uniform(-0.9, 0.9);
    const auto b = spatial_net_bundle(net, box, x);
    auto f = [&](const Eigen::VectorXd& y) { return spatial_net_bundle(net, box, y).value; };
    for (int i = 0; i < 4; ++i)
      check_close(b.gradient(i), fd_gradient(f, x, i, 1e-4), 1e-6, 1e-8);
    check_close(b.laplacian, fd_laplacian(f, x, 1e-4), 1e-6, 1e-7);
  }
}

TEST_CASE("flatten round trip and updates", "[network]") {
  const auto p = init_params(3, 2, 7, 4);
  const Eigen::VectorXd flat = param_flatten(p);
  const auto p2 = param_unflatten(p, flat);
  CHECK(param_flatten(p2) == flat);

  const auto same = param_apply_update(p, Eigen::VectorXd::Random(flat.size()), 0.0);
  CHECK(param_flatten(same) == flat);

  const Eigen::VectorXd dir = Eigen::VectorXd::Random(flat.size());
  const auto once = param_apply_update(param_apply_update(p, dir, 0.25), dir, 0.25);
  const auto direct = param_apply_update(p, dir, 0.5);
  CHECK((param_flatten(once) - param_flatten(direct)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("checkpoint io round-trips exactly", "[network]") {
  const auto p = init_params(97, 5, 9, 3, Activation::arctan);
  std::stringstream ss;
  save_params(ss, p, 97);
  std::uint64_t seed = 0;
  const auto q = load_params(ss, &seed);
  CHECK(seed == 97);
  CHECK(q.input_dim == 5);
  CHECK(q.depth == 3);
  CHECK(q.activation == Activation::arctan);
  CHECK(param_flatten(q) == param_flatten(p));
}

TEST_CASE("adaptive basis solution respects initial and boundary conditions", "[network]") {
  const int N = 4;
  SpatialNets nets = SpatialNets::init(N, 5, 2, 6, 3);
  const auto box = BoundaryFactor::make_box(Eigen::VectorXd::Constant(2, -1.0),
                                            Eigen::VectorXd::Constant(2, 1.0));
  AdaptiveBasisSolution sol{nets, box, BasisOrder::first, 1.0};
  Eigen::VectorXd x(2);
  x << 0.3, -0.2;
  CHECK(eval_solution(sol, x, 0.0) == Catch::Approx(0.0).margin(1e-13));
  Eigen::VectorXd xb(2);
  xb << 1.0, -0.2;
  CHECK(eval_solution(sol, xb, 0.7) == Catch::Approx(0.0).margin(1e-13));

  // N = 1 with a constant network reproduces nu * c * phi_1
  auto constant = init_params(9, 2, 4, 3);
  for (auto& W : constant.W) W.setZero();
  const double c = mlp_bundle(constant, x).value;
  AdaptiveBasisSolution s1{SpatialNets::independent({constant}), box, BasisOrder::first, 2.0};
  const double nu = box.bundle(x).value;
  const double expect =
      nu * c * eval_basis({BasisOrder::first, BasisKind::trial, 1}, 1.3, TimeInterval(2.0));
  CHECK(eval_solution(s1, x, 1.3) == Catch::Approx(expect).epsilon(1e-13));

  // grid evaluation consistent with pointwise evaluation
  Eigen::MatrixXd X(2, 3);
  X << 0.1, -0.4, 0.8, 0.5, 0.0, -0.9;
  Eigen::VectorXd tg(2);
  tg << 0.5, 1.0;
  const Eigen::MatrixXd grid = eval_solution_grid(sol, X, tg);
  for (int q = 0; q < 3; ++q)
    for (int k = 0; k < 2; ++k)
      CHECK(grid(q, k) == Catch::Approx(eval_solution(sol, X.col(q), tg(k))).margin(1e-13));
}

TEST_CASE("shared trunk readout equals head-wise evaluation", "[network]") {
  SpatialNets nets = SpatialNets::init(3, 41, 2, 6, 3, Activation::sigmoid, -1.0, true);
  Eigen::MatrixXd X(2, 5);
  SplitMix64 rng(2);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.0, 1.0);
  const auto bundles = nets.forward(X);
  const Eigen::MatrixXd vals = nets.values(X);
  for (int n = 0; n < 3; ++n)
    CHECK((bundles[static_cast<std::size_t>(n)].value.transpose() - vals.row(n))
              .cwiseAbs()
              .maxCoeff() < 1e-13);
}
