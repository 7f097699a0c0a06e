#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dabg/rng.hpp"

namespace dabg {

enum class Activation { sigmoid, tanh, softplus, arctan };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
    case Activation::arctan: return "arctan";
  }
  throw std::logic_error("activation_name: bad enum");
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "softplus") return Activation::softplus;
  if (s == "arctan") return Activation::arctan;
  throw std::invalid_argument("unknown activation: " + s);
}

namespace detail {

/// Activation value and first two derivatives, elementwise.
inline void act_forward(Activation act, const Eigen::ArrayXXd& Z, Eigen::ArrayXXd& V,
                        Eigen::ArrayXXd& d1, Eigen::ArrayXXd& d2) {
  switch (act) {
    case Activation::sigmoid: {
      V = ((-Z).exp() + 1.0).inverse();
      d1 = V * (1.0 - V);
      d2 = d1 * (1.0 - 2.0 * V);
      return;
    }
    case Activation::tanh: {
      V = Z.tanh();
      d1 = 1.0 - V.square();
      d2 = -2.0 * V * d1;
      return;
    }
    case Activation::softplus: {
      const Eigen::ArrayXXd s = ((-Z).exp() + 1.0).inverse();
      V = Z.max(0.0) + (-Z.abs()).exp().log1p();
      d1 = s;
      d2 = s * (1.0 - s);
      return;
    }
    case Activation::arctan: {
      V = Z.atan();
      d1 = (1.0 + Z.square()).inverse();
      d2 = -2.0 * Z * d1.square();
      return;
    }
  }
}

/// Third derivative, elementwise (needed only when differentiating losses that
/// contain the laplacian).
inline Eigen::ArrayXXd act_d3(Activation act, const Eigen::ArrayXXd& Z) {
  switch (act) {
    case Activation::sigmoid: {
      const Eigen::ArrayXXd s = ((-Z).exp() + 1.0).inverse();
      const Eigen::ArrayXXd d1 = s * (1.0 - s);
      return d1 * ((1.0 - 2.0 * s).square() - 2.0 * d1);
    }
    case Activation::tanh: {
      const Eigen::ArrayXXd v = Z.tanh();
      const Eigen::ArrayXXd d1 = 1.0 - v.square();
      return -2.0 * (d1.square() + v * (-2.0 * v * d1));
    }
    case Activation::softplus: {
      const Eigen::ArrayXXd s = ((-Z).exp() + 1.0).inverse();
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case Activation::arctan: {
      const Eigen::ArrayXXd d1 = (1.0 + Z.square()).inverse();
      return (6.0 * Z.square() - 2.0) * d1.cube();
    }
  }
  throw std::logic_error("act_d3: bad enum");
}

}  // namespace detail

/// Weights of one scalar fully-connected network: depth L means L-1 nonlinear
/// layers h_l(x) = act(W_l x + b_l) followed by the linear readout a.
struct MlpParams {
  int input_dim = 0;
  int depth = 0;                 // L >= 2
  std::vector<int> widths;       // M_1..M_{L-1}
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;
  Eigen::VectorXd a;
  Activation activation = Activation::sigmoid;

  int hidden_layers() const { return depth - 1; }

  Eigen::Index parameter_count() const {
    Eigen::Index c = a.size();
    for (std::size_t l = 0; l < W.size(); ++l) c += W[l].size() + b[l].size();
    return c;
  }
};

/// Seeded initialization; all entries U(-scale, scale) with scale defaulting
/// to sqrt(M) as in the training protocol (override available).
inline MlpParams init_params(std::uint64_t seed, int d, int M, int L,
                             Activation act = Activation::sigmoid, double scale = -1.0) {
  if (d < 1 || M < 1 || L < 2) throw std::invalid_argument("init_params: need d,M >= 1, L >= 2");
  if (scale <= 0.0) scale = std::sqrt(static_cast<double>(M));
  SplitMix64 rng(seed);
  MlpParams p;
  p.input_dim = d;
  p.depth = L;
  p.widths.assign(static_cast<std::size_t>(L - 1), M);
  p.activation = act;
  int prev = d;
  for (int l = 0; l < L - 1; ++l) {
    Eigen::MatrixXd Wl(M, prev);
    for (Eigen::Index j = 0; j < Wl.size(); ++j) Wl.data()[j] = rng.uniform(-scale, scale);
    Eigen::VectorXd bl(M);
    for (Eigen::Index j = 0; j < bl.size(); ++j) bl(j) = rng.uniform(-scale, scale);
    p.W.push_back(std::move(Wl));
    p.b.push_back(std::move(bl));
    prev = M;
  }
  p.a.resize(M);
  for (Eigen::Index j = 0; j < p.a.size(); ++j) p.a(j) = rng.uniform(-scale, scale);
  return p;
}

/// Bijective flattening in layer order (W_1, b_1, ..., W_{L-1}, b_{L-1}, a).
inline Eigen::VectorXd param_flatten(const MlpParams& p) {
  Eigen::VectorXd v(p.parameter_count());
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    v.segment(at, p.W[l].size()) = Eigen::Map<const Eigen::VectorXd>(p.W[l].data(), p.W[l].size());
    at += p.W[l].size();
    v.segment(at, p.b[l].size()) = p.b[l];
    at += p.b[l].size();
  }
  v.segment(at, p.a.size()) = p.a;
  return v;
}

/// Inverse of param_flatten against the shape of `like`.
inline MlpParams param_unflatten(const MlpParams& like, const Eigen::VectorXd& v) {
  if (v.size() != like.parameter_count())
    throw std::invalid_argument("param_unflatten: size mismatch");
  MlpParams p = like;
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    Eigen::Map<Eigen::VectorXd>(p.W[l].data(), p.W[l].size()) = v.segment(at, p.W[l].size());
    at += p.W[l].size();
    p.b[l] = v.segment(at, p.b[l].size());
    at += p.b[l].size();
  }
  p.a = v.segment(at, p.a.size());
  return p;
}

/// params - step * direction, elementwise in the flat layout.
inline MlpParams param_apply_update(const MlpParams& p, const Eigen::VectorXd& direction,
                                    double step) {
  return param_unflatten(p, param_flatten(p) - step * direction);
}

/// Value, spatial gradient and laplacian of the network at one point.
struct EvalBundle {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double laplacian = 0.0;
};

/// Batched bundles; columns index the points of the batch.
struct BundleBatch {
  Eigen::VectorXd value;
  Eigen::MatrixXd gradient;  // d x Q
  Eigen::VectorXd laplacian;
};

namespace detail {

// Stream layout within one M x (1+2d)Q matrix: [ value | J_1..J_d | H_1..H_d ].
struct StreamView {
  static Eigen::Ref<Eigen::MatrixXd> value(Eigen::MatrixXd& S, Eigen::Index Q) {
    return S.middleCols(0, Q);
  }
  static Eigen::Ref<Eigen::MatrixXd> J(Eigen::MatrixXd& S, int i, Eigen::Index Q) {
    return S.middleCols((1 + i) * Q, Q);
  }
  static Eigen::Ref<Eigen::MatrixXd> H(Eigen::MatrixXd& S, int d, int i, Eigen::Index Q) {
    return S.middleCols((1 + d + i) * Q, Q);
  }
  static Eigen::Ref<const Eigen::MatrixXd> value(const Eigen::MatrixXd& S, Eigen::Index Q) {
    return S.middleCols(0, Q);
  }
  static Eigen::Ref<const Eigen::MatrixXd> J(const Eigen::MatrixXd& S, int i, Eigen::Index Q) {
    return S.middleCols((1 + i) * Q, Q);
  }
  static Eigen::Ref<const Eigen::MatrixXd> H(const Eigen::MatrixXd& S, int d, int i,
                                             Eigen::Index Q) {
    return S.middleCols((1 + d + i) * Q, Q);
  }
};

}  // namespace detail

/// Forward/backward engine for batched bundles. Forward propagates per layer
/// the triple (values, input-jacobian rows, diagonal second derivatives) so
/// the laplacian is exact; backward reverse-accumulates parameter gradients
/// of any scalar function given its adjoints on (value, gradient, laplacian).
class MlpWorkspace {
 public:
  /// Bundles for all columns of X (d x Q). keep_tape enables backward().
  const BundleBatch& forward(const MlpParams& p, const Eigen::MatrixXd& X, bool keep_tape) {
    forward_trunk(p, X);
    readout(p.a, p.input_dim, X.cols(), out_);
    if (!keep_tape) tape_.clear();
    return out_;
  }

  /// Forward through the hidden layers only, keeping the tape; bundles for any
  /// head are then available via readout().
  void forward_trunk(const MlpParams& p, const Eigen::MatrixXd& X) {
    using SV = detail::StreamView;
    const int d = p.input_dim;
    const Eigen::Index Q = X.cols();
    if (X.rows() != d) throw std::invalid_argument("MlpWorkspace: input dimension mismatch");
    const int H = p.hidden_layers();
    tape_.resize(static_cast<std::size_t>(H));
    const Eigen::Index SW = (1 + 2 * static_cast<Eigen::Index>(d)) * Q;

    for (int l = 0; l < H; ++l) {
      auto& t = tape_[static_cast<std::size_t>(l)];
      const int M = p.widths[static_cast<std::size_t>(l)];
      t.Sz.resize(M, SW);
      if (l == 0) {
        SV::value(t.Sz, Q).noalias() = p.W[0] * X;
        SV::value(t.Sz, Q).colwise() += p.b[0];
        for (int i = 0; i < d; ++i) {
          SV::J(t.Sz, i, Q) = p.W[0].col(i).replicate(1, Q);
          SV::H(t.Sz, d, i, Q).setZero();
        }
      } else {
        t.Sz.noalias() = p.W[static_cast<std::size_t>(l)] * tape_[static_cast<std::size_t>(l - 1)].P;
        SV::value(t.Sz, Q).colwise() += p.b[static_cast<std::size_t>(l)];
      }
      const Eigen::ArrayXXd Z = SV::value(t.Sz, Q).array();
      Eigen::ArrayXXd V;
      detail::act_forward(p.activation, Z, V, t.d1, t.d2);
      t.P.resize(M, SW);
      SV::value(t.P, Q) = V.matrix();
      for (int i = 0; i < d; ++i) {
        const auto Jz = SV::J(t.Sz, i, Q).array();
        const auto Hz = SV::H(t.Sz, d, i, Q).array();
        SV::J(t.P, i, Q) = (t.d1 * Jz).matrix();
        SV::H(t.P, d, i, Q) = (t.d2 * Jz.square() + t.d1 * Hz).matrix();
      }
    }
  }

  /// Bundle readout against an arbitrary head vector, from the current tape.
  void readout(const Eigen::VectorXd& head, int d, Eigen::Index Q, BundleBatch& out) const {
    using SV = detail::StreamView;
    const auto& top = tape_.back().P;
    out.value = SV::value(top, Q).transpose() * head;
    out.gradient.resize(d, Q);
    for (int i = 0; i < d; ++i) out.gradient.row(i) = head.transpose() * SV::J(top, i, Q);
    out.laplacian = Eigen::VectorXd::Zero(Q);
    for (int i = 0; i < d; ++i)
      out.laplacian += (head.transpose() * SV::H(top, d, i, Q)).transpose();
  }

  /// Per-dimension second derivatives d^2/dx_i^2 as rows of a d x Q matrix
  /// (the laplacian is their column sum), from the current tape.
  void readout_hdiag(const Eigen::VectorXd& head, int d, Eigen::Index Q,
                     Eigen::MatrixXd& out) const {
    using SV = detail::StreamView;
    const auto& top = tape_.back().P;
    out.resize(d, Q);
    for (int i = 0; i < d; ++i) out.row(i) = head.transpose() * SV::H(top, d, i, Q);
  }

  /// Adjoint of readout: accumulate head gradient and the top-layer stream
  /// adjoint from bundle seeds. hbar carries one adjoint row per input
  /// dimension's second derivative.
  void readout_adjoint(const Eigen::VectorXd& head, int d, Eigen::Index Q,
                       const Eigen::VectorXd& vbar, const Eigen::MatrixXd& gbar,
                       const Eigen::MatrixXd& hbar, Eigen::VectorXd& head_bar,
                       Eigen::MatrixXd& Pbar) const {
    using SV = detail::StreamView;
    const auto& top = tape_.back().P;
    head_bar.noalias() += SV::value(top, Q) * vbar;
    for (int i = 0; i < d; ++i) {
      head_bar.noalias() += SV::J(top, i, Q) * gbar.row(i).transpose();
      head_bar.noalias() += SV::H(top, d, i, Q) * hbar.row(i).transpose();
    }
    SV::value(Pbar, Q).noalias() += head * vbar.transpose();
    for (int i = 0; i < d; ++i) {
      SV::J(Pbar, i, Q).noalias() += head * gbar.row(i);
      SV::H(Pbar, d, i, Q).noalias() += head * hbar.row(i);
    }
  }

  /// Laplacian-seed convenience: the same adjoint on every H stream.
  void readout_adjoint(const Eigen::VectorXd& head, int d, Eigen::Index Q,
                       const Eigen::VectorXd& vbar, const Eigen::MatrixXd& gbar,
                       const Eigen::VectorXd& lbar, Eigen::VectorXd& head_bar,
                       Eigen::MatrixXd& Pbar) const {
    readout_adjoint(head, d, Q, vbar, gbar,
                    Eigen::MatrixXd(lbar.transpose().replicate(d, 1)), head_bar, Pbar);
  }

  /// Reverse pass through the taped layers given the post-activation adjoint
  /// of the last hidden layer. Writes the layer parameter gradients (W_1, b_1,
  /// ..., W_{L-1}, b_{L-1}) into grad starting at offset `at`; returns the
  /// offset one past the written block.
  Eigen::Index backward_layers(const MlpParams& p, const Eigen::MatrixXd& X,
                               Eigen::MatrixXd& Pbar, Eigen::VectorXd& grad,
                               Eigen::Index at = 0) {
    using SV = detail::StreamView;
    const int d = p.input_dim;
    const Eigen::Index Q = X.cols();
    const int H = p.hidden_layers();
    if (tape_.size() != static_cast<std::size_t>(H))
      throw std::logic_error("MlpWorkspace: backward without tape");
    const Eigen::Index SW = (1 + 2 * static_cast<Eigen::Index>(d)) * Q;

    std::vector<Eigen::MatrixXd> Wbar(static_cast<std::size_t>(H));
    std::vector<Eigen::VectorXd> bbar(static_cast<std::size_t>(H));

    for (int l = H - 1; l >= 0; --l) {
      auto& t = tape_[static_cast<std::size_t>(l)];
      // sigma-node: post-activation adjoints (in Pbar) -> pre-activation adjoints
      const Eigen::ArrayXXd d3 = detail::act_d3(p.activation, SV::value(t.Sz, Q).array());
      Eigen::MatrixXd Szbar(t.Sz.rows(), SW);
      {
        Eigen::ArrayXXd Zbar = t.d1 * SV::value(Pbar, Q).array();
        for (int i = 0; i < d; ++i) {
          const auto Jz = SV::J(t.Sz, i, Q).array();
          const auto Hz = SV::H(t.Sz, d, i, Q).array();
          const auto Jpb = SV::J(Pbar, i, Q).array();
          const auto Hpb = SV::H(Pbar, d, i, Q).array();
          Zbar += t.d2 * Jz * Jpb + (d3 * Jz.square() + t.d2 * Hz) * Hpb;
          SV::J(Szbar, i, Q) = (t.d1 * Jpb + 2.0 * t.d2 * Jz * Hpb).matrix();
          SV::H(Szbar, d, i, Q) = (t.d1 * Hpb).matrix();
        }
        SV::value(Szbar, Q) = Zbar.matrix();
      }
      bbar[static_cast<std::size_t>(l)] = SV::value(Szbar, Q).rowwise().sum();
      if (l == 0) {
        Eigen::MatrixXd W0bar = SV::value(Szbar, Q) * X.transpose();
        for (int i = 0; i < d; ++i) W0bar.col(i) += SV::J(Szbar, i, Q).rowwise().sum();
        Wbar[0] = std::move(W0bar);
      } else {
        const auto& Pprev = tape_[static_cast<std::size_t>(l - 1)].P;
        Wbar[static_cast<std::size_t>(l)].noalias() = Szbar * Pprev.transpose();
        Pbar.resize(Pprev.rows(), SW);
        Pbar.noalias() = p.W[static_cast<std::size_t>(l)].transpose() * Szbar;
      }
    }

    for (int l = 0; l < H; ++l) {
      const auto& Wl = Wbar[static_cast<std::size_t>(l)];
      grad.segment(at, Wl.size()) += Eigen::Map<const Eigen::VectorXd>(Wl.data(), Wl.size());
      at += Wl.size();
      grad.segment(at, bbar[static_cast<std::size_t>(l)].size()) +=
          bbar[static_cast<std::size_t>(l)];
      at += bbar[static_cast<std::size_t>(l)].size();
    }
    return at;
  }

  /// Accumulate d(loss)/d(params) into grad (flat layout), given the loss
  /// adjoints of the forward bundles. forward(..., true) must have run with
  /// the same params and batch.
  void backward(const MlpParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& vbar,
                const Eigen::MatrixXd& gbar, const Eigen::MatrixXd& hbar,
                Eigen::VectorXd& grad) {
    const int d = p.input_dim;
    const Eigen::Index Q = X.cols();
    const int H = p.hidden_layers();
    if (grad.size() != p.parameter_count()) {
      grad.resize(p.parameter_count());
      grad.setZero();
    }
    const Eigen::Index SW = (1 + 2 * static_cast<Eigen::Index>(d)) * Q;
    Eigen::VectorXd abar = Eigen::VectorXd::Zero(p.a.size());
    Eigen::MatrixXd Pbar = Eigen::MatrixXd::Zero(p.widths[static_cast<std::size_t>(H - 1)], SW);
    readout_adjoint(p.a, d, Q, vbar, gbar, hbar, abar, Pbar);
    const Eigen::Index at = backward_layers(p, X, Pbar, grad);
    grad.segment(at, abar.size()) += abar;
  }

  void backward(const MlpParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& vbar,
                const Eigen::MatrixXd& gbar, const Eigen::VectorXd& lbar,
                Eigen::VectorXd& grad) {
    backward(p, X, vbar, gbar, Eigen::MatrixXd(lbar.transpose().replicate(p.input_dim, 1)),
             grad);
  }

  /// Plain value-only forward (no derivatives).
  static Eigen::VectorXd values(const MlpParams& p, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd cur = X;
    Eigen::ArrayXXd V, d1, d2;
    for (int l = 0; l < p.hidden_layers(); ++l) {
      Eigen::MatrixXd Z = p.W[static_cast<std::size_t>(l)] * cur;
      Z.colwise() += p.b[static_cast<std::size_t>(l)];
      detail::act_forward(p.activation, Z.array(), V, d1, d2);
      cur = V.matrix();
    }
    return cur.transpose() * p.a;
  }

  void drop_tape() { tape_.clear(); }

 private:
  struct TapeLayer {
    Eigen::MatrixXd Sz;  // pre-activation streams
    Eigen::MatrixXd P;   // post-activation streams
    Eigen::ArrayXXd d1, d2;
  };
  std::vector<TapeLayer> tape_;
  BundleBatch out_;
};

/// Bundle at a single point.
inline EvalBundle mlp_bundle(const MlpParams& p, const Eigen::VectorXd& x) {
  MlpWorkspace ws;
  const BundleBatch& b = ws.forward(p, x, false);
  return {b.value(0), b.gradient.col(0), b.laplacian(0)};
}

// ---------------------------------------------------------------------------
// Checkpoint format (versioned, plain text):
//   dabg-mlp-v1
//   activation <name>
//   input_dim <d>
//   depth <L>
//   widths <M_1> ... <M_{L-1}>
//   seed <seed>
//   params <count>
//   <count parameter values, one per line, flat layout>
// ---------------------------------------------------------------------------

inline void save_params(std::ostream& os, const MlpParams& p, std::uint64_t seed = 0) {
  os << "dabg-mlp-v1\n";
  os << "activation " << activation_name(p.activation) << '\n';
  os << "input_dim " << p.input_dim << '\n';
  os << "depth " << p.depth << '\n';
  os << "widths";
  for (int m : p.widths) os << ' ' << m;
  os << '\n';
  os << "seed " << seed << '\n';
  const Eigen::VectorXd flat = param_flatten(p);
  os << "params " << flat.size() << '\n';
  os.precision(17);
  for (Eigen::Index i = 0; i < flat.size(); ++i) os << flat(i) << '\n';
}

inline MlpParams load_params(std::istream& is, std::uint64_t* seed_out = nullptr) {
  std::string magic, key;
  is >> magic;
  if (magic != "dabg-mlp-v1") throw std::runtime_error("checkpoint: unknown format " + magic);
  std::string act_name;
  int d = 0, L = 0;
  is >> key >> act_name;
  if (key != "activation") throw std::runtime_error("checkpoint: expected activation");
  is >> key >> d;
  if (key != "input_dim") throw std::runtime_error("checkpoint: expected input_dim");
  is >> key >> L;
  if (key != "depth") throw std::runtime_error("checkpoint: expected depth");
  is >> key;
  if (key != "widths") throw std::runtime_error("checkpoint: expected widths");
  std::vector<int> widths(static_cast<std::size_t>(L - 1));
  for (auto& m : widths) is >> m;
  std::uint64_t seed = 0;
  is >> key >> seed;
  if (key != "seed") throw std::runtime_error("checkpoint: expected seed");
  if (seed_out) *seed_out = seed;
  Eigen::Index count = 0;
  is >> key >> count;
  if (key != "params") throw std::runtime_error("checkpoint: expected params");

  MlpParams p;
  p.input_dim = d;
  p.depth = L;
  p.widths = widths;
  p.activation = activation_from_name(act_name);
  int prev = d;
  for (int m : widths) {
    p.W.emplace_back(Eigen::MatrixXd::Zero(m, prev));
    p.b.emplace_back(Eigen::VectorXd::Zero(m));
    prev = m;
  }
  p.a = Eigen::VectorXd::Zero(widths.empty() ? 0 : widths.back());
  if (count != p.parameter_count()) throw std::runtime_error("checkpoint: parameter count mismatch");
  Eigen::VectorXd flat(count);
  for (Eigen::Index i = 0; i < count; ++i)
    if (!(is >> flat(i))) throw std::runtime_error("checkpoint: truncated parameter list");
  return param_unflatten(p, flat);
}

inline void save_params_file(const std::string& path, const MlpParams& p, std::uint64_t seed = 0) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  save_params(os, p, seed);
}

inline MlpParams load_params_file(const std::string& path, std::uint64_t* seed_out = nullptr) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  return load_params(is, seed_out);
}

}  // namespace dabg
