#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dabg {

enum class ScheduleKind { step_decay, inverse_time };

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::step_decay;
  double factor = 0.7;    // step_decay multiplier
  double period = 2000.0; // decay period / inverse-time constant
};

inline double lr(const LrSchedule& s, double lr0, std::int64_t iter) {
  switch (s.kind) {
    case ScheduleKind::step_decay:
      return lr0 * std::pow(s.factor, std::floor(static_cast<double>(iter) / s.period));
    case ScheduleKind::inverse_time:
      return lr0 / (1.0 + static_cast<double>(iter) / s.period);
  }
  throw std::logic_error("lr: bad schedule kind");
}

inline ScheduleKind schedule_from_name(const std::string& s) {
  if (s == "step-decay") return ScheduleKind::step_decay;
  if (s == "inverse-time") return ScheduleKind::inverse_time;
  throw std::invalid_argument("unknown schedule: " + s);
}

inline std::string schedule_name(ScheduleKind k) {
  return k == ScheduleKind::step_decay ? "step-decay" : "inverse-time";
}

enum class OptimizerKind { plain_gd, adaptive_moment };

inline OptimizerKind optimizer_from_name(const std::string& s) {
  if (s == "plain-gd") return OptimizerKind::plain_gd;
  if (s == "adaptive-moment") return OptimizerKind::adaptive_moment;
  throw std::invalid_argument("unknown optimizer: " + s);
}

inline std::string optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::plain_gd ? "plain-gd" : "adaptive-moment";
}

struct TrainConfig {
  std::int64_t iterations = 20000;
  int batch_size = 10000;
  double lr0 = 1e-3;
  LrSchedule schedule;
  OptimizerKind optimizer = OptimizerKind::plain_gd;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 100;
  double divergence_factor = 1e6;
};

struct TrainCheckpoint {
  std::int64_t iteration;
  double loss;
  double lr;
  double elapsed_ms;
};

struct TrainTrace {
  std::vector<TrainCheckpoint> checkpoints;
  Eigen::VectorXd final_theta;
  double final_loss = 0.0;
  std::int64_t iterations_run = 0;
};

struct TrainingError : std::runtime_error {
  TrainTrace trace;
  TrainingError(const std::string& what, TrainTrace t)
      : std::runtime_error(what), trace(std::move(t)) {}
};

inline void write_trace_csv(std::ostream& os, const TrainTrace& trace) {
  os << "iteration,loss,lr,elapsed_ms\n";
  os.precision(17);
  for (const auto& c : trace.checkpoints)
    os << c.iteration << ',' << c.loss << ',' << c.lr << ',' << c.elapsed_ms << '\n';
}

/// Loss and gradient at the flat parameter vector over one sample batch.
using LossGrad = std::function<double(const Eigen::VectorXd& theta, const Eigen::MatrixXd& batch,
                                      Eigen::VectorXd& grad)>;
/// Sample batch for one iteration (columns are points).
using BatchProvider = std::function<Eigen::MatrixXd(std::int64_t iter)>;

/// Batch gradient descent: per iteration draw the batch, evaluate loss and
/// gradient, and step with the scheduled learning rate. Deterministic given
/// the seed threading of the batch provider.
inline TrainTrace train(const LossGrad& loss, const BatchProvider& batches,
                        Eigen::VectorXd& theta, const TrainConfig& config) {
  if (config.iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
  TrainTrace trace;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&t0] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd m, v;  // adaptive-moment state
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (config.optimizer == OptimizerKind::adaptive_moment) {
    m = Eigen::VectorXd::Zero(theta.size());
    v = Eigen::VectorXd::Zero(theta.size());
  }

  double initial_loss = 0.0;
  double last_loss = 0.0;
  for (std::int64_t it = 0; it < config.iterations; ++it) {
    const Eigen::MatrixXd batch = batches(it);
    grad.setZero();
    const double L = loss(theta, batch, grad);
    const double step = lr(config.schedule, config.lr0, it);
    if (!std::isfinite(L)) {
      trace.final_theta = theta;
      trace.final_loss = last_loss;
      trace.iterations_run = it;
      throw TrainingError("train: non-finite loss at iteration " + std::to_string(it), trace);
    }
    if (it == 0) initial_loss = L;
    if (L > config.divergence_factor * std::max(initial_loss, 1e-300)) {
      trace.final_theta = theta;
      trace.final_loss = L;
      trace.iterations_run = it;
      throw TrainingError("train: divergence guard tripped at iteration " + std::to_string(it) +
                              " (loss " + std::to_string(L) + ")",
                          trace);
    }
    last_loss = L;
    if (it % config.checkpoint_every == 0)
      trace.checkpoints.push_back({it, L, step, elapsed_ms()});

    if (config.optimizer == OptimizerKind::plain_gd) {
      theta -= step * grad;
    } else {
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(it) + 1.0);
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(it) + 1.0);
      theta -= (step / bc1) * (m.array() / ((v.array() / bc2).sqrt() + eps)).matrix();
    }
  }
  trace.final_theta = theta;
  trace.final_loss = last_loss;
  trace.iterations_run = config.iterations;
  if (trace.checkpoints.empty() || trace.checkpoints.back().iteration != config.iterations - 1) {
    if (config.iterations > 0)
      trace.checkpoints.push_back(
          {config.iterations - 1, last_loss, lr(config.schedule, config.lr0, config.iterations - 1),
           elapsed_ms()});
  }
  return trace;
}

}  // namespace dabg
