#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scramble/rng.hpp"

namespace scramble {

// Projected gradient descent on the Stiefel manifold St(p, k) with a QR
// retraction and a geometric step-size schedule. Hooks let the caller refresh
// objective state (scales, trimming subsets) around each step.

enum class Termination { Converged, MaxIters };

struct ConvergenceTrace {
  std::vector<double> objectives;     // L(V_t) per iterate, including V_0
  std::vector<double> param_changes;  // d_t = ||V_t - V_{t-1}||_F / ||V_{t-1}||_F
  double max_orth_residual = 0.0;     // max over iterates of ||V'V - I||_max
  Termination termination = Termination::MaxIters;
  int iterations = 0;
};

struct OptimizerConfig {
  double learning_rate = 1e-3;  // gamma_0
  double decay = 0.99;          // gamma_t = gamma_0 * decay^t
  int max_iters = 1000;
  double tol = 1e-6;            // stop when |L_{t+1} - L_t| <= tol
  int batch_size = 0;           // 0 means full batch
  std::uint64_t seed = 0;       // minibatch shuffle seed
  bool shuffle = true;
};

struct IterationHooks {
  // runs before each gradient evaluation (e.g. refresh residual scales)
  std::function<void(const Eigen::MatrixXd&, int)> before_gradient;
  // runs after each retraction (e.g. refresh LTS h-subsets)
  std::function<void(const Eigen::MatrixXd&, int)> after_step;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, ConvergenceTrace trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  ConvergenceTrace trace;
};

inline Eigen::MatrixXd tangent_project(const Eigen::MatrixXd& V, const Eigen::MatrixXd& G) {
  return G - V * (V.transpose() * G);
}

// thin-QR retraction with the R-diagonal sign convention that makes qf unique
inline Eigen::MatrixXd qr_retract(const Eigen::MatrixXd& V, const Eigen::MatrixXd& step) {
  const Eigen::MatrixXd A = V + step;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(A.cols(), A.cols());
  for (Eigen::Index l = 0; l < A.cols(); ++l) {
    const double d = R(l, l);
    if (std::abs(d) < 1e-300) throw std::runtime_error("qr_retract: retraction degenerate");
    if (d < 0.0) Q.col(l) = -Q.col(l);
  }
  return Q;
}

inline double orth_residual(const Eigen::MatrixXd& V) {
  const Eigen::Index k = V.cols();
  return (V.transpose() * V - Eigen::MatrixXd::Identity(k, k)).array().abs().maxCoeff();
}

namespace detail {

struct StepState {
  Eigen::MatrixXd V;
  ConvergenceTrace trace;
};

template <typename Objective, typename GradientStep>
std::pair<Eigen::MatrixXd, ConvergenceTrace> descend(const Objective& objective,
                                                     const GradientStep& gradient_step,
                                                     Eigen::MatrixXd V,
                                                     const OptimizerConfig& cfg,
                                                     const IterationHooks& hooks) {
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("optimizer: nonpositive learning rate");
  if (cfg.decay <= 0.0 || cfg.decay > 1.0) throw std::invalid_argument("optimizer: decay outside (0,1]");
  if (cfg.max_iters < 1) throw std::invalid_argument("optimizer: max_iters must be positive");

  ConvergenceTrace trace;
  trace.max_orth_residual = orth_residual(V);
  if (hooks.before_gradient) hooks.before_gradient(V, 0);
  double prev_obj = objective(V);
  trace.objectives.push_back(prev_obj);
  if (!std::isfinite(prev_obj)) throw DivergenceError("optimizer: objective not finite at start", trace);

  double gamma = cfg.learning_rate;
  for (int t = 0; t < cfg.max_iters; ++t) {
    const Eigen::MatrixXd Vnew = gradient_step(V, t, gamma);
    trace.max_orth_residual = std::max(trace.max_orth_residual, orth_residual(Vnew));
    const double denom = V.norm();
    trace.param_changes.push_back(denom > 0.0 ? (Vnew - V).norm() / denom : 0.0);
    V = Vnew;
    if (hooks.after_step) hooks.after_step(V, t);

    if (hooks.before_gradient) hooks.before_gradient(V, t + 1);
    const double obj = objective(V);
    trace.objectives.push_back(obj);
    trace.iterations = t + 1;
    if (!std::isfinite(obj)) throw DivergenceError("optimizer: objective diverged", trace);
    if (std::abs(obj - prev_obj) <= cfg.tol) {
      trace.termination = Termination::Converged;
      return {V, trace};
    }
    prev_obj = obj;
    gamma *= cfg.decay;
  }
  trace.termination = Termination::MaxIters;
  return {V, trace};
}

}  // namespace detail

// full-batch descent: gradient(V, t) returns the Euclidean gradient, which is
// projected to the tangent space and retracted
inline std::pair<Eigen::MatrixXd, ConvergenceTrace> minimize(
    const std::function<double(const Eigen::MatrixXd&)>& objective,
    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, int)>& gradient,
    const Eigen::MatrixXd& V0, const OptimizerConfig& cfg, const IterationHooks& hooks = {}) {
  return detail::descend(
      objective,
      [&](const Eigen::MatrixXd& V, int t, double gamma) {
        const Eigen::MatrixXd P = tangent_project(V, gradient(V, t));
        return qr_retract(V, -gamma * P);
      },
      V0, cfg, hooks);
}

// minibatch descent: one epoch of row batches per outer iteration; the row
// order is reshuffled each epoch and a tail smaller than batch_size is
// dropped so every step sees a full batch
inline std::pair<Eigen::MatrixXd, ConvergenceTrace> minibatch_minimize(
    const std::function<double(const Eigen::MatrixXd&)>& objective,
    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, int, const std::vector<int>&)>& gradient_rows,
    int n_rows, const Eigen::MatrixXd& V0, const OptimizerConfig& cfg,
    const IterationHooks& hooks = {}) {
  if (n_rows < 1) throw std::invalid_argument("optimizer: no rows");
  const int batch = (cfg.batch_size <= 0 || cfg.batch_size >= n_rows) ? n_rows : cfg.batch_size;
  std::vector<int> order(static_cast<std::size_t>(n_rows));
  for (int i = 0; i < n_rows; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 gen(cfg.seed);

  return detail::descend(
      objective,
      [&, batch](const Eigen::MatrixXd& V, int t, double gamma) {
        if (cfg.shuffle && batch < n_rows) shuffle(order, gen);
        const int n_batches = n_rows / batch;
        Eigen::MatrixXd Vcur = V;
        std::vector<int> rows(static_cast<std::size_t>(batch));
        for (int bidx = 0; bidx < n_batches; ++bidx) {
          for (int i = 0; i < batch; ++i)
            rows[static_cast<std::size_t>(i)] = order[static_cast<std::size_t>(bidx * batch + i)];
          const Eigen::MatrixXd P = tangent_project(Vcur, gradient_rows(Vcur, t, rows));
          Vcur = qr_retract(Vcur, -gamma * P);
        }
        return Vcur;
      },
      V0, cfg, hooks);
}

}  // namespace scramble
