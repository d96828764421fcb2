#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "scramble/loss.hpp"
#include "scramble/robust_stats.hpp"
#include "scramble/stiefel.hpp"

namespace scramble {

// The full estimator: robust initialization, penalized descent on the Stiefel
// manifold with per-iteration scale (and LTS subset) refresh, loading
// thresholding from the tail of the convergence trace, scores, and robust
// component variances.

enum class InitTransform { RankTransform, Wrapping };
enum class Centering { Median, None };

struct FitConfig {
  int k = 2;
  LossSpec loss;
  PenaltySpec penalty;  // empty lambdas means no penalty (zeros)
  InitTransform init = InitTransform::RankTransform;
  OptimizerConfig optimizer;
  int threshold_window = 10;  // window M for the loading threshold
  Centering center = Centering::Median;
  bool apply_threshold = true;
  WrapParams wrap;
};

struct FitResult {
  Eigen::MatrixXd loadings;        // p x k, thresholded, variance-ordered
  Eigen::MatrixXd scores;          // n x k, equals centered data times loadings
  Eigen::VectorXd eigenvalues;     // Qn^2 of each score column, nonincreasing
  Eigen::VectorXd residual_scales; // final per-column residual scales
  Eigen::VectorXd center_offsets;  // subtracted from each row
  double threshold = 0.0;
  double pre_threshold_orth_residual = 0.0;
  ConvergenceTrace trace;
};

inline Eigen::VectorXd uniform_lambdas(int k, double lambda) {
  return Eigen::VectorXd::Constant(k, lambda);
}

// first k right-singular vectors of the robustified data
inline Eigen::MatrixXd initialize(const Eigen::MatrixXd& Xc, const FitConfig& cfg) {
  if (cfg.k < 1 || cfg.k > std::min(Xc.rows(), Xc.cols()))
    throw std::invalid_argument("initialize: k outside [1, min(n,p)]");
  const Eigen::MatrixXd Y = cfg.init == InitTransform::RankTransform
                                ? rank_transform(Xc)
                                : wrap_transform(Xc, cfg.wrap);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Y, Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("initialize: SVD failed");
  return svd.matrixV().leftCols(cfg.k);
}

// columnwise median absolute residual of X - XVV', floored at
// 1e-12 * (columnwise MAD of X + 1) so downstream divisions stay finite
inline Eigen::VectorXd estimate_residual_scales(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V) {
  const Eigen::MatrixXd R = X - (X * V) * V.transpose();
  Eigen::VectorXd s(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double floor_j = 1e-12 * (mad(to_vector(X.col(j))) + 1.0);
    s(j) = std::max(median(to_vector(R.col(j).array().abs().matrix())), floor_j);
  }
  return s;
}

// threshold = mean + 2 sd over the last M relative parameter changes
// (sample sd, denominator M-1); shorter traces use every recorded value
inline double compute_threshold(const std::vector<double>& d_values, int window) {
  if (window < 1) throw std::invalid_argument("compute_threshold: window must be positive");
  if (d_values.empty()) return 0.0;
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), d_values.size());
  const auto first = d_values.end() - static_cast<std::ptrdiff_t>(w);
  const double mean = std::accumulate(first, d_values.end(), 0.0) / static_cast<double>(w);
  double var = 0.0;
  if (w > 1) {
    for (auto it = first; it != d_values.end(); ++it) var += (*it - mean) * (*it - mean);
    var /= static_cast<double>(w - 1);
  }
  return mean + 2.0 * std::sqrt(var);
}

namespace detail {

inline void order_and_sign_components(Eigen::MatrixXd& V, Eigen::MatrixXd& Z, Eigen::VectorXd& a) {
  const Eigen::Index k = V.cols();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x) > a(y); });
  Eigen::MatrixXd Vs(V.rows(), k);
  Eigen::MatrixXd Zs(Z.rows(), k);
  Eigen::VectorXd as(k);
  for (Eigen::Index l = 0; l < k; ++l) {
    const Eigen::Index src = perm[static_cast<std::size_t>(l)];
    Vs.col(l) = V.col(src);
    Zs.col(l) = Z.col(src);
    as(l) = a(src);
    Eigen::Index jmax = 0;
    Vs.col(l).cwiseAbs().maxCoeff(&jmax);
    if (Vs(jmax, l) < 0.0) {  // largest-magnitude entry made positive
      Vs.col(l) = -Vs.col(l);
      Zs.col(l) = -Zs.col(l);
    }
  }
  V = Vs;
  Z = Zs;
  a = as;
}

}  // namespace detail

inline FitResult fit(const Eigen::MatrixXd& X, const FitConfig& cfg) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (!X.allFinite()) throw std::invalid_argument("fit: nonfinite data");
  if (cfg.k < 1) throw std::invalid_argument("fit: k must be positive");
  if (cfg.k >= p) throw std::invalid_argument("fit: k must be less than the column count");
  if (n <= cfg.k) throw std::invalid_argument("fit: need more rows than components");
  if (cfg.threshold_window < 2) throw std::invalid_argument("fit: threshold window must be at least 2");

  PenaltySpec pen = cfg.penalty;
  if (pen.lambdas.size() == 0) pen.lambdas = Eigen::VectorXd::Zero(cfg.k);
  if (pen.lambdas.size() != cfg.k) throw std::invalid_argument("fit: one lambda per component required");

  FitResult out;
  out.center_offsets = Eigen::VectorXd::Zero(p);
  if (cfg.center == Centering::Median)
    for (Eigen::Index j = 0; j < p; ++j) out.center_offsets(j) = median(to_vector(X.col(j)));
  const Eigen::MatrixXd Xc = X.rowwise() - out.center_offsets.transpose();

  const Eigen::MatrixXd V0 = initialize(Xc, cfg);

  Eigen::VectorXd sigmas = Eigen::VectorXd::Ones(p);
  HSubsets H;
  const bool lts = cfg.loss.family == LossFamily::LTS;
  IterationHooks hooks;
  hooks.before_gradient = [&](const Eigen::MatrixXd& V, int) {
    sigmas = estimate_residual_scales(Xc, V);
    if (lts) H = update_h_subsets(Xc, V, sigmas, cfg.loss.h_fraction);
  };
  const HSubsets* Hp = lts ? &H : nullptr;
  auto objective_fn = [&](const Eigen::MatrixXd& V) {
    return objective(Xc, V, sigmas, cfg.loss, pen, Hp);
  };

  std::pair<Eigen::MatrixXd, ConvergenceTrace> opt;
  if (cfg.optimizer.batch_size > 0 && cfg.optimizer.batch_size < n) {
    auto grad_rows = [&](const Eigen::MatrixXd& V, int, const std::vector<int>& rows) {
      return objective_gradient(Xc, V, sigmas, cfg.loss, pen, Hp, &rows);
    };
    opt = minibatch_minimize(objective_fn, grad_rows, static_cast<int>(n), V0, cfg.optimizer, hooks);
  } else {
    auto grad = [&](const Eigen::MatrixXd& V, int) {
      return objective_gradient(Xc, V, sigmas, cfg.loss, pen, Hp);
    };
    opt = minimize(objective_fn, grad, V0, cfg.optimizer, hooks);
  }

  out.trace = opt.second;
  out.pre_threshold_orth_residual = orth_residual(opt.first);
  out.residual_scales = sigmas;  // refreshed at the final iterate by the hook

  out.loadings = opt.first;
  out.threshold = cfg.apply_threshold ? compute_threshold(out.trace.param_changes, cfg.threshold_window) : 0.0;
  if (out.threshold > 0.0)
    out.loadings = (out.loadings.array().abs() > out.threshold).select(out.loadings, 0.0);

  out.scores = Xc * out.loadings;
  out.eigenvalues.resize(cfg.k);
  for (int l = 0; l < cfg.k; ++l) {
    const double q = qn_scale(to_vector(out.scores.col(l)));
    out.eigenvalues(l) = q * q;
  }
  detail::order_and_sign_components(out.loadings, out.scores, out.eigenvalues);
  return out;
}

inline Eigen::MatrixXd transform(const FitResult& result, const Eigen::MatrixXd& Xnew) {
  if (Xnew.cols() != result.loadings.rows())
    throw std::invalid_argument("transform: column count mismatch");
  return (Xnew.rowwise() - result.center_offsets.transpose()) * result.loadings;
}

inline Eigen::MatrixXd reconstruct(const FitResult& result, const Eigen::MatrixXd& scores) {
  if (scores.cols() != result.loadings.cols())
    throw std::invalid_argument("reconstruct: score column count mismatch");
  return (scores * result.loadings.transpose()).rowwise() + result.center_offsets.transpose();
}

}  // namespace scramble
