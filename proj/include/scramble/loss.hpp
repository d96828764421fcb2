#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace scramble {

// Loss families, the smooth sparsity penalty, and the evaluation/gradient of
// the penalized robust reconstruction objective
//
//   L(V) = 1/(np) * sum_j sigma_j^2 sum_i rho(r_ij / sigma_j)
//        + sum_l lambda_l * (alpha ||v_l||^2 + (1-alpha) sum_j smooth_l1(v_jl))
//
// with residuals R = X - X V V'. sigma and the LTS h-subsets are constants
// within one evaluation; the caller refreshes them between iterations.

enum class LossFamily { Square, Huber, PseudoHuber, Tukey, LTS };

struct LossSpec {
  LossFamily family = LossFamily::Huber;
  double b = 1.35;          // Huber / PseudoHuber constant
  double c_tukey = 1.35;    // Tukey constant
  double h_fraction = 0.5;  // LTS per-column trimming fraction, in [0.5, 1]
  double l1_smooth_c = 1000.0;
};

struct PenaltySpec {
  Eigen::VectorXd lambdas;  // one nonnegative lambda per component
  double alpha = 0.5;       // elastic-net mixing in [0, 1]
};

// per-column h-subsets kept as a 0/1 membership mask; h rows per column
struct HSubsets {
  int h = 0;
  Eigen::MatrixXd mask;  // n x p

  std::vector<int> indices(Eigen::Index j) const {
    std::vector<int> idx;
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      if (mask(i, j) != 0.0) idx.push_back(static_cast<int>(i));
    return idx;
  }
};

// rho for one standardized residual; LTS membership comes in via in_subset
inline double rho(double r, const LossSpec& spec, bool in_subset = true) {
  switch (spec.family) {
    case LossFamily::Square:
      return r * r;
    case LossFamily::Huber: {
      const double a = std::abs(r);
      return a <= spec.b ? r * r : spec.b * a;
    }
    case LossFamily::PseudoHuber: {
      // b^2 (sqrt(1+u^2) - 1) rewritten to avoid cancellation near zero
      const double u2 = (r / spec.b) * (r / spec.b);
      return spec.b * spec.b * u2 / (std::sqrt(1.0 + u2) + 1.0);
    }
    case LossFamily::Tukey: {
      const double a = std::abs(r);
      if (a >= spec.c_tukey) return 1.0;
      const double u2 = (r / spec.c_tukey) * (r / spec.c_tukey);
      return u2 * (3.0 - 3.0 * u2 + u2 * u2);
    }
    case LossFamily::LTS:
      return in_subset ? r * r : 0.0;
  }
  return 0.0;
}

// derivative of the smooth surrogate; the Huber family dispatches to the
// PseudoHuber derivative (the exact Huber kink is never differentiated)
inline double rho_prime(double r, const LossSpec& spec, bool in_subset = true) {
  switch (spec.family) {
    case LossFamily::Square:
      return 2.0 * r;
    case LossFamily::Huber:
    case LossFamily::PseudoHuber: {
      const double u = r / spec.b;
      return r / std::sqrt(1.0 + u * u);
    }
    case LossFamily::Tukey: {
      const double a = std::abs(r);
      if (a >= spec.c_tukey) return 0.0;
      const double u2 = (r / spec.c_tukey) * (r / spec.c_tukey);
      const double w = 1.0 - u2;
      return 6.0 * r / (spec.c_tukey * spec.c_tukey) * w * w;
    }
    case LossFamily::LTS:
      return in_subset ? 2.0 * r : 0.0;
  }
  return 0.0;
}

inline double smooth_l1(double v, double c) { return v * std::tanh(c * v); }

inline double smooth_l1_prime(double v, double c) {
  const double t = std::tanh(c * v);
  return t + c * v * (1.0 - t * t);
}

namespace detail {

inline void check_objective_args(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V,
                                 const Eigen::VectorXd& sigmas, const LossSpec& spec,
                                 const PenaltySpec& pen, const HSubsets* H) {
  if (V.rows() != X.cols()) throw std::invalid_argument("objective: V rows must match data columns");
  if (sigmas.size() != X.cols()) throw std::invalid_argument("objective: one sigma per column required");
  if ((sigmas.array() <= 0.0).any()) throw std::invalid_argument("objective: nonpositive sigma");
  if (pen.lambdas.size() != V.cols()) throw std::invalid_argument("objective: one lambda per component required");
  if ((pen.lambdas.array() < 0.0).any()) throw std::invalid_argument("objective: negative lambda");
  if (pen.alpha < 0.0 || pen.alpha > 1.0) throw std::invalid_argument("objective: alpha outside [0,1]");
  if (spec.family == LossFamily::LTS) {
    if (H == nullptr) throw std::invalid_argument("objective: LTS requires h-subsets");
    if (H->mask.rows() != X.rows() || H->mask.cols() != X.cols())
      throw std::invalid_argument("objective: h-subset mask shape mismatch");
  }
}

inline double penalty_value(const Eigen::MatrixXd& V, const PenaltySpec& pen, double c) {
  double total = 0.0;
  for (Eigen::Index l = 0; l < V.cols(); ++l) {
    const double lam = pen.lambdas(l);
    if (lam == 0.0) continue;
    double l1 = 0.0;
    for (Eigen::Index j = 0; j < V.rows(); ++j) l1 += smooth_l1(V(j, l), c);
    total += lam * (pen.alpha * V.col(l).squaredNorm() + (1.0 - pen.alpha) * l1);
  }
  return total;
}

}  // namespace detail

inline double objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V,
                        const Eigen::VectorXd& sigmas, const LossSpec& spec,
                        const PenaltySpec& pen, const HSubsets* H = nullptr) {
  detail::check_objective_args(X, V, sigmas, spec, pen, H);
  const Eigen::Index n = X.rows(), p = X.cols();
  const Eigen::MatrixXd R = X - (X * V) * V.transpose();
  const bool lts = spec.family == LossFamily::LTS;
  double data = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double s = sigmas(j);
    double col = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      col += rho(R(i, j) / s, spec, !lts || H->mask(i, j) != 0.0);
    data += s * s * col;
  }
  data /= static_cast<double>(n) * static_cast<double>(p);
  return data + detail::penalty_value(V, pen, spec.l1_smooth_c);
}

// Euclidean gradient of the objective with sigmas and H frozen. When `rows`
// is given, the data term is computed on that row subset and scaled by
// n/|rows|, giving an unbiased minibatch estimate; the penalty term is exact.
inline Eigen::MatrixXd objective_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V,
                                          const Eigen::VectorXd& sigmas, const LossSpec& spec,
                                          const PenaltySpec& pen, const HSubsets* H = nullptr,
                                          const std::vector<int>* rows = nullptr) {
  detail::check_objective_args(X, V, sigmas, spec, pen, H);
  const Eigen::Index n = X.rows(), p = X.cols(), k = V.cols();
  const bool lts = spec.family == LossFamily::LTS;

  Eigen::MatrixXd Xb;
  Eigen::VectorXi rowmap;
  if (rows != nullptr) {
    if (rows->empty()) throw std::invalid_argument("objective_gradient: empty row subset");
    Xb.resize(static_cast<Eigen::Index>(rows->size()), p);
    rowmap.resize(static_cast<Eigen::Index>(rows->size()));
    for (std::size_t i = 0; i < rows->size(); ++i) {
      const int r = (*rows)[i];
      if (r < 0 || r >= n) throw std::invalid_argument("objective_gradient: row index out of range");
      Xb.row(static_cast<Eigen::Index>(i)) = X.row(r);
      rowmap(static_cast<Eigen::Index>(i)) = r;
    }
  }
  const Eigen::MatrixXd& Xd = (rows != nullptr) ? Xb : X;
  const Eigen::Index nb = Xd.rows();

  const Eigen::MatrixXd R = Xd - (Xd * V) * V.transpose();
  // Psi_ij = sigma_j * rho'(r_ij / sigma_j): the cellwise weight matrix of
  // dL_data/dR up to the 1/(np) factor
  Eigen::MatrixXd Psi(nb, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double s = sigmas(j);
    for (Eigen::Index i = 0; i < nb; ++i) {
      const bool in = !lts || H->mask(rows != nullptr ? rowmap(i) : i, j) != 0.0;
      Psi(i, j) = s * rho_prime(R(i, j) / s, spec, in);
    }
  }
  const double scale = (rows != nullptr) ? static_cast<double>(n) / static_cast<double>(nb) : 1.0;
  Eigen::MatrixXd G = -(scale / (static_cast<double>(n) * static_cast<double>(p))) *
                      (Xd.transpose() * (Psi * V) + Psi.transpose() * (Xd * V));

  for (Eigen::Index l = 0; l < k; ++l) {
    const double lam = pen.lambdas(l);
    if (lam == 0.0) continue;
    for (Eigen::Index j = 0; j < p; ++j)
      G(j, l) += lam * (2.0 * pen.alpha * V(j, l) +
                        (1.0 - pen.alpha) * smooth_l1_prime(V(j, l), spec.l1_smooth_c));
  }
  return G;
}

// per column, the indices of the h smallest absolute residuals (ties broken
// by lowest index); standardizing by sigma_j would not change the order
inline HSubsets update_h_subsets(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V,
                                 const Eigen::VectorXd& sigmas, double h_fraction) {
  if (V.rows() != X.cols()) throw std::invalid_argument("update_h_subsets: V rows must match data columns");
  if (h_fraction < 0.5 || h_fraction > 1.0) throw std::invalid_argument("update_h_subsets: h_fraction outside [0.5, 1]");
  (void)sigmas;
  const Eigen::Index n = X.rows(), p = X.cols();
  const int h = static_cast<int>(std::ceil(h_fraction * static_cast<double>(n)));
  const Eigen::MatrixXd R = X - (X * V) * V.transpose();
  HSubsets out;
  out.h = h;
  out.mask = Eigen::MatrixXd::Zero(n, p);
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < p; ++j) {
    std::iota(idx.begin(), idx.end(), 0);
    std::nth_element(idx.begin(), idx.begin() + (h - 1), idx.end(), [&](int a, int b) {
      const double ra = std::abs(R(a, j)), rb = std::abs(R(b, j));
      return ra < rb || (ra == rb && a < b);
    });
    for (int t = 0; t < h; ++t) out.mask(idx[static_cast<std::size_t>(t)], j) = 1.0;
  }
  return out;
}

}  // namespace scramble
