#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace scramble {

// Robust univariate estimators (median, MAD, Qn) and the two robustifying
// columnwise transforms (rank, wrapping) used to initialize the estimator.

using ScaleEstimate = double;

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("empty sample");
  const std::size_t n = xs.size();
  const std::size_t mid = n / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  double hi = xs[mid];
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline std::vector<double> to_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline double median(const Eigen::Ref<const Eigen::VectorXd>& v) { return median(to_vector(v)); }

// median absolute deviation, unscaled
inline double mad(const std::vector<double>& xs) {
  const double m = median(xs);
  std::vector<double> dev(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) dev[i] = std::abs(xs[i] - m);
  return median(std::move(dev));
}

inline double mad(const Eigen::Ref<const Eigen::VectorXd>& v) { return mad(to_vector(v)); }

namespace detail {

// finite-sample correction for Qn: published small-sample factors up to
// n = 9, asymptotic n/(n + c) beyond
inline double qn_correction(std::size_t n) {
  static const double small[10] = {0.0, 0.0, 0.399, 0.994, 0.512, 0.844, 0.611, 0.857, 0.669, 0.872};
  if (n <= 9) return small[n];
  const double dn = static_cast<double>(n);
  return (n % 2 == 1) ? dn / (dn + 1.4) : dn / (dn + 3.8);
}

// k-th smallest (1-based) of all pairwise differences x_j - x_i (i < j) of a
// sorted sample, by materializing the pairs
inline double kth_pairwise_diff_naive(const std::vector<double>& sorted, std::uint64_t k) {
  const std::size_t n = sorted.size();
  std::vector<double> diffs;
  diffs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) diffs.push_back(sorted[j] - sorted[i]);
  std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(k - 1), diffs.end());
  return diffs[k - 1];
}

// number of pairs i < j with x_j - x_i <= t, two-pointer over the sorted sample
inline std::uint64_t count_pairs_within(const std::vector<double>& sorted, double t) {
  std::uint64_t count = 0;
  std::size_t i = 0;
  for (std::size_t j = 1; j < sorted.size(); ++j) {
    while (sorted[j] - sorted[i] > t) ++i;
    count += j - i;
  }
  return count;
}

// same order statistic without materializing the pairs: bisect on the value,
// then pick the smallest pairwise difference above the final bracket, which
// is exact because the bracket contains no other candidate below the k-th
inline double kth_pairwise_diff_select(const std::vector<double>& sorted, std::uint64_t k) {
  const std::size_t n = sorted.size();
  double lo = 0.0, hi = sorted[n - 1] - sorted[0];
  if (count_pairs_within(sorted, lo) >= k) return 0.0;
  for (int iter = 0; iter < 200 && lo < hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (count_pairs_within(sorted, mid) >= k) hi = mid;
    else lo = mid;
  }
  double best = hi;
  for (std::size_t i = 0, j = 1; i + 1 < n; ++i) {
    if (j <= i) j = i + 1;
    while (j < n && sorted[j] - sorted[i] <= lo) ++j;
    if (j < n) best = std::min(best, sorted[j] - sorted[i]);
  }
  return best;
}

}  // namespace detail

// Qn scale: d * {|x_i - x_j| : i < j}_(k) with k = C(h,2), h = floor(n/2)+1,
// d = 2.2219, times the finite-sample correction
inline ScaleEstimate qn_scale(std::vector<double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("sample too small");
  std::sort(xs.begin(), xs.end());
  const std::uint64_t h = n / 2 + 1;
  const std::uint64_t k = h * (h - 1) / 2;
  const double raw = (n <= 600) ? detail::kth_pairwise_diff_naive(xs, k)
                                : detail::kth_pairwise_diff_select(xs, k);
  return 2.2219 * detail::qn_correction(n) * raw;
}

inline ScaleEstimate qn_scale(const Eigen::Ref<const Eigen::VectorXd>& v) { return qn_scale(to_vector(v)); }

// 1-based ranks with ties assigned their average rank
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

// columnwise y_ij = (rank_i - 0.5)/n * c_j + t_j with t_j = median, c_j = Qn;
// a zero-scale column collapses to its location
inline Eigen::MatrixXd rank_transform(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (n < 1) throw std::invalid_argument("rank_transform: empty matrix");
  Eigen::MatrixXd Y(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const std::vector<double> col = to_vector(X.col(j));
    const double t = median(col);
    const double c = (n >= 2) ? qn_scale(col) : 0.0;
    if (c == 0.0) {
      Y.col(j).setConstant(t);
      continue;
    }
    const std::vector<double> ranks = average_ranks(col);
    for (Eigen::Index i = 0; i < n; ++i)
      Y(i, j) = (ranks[static_cast<std::size_t>(i)] - 0.5) / static_cast<double>(n) * c + t;
  }
  return Y;
}

struct WrapParams {
  double b = 1.5;
  double c = 4.0;
  double q1 = 1.5407929040915893;
  double q2 = 0.86227308742907976;
};

// psi_{b,c}: identity on [0,b], q1*tanh(q2*(c-|z|))*sign(z) on [b,c], 0 beyond
inline double wrap_psi(double z, const WrapParams& w) {
  const double az = std::abs(z);
  if (az <= w.b) return z;
  if (az >= w.c) return 0.0;
  const double s = (z < 0.0) ? -1.0 : 1.0;
  return s * w.q1 * std::tanh(w.q2 * (w.c - az));
}

namespace detail {

inline double normal_pdf(double z) { return 0.3989422804014326779 * std::exp(-0.5 * z * z); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

// E[psi^2] and E[psi'] of the wrapped standard normal, by 64-node
// Gauss-Legendre quadrature over the tanh segment [b, c]
struct WrapMoments {
  double a;  // E[psi^2]
  double b;  // E[psi']
};

inline WrapMoments wrap_moments(double b, double c, double q1, double q2) {
  static const int m = 64;
  static thread_local std::vector<double> nodes, weights;
  if (nodes.empty()) {
    // Newton iteration on Legendre polynomials for the standard [-1,1] rule
    nodes.resize(m);
    weights.resize(m);
    for (int i = 0; i < m; ++i) {
      double x = std::cos(3.14159265358979323846 * (i + 0.75) / (m + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= m; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        pp = m * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / pp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
  }
  const double mid = 0.5 * (b + c), half = 0.5 * (c - b);
  double i2 = 0.0, i1 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double z = mid + half * nodes[i];
    const double th = std::tanh(q2 * (c - z));
    const double phi = normal_pdf(z);
    i2 += weights[i] * q1 * q1 * th * th * phi;
    i1 += weights[i] * q1 * q2 * (1.0 - th * th) * phi;
  }
  i2 *= half;
  i1 *= half;
  const double head2 = normal_cdf(b) - b * normal_pdf(b) - 0.5;  // int_0^b z^2 phi
  const double head1 = normal_cdf(b) - 0.5;                      // int_0^b phi
  return {2.0 * (head2 + i2), 2.0 * (head1 - i1)};
}

}  // namespace detail

// Solve for (q1, q2) given 0 < b < c. Value continuity at b pins
// q1 = b / tanh(q2 (c-b)); the remaining scalar equation is the
// tanh-estimator consistency relation 2 E[psi^2] q2 = q1 E[psi'],
// found by bisection in q2.
inline WrapParams solve_wrap_constants(double b, double c) {
  if (!(0.0 < b && b < c)) throw std::invalid_argument("wrap constants require 0 < b < c");
  const auto residual = [&](double q2) {
    const double q1 = b / std::tanh(q2 * (c - b));
    const auto m = detail::wrap_moments(b, c, q1, q2);
    return 2.0 * m.a * q2 - q1 * m.b;
  };
  double lo = 1e-4, hi = 1e-4;
  double flo = residual(lo);
  bool bracketed = false;
  for (int i = 0; i < 120; ++i) {
    hi *= 1.35;
    const double fhi = residual(hi);
    if ((flo < 0.0) != (fhi < 0.0)) {
      bracketed = true;
      break;
    }
    lo = hi;
    flo = fhi;
  }
  if (!bracketed) throw std::runtime_error("wrap constants not solvable");
  for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((residual(mid) < 0.0) == (flo < 0.0)) lo = mid;
    else hi = mid;
  }
  const double q2 = 0.5 * (lo + hi);
  return WrapParams{b, c, b / std::tanh(q2 * (c - b)), q2};
}

// columnwise y_ij = psi((x_ij - t_j)/c_j) * c_j + t_j; zero-scale columns
// collapse to their location
inline Eigen::MatrixXd wrap_transform(const Eigen::MatrixXd& X, const WrapParams& w = WrapParams{}) {
  if (std::abs(w.q1 * std::tanh(w.q2 * (w.c - w.b)) - w.b) > 1e-8)
    throw std::invalid_argument("wrap params violate continuity at b");
  const Eigen::Index n = X.rows(), p = X.cols();
  if (n < 1) throw std::invalid_argument("wrap_transform: empty matrix");
  Eigen::MatrixXd Y(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const std::vector<double> col = to_vector(X.col(j));
    const double t = median(col);
    const double c = (n >= 2) ? qn_scale(col) : 0.0;
    if (c == 0.0) {
      Y.col(j).setConstant(t);
      continue;
    }
    for (Eigen::Index i = 0; i < n; ++i) Y(i, j) = wrap_psi((X(i, j) - t) / c, w) * c + t;
  }
  return Y;
}

}  // namespace scramble
