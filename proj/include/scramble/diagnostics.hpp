#pragma once

#include <Eigen/Dense>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scramble/robust_stats.hpp"
#include "scramble/scramble.hpp"

namespace scramble {

// Outlier diagnostics: score distances inside the fitted subspace, orthogonal
// distances to it, quantile cutoffs, quadrant flags, and the robustly
// standardized residual-cell map.

enum class OutlierFlag { Regular, GoodLeverage, OrthogonalOutlier, BadLeverage };

inline std::string to_string(OutlierFlag f) {
  switch (f) {
    case OutlierFlag::Regular: return "regular";
    case OutlierFlag::GoodLeverage: return "good_leverage";
    case OutlierFlag::OrthogonalOutlier: return "orthogonal_outlier";
    case OutlierFlag::BadLeverage: return "bad_leverage";
  }
  return "regular";
}

// SD_i = sqrt(sum_l z_il^2 / a_l), the Mahalanobis-type distance with the
// robust component variances
inline Eigen::VectorXd score_distances(const FitResult& result, const Eigen::MatrixXd& X) {
  if ((result.eigenvalues.array() <= 0.0).any())
    throw std::invalid_argument("score_distances: degenerate component");
  const Eigen::MatrixXd Z = transform(result, X);
  Eigen::VectorXd sd(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index l = 0; l < Z.cols(); ++l) acc += Z(i, l) * Z(i, l) / result.eigenvalues(l);
    sd(i) = std::sqrt(acc);
  }
  return sd;
}

// OD_i = ||x_c - V V' x_c|| with the thresholded loadings used as-is
inline Eigen::VectorXd orthogonal_distances(const FitResult& result, const Eigen::MatrixXd& X) {
  if (X.cols() != result.loadings.rows())
    throw std::invalid_argument("orthogonal_distances: column count mismatch");
  const Eigen::MatrixXd Xc = X.rowwise() - result.center_offsets.transpose();
  const Eigen::MatrixXd R = Xc - (Xc * result.loadings) * result.loadings.transpose();
  return R.rowwise().norm();
}

// sd cutoff: sqrt of the chi-square quantile with k degrees of freedom;
// od cutoff: Wilson-Hilferty — normal quantile on the 2/3 power scale with
// median location and consistency-scaled MAD spread
inline std::pair<double, double> cutoffs(const FitResult& result, const Eigen::MatrixXd& X,
                                         double quantile = 0.975) {
  if (quantile <= 0.0 || quantile >= 1.0)
    throw std::invalid_argument("cutoffs: quantile outside (0,1)");
  const int k = static_cast<int>(result.loadings.cols());
  const boost::math::chi_squared chi2(k);
  const double sd_cutoff = std::sqrt(boost::math::quantile(chi2, quantile));

  const Eigen::VectorXd od = orthogonal_distances(result, X);
  std::vector<double> t(static_cast<std::size_t>(od.size()));
  for (Eigen::Index i = 0; i < od.size(); ++i)
    t[static_cast<std::size_t>(i)] = std::pow(od(i), 2.0 / 3.0);
  const double m = median(t);
  const double s = 1.4826 * mad(t);
  const boost::math::normal gauss;
  const double z = boost::math::quantile(gauss, quantile);
  const double base = std::max(0.0, m + s * z);
  return {sd_cutoff, std::pow(base, 1.5)};
}

inline std::vector<OutlierFlag> classify(const Eigen::VectorXd& sd, const Eigen::VectorXd& od,
                                         double sd_cutoff, double od_cutoff) {
  if (sd.size() != od.size()) throw std::invalid_argument("classify: length mismatch");
  std::vector<OutlierFlag> flags(static_cast<std::size_t>(sd.size()));
  for (Eigen::Index i = 0; i < sd.size(); ++i) {
    const bool big_sd = sd(i) > sd_cutoff;
    const bool big_od = od(i) > od_cutoff;
    flags[static_cast<std::size_t>(i)] =
        big_sd ? (big_od ? OutlierFlag::BadLeverage : OutlierFlag::GoodLeverage)
               : (big_od ? OutlierFlag::OrthogonalOutlier : OutlierFlag::Regular);
  }
  return flags;
}

// residuals standardized by the pooled median and 1.4826-scaled MAD of the
// whole residual matrix
inline Eigen::MatrixXd residual_cell_map(const FitResult& result, const Eigen::MatrixXd& X) {
  if (X.cols() != result.loadings.rows())
    throw std::invalid_argument("residual_cell_map: column count mismatch");
  const Eigen::MatrixXd Xc = X.rowwise() - result.center_offsets.transpose();
  const Eigen::MatrixXd R = Xc - (Xc * result.loadings) * result.loadings.transpose();
  std::vector<double> cells(static_cast<std::size_t>(R.size()));
  for (Eigen::Index idx = 0; idx < R.size(); ++idx)
    cells[static_cast<std::size_t>(idx)] = R(idx / R.cols(), idx % R.cols());
  const double m = median(cells);
  const double s = 1.4826 * mad(cells);
  if (s == 0.0) throw std::invalid_argument("residual_cell_map: degenerate residuals");
  return (R.array() - m) / s;
}

struct DiagnosticsReport {
  Eigen::VectorXd sd;
  Eigen::VectorXd od;
  double sd_cutoff = 0.0;
  double od_cutoff = 0.0;
  std::vector<OutlierFlag> flags;
};

inline DiagnosticsReport diagnose(const FitResult& result, const Eigen::MatrixXd& X,
                                  double quantile = 0.975) {
  DiagnosticsReport rep;
  rep.sd = score_distances(result, X);
  rep.od = orthogonal_distances(result, X);
  const auto [sdc, odc] = cutoffs(result, X, quantile);
  rep.sd_cutoff = sdc;
  rep.od_cutoff = odc;
  rep.flags = classify(rep.sd, rep.od, sdc, odc);
  return rep;
}

}  // namespace scramble
