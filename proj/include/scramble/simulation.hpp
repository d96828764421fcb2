#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "scramble/rng.hpp"
#include "scramble/robust_stats.hpp"
#include "scramble/scramble.hpp"
#include "scramble/tuning.hpp"

namespace scramble {

// Synthetic benchmark: two dimensional settings with block-correlated
// covariance, casewise and structured cellwise contamination, subspace and
// sparsity-recovery metrics, and a replicated study runner.

enum class SimSetting { LowDim, HighDim };
enum class Contamination { None, Casewise, CellwiseStructured };

struct SimScenario {
  SimSetting setting = SimSetting::LowDim;
  Contamination contamination = Contamination::None;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double gamma_cell = 100.0;
};

inline int setting_n(SimSetting s) { return s == SimSetting::LowDim ? 50 : 100; }
inline int setting_p(SimSetting s) { return s == SimSetting::LowDim ? 10 : 500; }
inline int setting_block(SimSetting s) { return s == SimSetting::LowDim ? 4 : 20; }

inline std::string to_string(SimSetting s) { return s == SimSetting::LowDim ? "lowdim" : "highdim"; }

inline std::string to_string(Contamination c) {
  switch (c) {
    case Contamination::None: return "clean";
    case Contamination::Casewise: return "casewise";
    case Contamination::CellwiseStructured: return "cellwise";
  }
  return "clean";
}

inline std::string scenario_name(const SimScenario& sc) {
  return to_string(sc.setting) + "-" + to_string(sc.contamination);
}

// ground-truth sparse loadings: two disjoint blocks, unit-norm columns
inline Eigen::MatrixXd true_loadings(SimSetting s) {
  const int p = setting_p(s), b = setting_block(s);
  const double v = 1.0 / std::sqrt(static_cast<double>(b));
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(p, 2);
  for (int j = 0; j < b; ++j) V(j, 0) = v;
  for (int j = b; j < 2 * b; ++j) V(j, 1) = v;
  return V;
}

// covariance C^{1/2} A C^{1/2}: correlation blocks of 0.9 and 0.7 with an
// identity remainder, variances (100, 25, 4) per block group
inline Eigen::MatrixXd build_sigma(SimSetting s) {
  const int p = setting_p(s), b = setting_block(s);
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(p, p);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j)
      if (i != j) A(i, j) = 0.9;
  for (int i = b; i < 2 * b; ++i)
    for (int j = b; j < 2 * b; ++j)
      if (i != j) A(i, j) = 0.7;
  Eigen::VectorXd chalf(p);
  for (int j = 0; j < p; ++j) chalf(j) = j < b ? 10.0 : (j < 2 * b ? 5.0 : 2.0);
  return chalf.asDiagonal() * A * chalf.asDiagonal();
}

inline Eigen::MatrixXd generate_clean(const SimScenario& sc) {
  const int n = setting_n(sc.setting), p = setting_p(sc.setting);
  const Eigen::MatrixXd Sigma = build_sigma(sc.setting);
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success) throw std::runtime_error("generate_clean: covariance not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  std::mt19937_64 gen(sc.seed);
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd z(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(j) = standard_normal(gen);
    X.row(i) = (L * z).transpose();
  }
  return X;
}

// the shifted mean of replaced rows: ten stated leading entries, then the
// final four-entry pattern repeated to length p
inline Eigen::VectorXd casewise_mean(int p) {
  const double head[10] = {2, 4, 2, 4, 0, -1, 1, 0, 1, -1};
  const double tail[4] = {1, 0, 1, -1};
  Eigen::VectorXd mu(p);
  for (int j = 0; j < p; ++j) mu(j) = j < 10 ? head[j] : tail[(j - 10) % 4];
  return mu;
}

inline std::pair<Eigen::MatrixXd, std::vector<int>> contaminate_casewise(const Eigen::MatrixXd& X,
                                                                         double epsilon,
                                                                         std::uint64_t seed) {
  if (epsilon < 0.0 || epsilon > 0.5) throw std::invalid_argument("contaminate_casewise: epsilon outside [0, 0.5]");
  const int n = static_cast<int>(X.rows()), p = static_cast<int>(X.cols());
  const int m = static_cast<int>(std::floor(epsilon * static_cast<double>(n)));
  Eigen::MatrixXd Y = X;
  std::vector<int> rows;
  if (m == 0) return {std::move(Y), std::move(rows)};
  std::mt19937_64 gen(seed);
  rows = sample_without_replacement(n, m, gen);
  const Eigen::VectorXd mu = casewise_mean(p);
  for (int r : rows)
    for (int j = 0; j < p; ++j) Y(r, j) = mu(j) + standard_normal(gen);
  std::sort(rows.begin(), rows.end());
  return {std::move(Y), std::move(rows)};
}

// structured cellwise contamination: floor(eps*n*p) cells spread over rows
// with near-equal quotas; each affected row gets the smallest-eigenvalue
// eigenvector of the covariance submatrix on its affected columns, scaled by
// gamma_cell * sqrt(#cells in the row)
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> contaminate_cellwise(const Eigen::MatrixXd& X,
                                                                        double epsilon,
                                                                        const Eigen::MatrixXd& Sigma,
                                                                        double gamma_cell,
                                                                        std::uint64_t seed) {
  if (epsilon < 0.0 || epsilon > 0.5) throw std::invalid_argument("contaminate_cellwise: epsilon outside [0, 0.5]");
  const int n = static_cast<int>(X.rows()), p = static_cast<int>(X.cols());
  if (Sigma.rows() != p || Sigma.cols() != p) throw std::invalid_argument("contaminate_cellwise: covariance shape mismatch");
  Eigen::MatrixXd Y = X;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, p);
  const long total = static_cast<long>(std::floor(epsilon * static_cast<double>(n) * static_cast<double>(p)));
  if (total == 0) return {std::move(Y), std::move(mask)};

  std::mt19937_64 gen(seed);
  std::vector<int> row_order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) row_order[static_cast<std::size_t>(i)] = i;
  shuffle(row_order, gen);
  const long base = total / n;
  const long rem = total % n;

  for (int idx = 0; idx < n; ++idx) {
    const long quota = base + (idx < rem ? 1 : 0);
    if (quota == 0) continue;
    if (quota > p) throw std::runtime_error("contaminate_cellwise: per-row quota exceeds column count");
    const int r = row_order[static_cast<std::size_t>(idx)];
    std::vector<int> cols = sample_without_replacement(p, static_cast<int>(quota), gen);
    std::sort(cols.begin(), cols.end());
    const int kr = static_cast<int>(cols.size());
    Eigen::MatrixXd sub(kr, kr);
    for (int a = 0; a < kr; ++a)
      for (int b = 0; b < kr; ++b) sub(a, b) = Sigma(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
    if (es.info() != Eigen::Success) throw std::runtime_error("contaminate_cellwise: eigen decomposition failed");
    Eigen::VectorXd w = es.eigenvectors().col(0);  // smallest eigenvalue first
    Eigen::Index jmax = 0;
    w.cwiseAbs().maxCoeff(&jmax);
    if (w(jmax) < 0.0) w = -w;  // deterministic sign
    const double scale = gamma_cell * std::sqrt(static_cast<double>(kr));
    for (int t = 0; t < kr; ++t) {
      Y(r, cols[static_cast<std::size_t>(t)]) = scale * w(t);
      mask(r, cols[static_cast<std::size_t>(t)]) = 1.0;
    }
  }
  return {std::move(Y), std::move(mask)};
}

namespace detail {

inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& M) {
  if (M.size() == 0 || M.norm() == 0.0) return Eigen::MatrixXd(M.rows(), 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU);
  const Eigen::VectorXd sv = svd.singularValues();
  const double tol = sv(0) * 1e-12 * static_cast<double>(std::max(M.rows(), M.cols()));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++r;
  return svd.matrixU().leftCols(r);
}

}  // namespace detail

// largest canonical angle between the spans, scaled to [0,1]:
// asin(sigma_max((I - VV')Vhat)) / (pi/2), both inputs orthonormalized first
inline double principal_angle(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Vhat) {
  if (V.rows() != Vhat.rows()) throw std::invalid_argument("principal_angle: row count mismatch");
  const Eigen::MatrixXd Q = detail::orthonormal_basis(V);
  const Eigen::MatrixXd Qh = detail::orthonormal_basis(Vhat);
  if (Qh.cols() == 0) return Q.cols() == 0 ? 0.0 : 1.0;
  const Eigen::MatrixXd Rm = Qh - Q * (Q.transpose() * Qh);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Rm);
  const double smax = std::min(1.0, svd.singularValues()(0));
  const double half_pi = std::asin(1.0);
  return std::asin(smax) / half_pi;
}

struct SparsityRates {
  double tpr = 1.0;
  double tnr = 1.0;
  bool tpr_defined = true;  // false when the truth has no nonzero entries
  bool tnr_defined = true;  // false when the truth has no zero entries
};

inline SparsityRates sparsity_rates(const Eigen::MatrixXd& V_true, const Eigen::MatrixXd& V_hat) {
  if (V_true.rows() != V_hat.rows() || V_true.cols() != V_hat.cols())
    throw std::invalid_argument("sparsity_rates: shape mismatch");
  long pos = 0, neg = 0, tp = 0, tn = 0;
  for (Eigen::Index j = 0; j < V_true.size(); ++j) {
    const bool t = V_true(j) != 0.0;
    const bool h = V_hat(j) != 0.0;
    if (t) {
      ++pos;
      if (h) ++tp;
    } else {
      ++neg;
      if (!h) ++tn;
    }
  }
  SparsityRates out;
  if (pos > 0) out.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  else out.tpr_defined = false;
  if (neg > 0) out.tnr = static_cast<double>(tn) / static_cast<double>(neg);
  else out.tnr_defined = false;
  return out;
}

struct MethodSpec {
  std::string name;  // "svd" or "<loss>-<init>"
  bool svd_baseline = false;
  LossFamily loss = LossFamily::Huber;
  InitTransform init = InitTransform::RankTransform;
  double lambda = 0.0;
  bool tune = false;  // pick lambda per replicate by Bayesian optimization
  BayesOptConfig bo;
};

inline std::string loss_name(LossFamily f) {
  switch (f) {
    case LossFamily::Square: return "square";
    case LossFamily::Huber: return "huber";
    case LossFamily::PseudoHuber: return "pseudohuber";
    case LossFamily::Tukey: return "tukey";
    case LossFamily::LTS: return "lts";
  }
  return "huber";
}

inline std::string init_name(InitTransform t) {
  return t == InitTransform::RankTransform ? "rank" : "wrap";
}

inline std::vector<MethodSpec> default_methods(double lambda = 0.0) {
  std::vector<MethodSpec> out;
  MethodSpec svd;
  svd.name = "svd";
  svd.svd_baseline = true;
  out.push_back(svd);
  for (LossFamily f : {LossFamily::Huber, LossFamily::Tukey, LossFamily::LTS})
    for (InitTransform t : {InitTransform::RankTransform, InitTransform::Wrapping}) {
      MethodSpec m;
      m.loss = f;
      m.init = t;
      m.lambda = lambda;
      m.name = loss_name(f) + "-" + init_name(t);
      out.push_back(m);
    }
  return out;
}

struct StudyRow {
  std::string scenario;
  std::string method;
  std::string loss;
  std::string init;
  double epsilon = 0.0;
  int replicate = 0;
  double angle = std::numeric_limits<double>::quiet_NaN();
  double tpr = std::numeric_limits<double>::quiet_NaN();
  double tnr = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct StudyConfig {
  int replicates = 20;
  std::uint64_t master_seed = 0;
  int jobs = 1;
  int k = 2;
  double alpha = 0.5;
  int threshold_window = 10;
  OptimizerConfig optimizer;
};

// classical baseline: right-singular vectors of the median-centered data
inline Eigen::MatrixXd svd_loadings(const Eigen::MatrixXd& X, int k) {
  Eigen::VectorXd offsets(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) offsets(j) = median(to_vector(X.col(j)));
  const Eigen::MatrixXd Xc = X.rowwise() - offsets.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinV);
  return svd.matrixV().leftCols(k);
}

inline std::vector<StudyRow> run_study(const std::vector<SimScenario>& scenarios,
                                       const std::vector<MethodSpec>& methods,
                                       const StudyConfig& study) {
  if (study.replicates < 1) throw std::invalid_argument("run_study: replicates must be positive");
  if (scenarios.empty() || methods.empty()) throw std::invalid_argument("run_study: nothing to run");

  struct Task {
    int scenario_idx;
    int replicate;
  };
  std::vector<Task> tasks;
  for (int si = 0; si < static_cast<int>(scenarios.size()); ++si)
    for (int rep = 0; rep < study.replicates; ++rep) tasks.push_back({si, rep});

  std::vector<StudyRow> rows(tasks.size() * methods.size());

  const auto run_task = [&](const Task& task) {
    const SimScenario& base = scenarios[static_cast<std::size_t>(task.scenario_idx)];
    const std::uint64_t rep_seed = mix_seed(study.master_seed,
                                            static_cast<std::uint64_t>(task.scenario_idx),
                                            static_cast<std::uint64_t>(task.replicate));
    SimScenario sc = base;
    sc.seed = rep_seed;
    const Eigen::MatrixXd Vtrue = true_loadings(sc.setting);

    Eigen::MatrixXd X = generate_clean(sc);
    if (sc.contamination == Contamination::Casewise) {
      X = contaminate_casewise(X, sc.epsilon, mix_seed(rep_seed, 1)).first;
    } else if (sc.contamination == Contamination::CellwiseStructured) {
      X = contaminate_cellwise(X, sc.epsilon, build_sigma(sc.setting), sc.gamma_cell,
                               mix_seed(rep_seed, 2)).first;
    }

    for (int mi = 0; mi < static_cast<int>(methods.size()); ++mi) {
      const MethodSpec& m = methods[static_cast<std::size_t>(mi)];
      StudyRow row;
      row.scenario = scenario_name(base);
      row.method = m.name;
      row.loss = m.svd_baseline ? "none" : loss_name(m.loss);
      row.init = m.svd_baseline ? "none" : init_name(m.init);
      row.epsilon = base.epsilon;
      row.replicate = task.replicate;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        Eigen::MatrixXd Vhat;
        if (m.svd_baseline) {
          Vhat = svd_loadings(X, study.k);
        } else {
          FitConfig cfg;
          cfg.k = study.k;
          cfg.loss.family = m.loss;
          cfg.init = m.init;
          cfg.penalty.alpha = study.alpha;
          cfg.threshold_window = study.threshold_window;
          cfg.optimizer = study.optimizer;
          cfg.optimizer.seed = mix_seed(rep_seed, 100 + static_cast<std::uint64_t>(mi));
          if (m.tune) {
            BayesOptConfig bo = m.bo;
            bo.seed = mix_seed(rep_seed, 200 + static_cast<std::uint64_t>(mi));
            Vhat = bayes_opt_tune(X, cfg, bo).best_fit.loadings;
          } else {
            cfg.penalty.lambdas = uniform_lambdas(cfg.k, m.lambda);
            Vhat = fit(X, cfg).loadings;
          }
        }
        row.angle = principal_angle(Vtrue, Vhat);
        const SparsityRates sr = sparsity_rates(Vtrue, Vhat);
        row.tpr = sr.tpr;
        row.tnr = sr.tnr;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const std::size_t task_idx =
          static_cast<std::size_t>(task.scenario_idx) * static_cast<std::size_t>(study.replicates) +
          static_cast<std::size_t>(task.replicate);
      rows[task_idx * methods.size() + static_cast<std::size_t>(mi)] = std::move(row);
    }
  };

  const int jobs = std::max(1, study.jobs);
  if (jobs == 1 || tasks.size() <= 1) {
    for (const Task& t : tasks) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        run_task(tasks[i]);
      }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(jobs, static_cast<int>(tasks.size()));
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  std::stable_sort(rows.begin(), rows.end(), [](const StudyRow& a, const StudyRow& b) {
    if (a.scenario != b.scenario) return a.scenario < b.scenario;
    if (a.method != b.method) return a.method < b.method;
    return a.replicate < b.replicate;
  });
  return rows;
}

}  // namespace scramble
