#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scramble/rng.hpp"
#include "scramble/robust_stats.hpp"
#include "scramble/scramble.hpp"

namespace scramble {

// Sparsity-parameter selection. The score is the tradeoff product
//   TPO = sum_l Qn^2(X v_l) * (1 - alpha * #{v_l != 0}/p),
// maximized either over a fixed grid or by Gaussian-process Bayesian
// optimization with expected improvement on log10(lambda).

struct TpoScore {
  double value = 0.0;
  // one (robust score variance, nonzero fraction) pair per component
  std::vector<std::pair<double, double>> per_component;
};

inline TpoScore tpo_score(const Eigen::MatrixXd& X, const FitResult& result, double alpha) {
  const Eigen::MatrixXd Z = transform(result, X);
  const double p = static_cast<double>(result.loadings.rows());
  TpoScore s;
  for (Eigen::Index l = 0; l < Z.cols(); ++l) {
    const double q = qn_scale(to_vector(Z.col(l)));
    const double nonzero = static_cast<double>((result.loadings.col(l).array() != 0.0).count());
    const double var = q * q;
    const double frac = nonzero / p;
    s.per_component.emplace_back(var, frac);
    s.value += var * (1.0 - alpha * frac);
  }
  return s;
}

struct BayesOptConfig {
  int budget = 30;  // total function evaluations, including the initial design
  int n_init = 8;   // Latin-hypercube initial design size
  double log10_lo = -4.0;
  double log10_hi = 1.0;
  std::uint64_t seed = 0;
  int candidate_grid = 512;
};

struct TuneEntry {
  int iteration = 0;
  double lambda = 0.0;
  double tpo = std::numeric_limits<double>::quiet_NaN();
  int k = 0;
  int nonzero_total = 0;
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

class TuningError : public std::runtime_error {
 public:
  TuningError(const std::string& what, std::vector<TuneEntry> log)
      : std::runtime_error(what), log(std::move(log)) {}
  std::vector<TuneEntry> log;
};

struct TuneResult {
  double best_lambda = 0.0;
  TpoScore best_score;
  FitResult best_fit;
  std::vector<TuneEntry> log;
};

namespace detail {

struct EvalOutcome {
  TuneEntry entry;
  FitResult fit;
  TpoScore score;
  bool ok = false;
};

inline EvalOutcome evaluate_lambda(const Eigen::MatrixXd& X, FitConfig cfg, double lambda,
                                   int iteration) {
  EvalOutcome out;
  out.entry.iteration = iteration;
  out.entry.lambda = lambda;
  out.entry.k = cfg.k;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    cfg.penalty.lambdas = uniform_lambdas(cfg.k, lambda);
    out.fit = fit(X, cfg);
    out.score = tpo_score(X, out.fit, cfg.penalty.alpha);
    out.entry.tpo = out.score.value;
    out.entry.nonzero_total = static_cast<int>((out.fit.loadings.array() != 0.0).count());
    out.ok = true;
  } catch (const std::exception& e) {
    out.entry.failed = true;
    out.entry.error = e.what();
  }
  out.entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// zero-mean unit-variance GP with squared-exponential kernel on [0,1]
struct Gp1d {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  double ell = 0.2;
  double noise = 1e-6;
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd kinv_y;

  static double kern(double a, double b, double ell) {
    const double d = a - b;
    return std::exp(-0.5 * d * d / (ell * ell));
  }

  double log_marginal(double cand_ell) const {
    const Eigen::Index m = x.size();
    Eigen::MatrixXd K(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) K(i, j) = kern(x(i), x(j), cand_ell);
    K.diagonal().array() += noise;
    Eigen::LLT<Eigen::MatrixXd> f(K);
    if (f.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd a = f.solve(y);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) logdet += std::log(f.matrixL()(i, i));
    return -0.5 * y.dot(a) - logdet -
           0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi_v<double>);
  }

  void train(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) {
    x = xs;
    y = ys;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (double cand : {0.05, 0.1, 0.2, 0.3, 0.5, 1.0}) {
      const double ll = log_marginal(cand);
      if (ll > best_ll) {
        best_ll = ll;
        ell = cand;
      }
    }
    const Eigen::Index m = x.size();
    Eigen::MatrixXd K(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) K(i, j) = kern(x(i), x(j), ell);
    K.diagonal().array() += noise;
    llt.compute(K);
    if (llt.info() != Eigen::Success) throw std::runtime_error("gp: kernel factorization failed");
    kinv_y = llt.solve(y);
  }

  std::pair<double, double> predict(double xq) const {
    const Eigen::Index m = x.size();
    Eigen::VectorXd ks(m);
    for (Eigen::Index i = 0; i < m; ++i) ks(i) = kern(xq, x(i), ell);
    const double mu = ks.dot(kinv_y);
    const double var = 1.0 - ks.dot(llt.solve(ks));
    return {mu, std::max(var, 0.0)};
  }
};

// closed-form expected improvement for maximization
inline double expected_improvement(double mu, double var, double best) {
  const double s = std::sqrt(var);
  if (s < 1e-12) return std::max(mu - best, 0.0);
  const double z = (mu - best) / s;
  return (mu - best) * normal_cdf(z) + s * normal_pdf(z);
}

}  // namespace detail

inline TuneResult grid_tune(const Eigen::MatrixXd& X, const FitConfig& cfg,
                            const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("grid_tune: empty grid");
  TuneResult out;
  bool have_best = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    detail::EvalOutcome ev = detail::evaluate_lambda(X, cfg, grid[i], static_cast<int>(i));
    out.log.push_back(ev.entry);
    if (!ev.ok) continue;
    const bool better = !have_best || ev.entry.tpo > out.best_score.value ||
                        (ev.entry.tpo == out.best_score.value && ev.entry.lambda < out.best_lambda);
    if (better) {
      have_best = true;
      out.best_lambda = ev.entry.lambda;
      out.best_score = ev.score;
      out.best_fit = std::move(ev.fit);
    }
  }
  if (!have_best) throw TuningError("grid_tune: all fits failed", out.log);
  return out;
}

// Generic 1-D Bayesian maximization of score(lambda) over log10(lambda) in
// the search box. A NaN score marks a failed evaluation, which is logged but
// excluded from the surrogate. Returns the evaluation log; the best point is
// whichever log entry the caller prefers (see bayes_opt_tune).
inline std::vector<TuneEntry> bayes_opt_maximize(
    const std::function<double(double /*lambda*/, int /*iteration*/)>& score,
    const BayesOptConfig& bo) {
  if (bo.n_init < 1) throw std::invalid_argument("bayes_opt_maximize: n_init must be positive");
  if (bo.budget < bo.n_init) throw std::invalid_argument("bayes_opt_maximize: budget below n_init");
  if (!(bo.log10_lo < bo.log10_hi)) throw std::invalid_argument("bayes_opt_maximize: empty search box");
  if (bo.candidate_grid < 2) throw std::invalid_argument("bayes_opt_maximize: candidate grid too small");

  std::mt19937_64 gen(bo.seed);
  const auto to_lambda = [&](double u) {
    return std::pow(10.0, bo.log10_lo + u * (bo.log10_hi - bo.log10_lo));
  };

  // Latin hypercube on [0,1]: one uniform draw per stratum, strata shuffled
  std::vector<int> strata(static_cast<std::size_t>(bo.n_init));
  for (int i = 0; i < bo.n_init; ++i) strata[static_cast<std::size_t>(i)] = i;
  shuffle(strata, gen);

  std::vector<TuneEntry> log;
  std::vector<double> xs;
  const auto record = [&](double u, int iteration) {
    TuneEntry e;
    e.iteration = iteration;
    e.lambda = to_lambda(u);
    const auto t0 = std::chrono::steady_clock::now();
    e.tpo = score(e.lambda, iteration);
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    e.failed = !std::isfinite(e.tpo);
    log.push_back(std::move(e));
    xs.push_back(u);
  };

  for (int i = 0; i < bo.n_init; ++i) {
    const double u = (static_cast<double>(strata[static_cast<std::size_t>(i)]) + uniform01(gen)) /
                     static_cast<double>(bo.n_init);
    record(u, i);
  }

  std::vector<double> candidates(static_cast<std::size_t>(bo.candidate_grid));
  for (int j = 0; j < bo.candidate_grid; ++j)
    candidates[static_cast<std::size_t>(j)] = (static_cast<double>(j) + 0.5) / static_cast<double>(bo.candidate_grid);

  const auto exploration_pick = [&]() {
    double best_dist = -1.0;
    double pick = candidates.front();
    for (double c : candidates) {
      double dmin = std::numeric_limits<double>::infinity();
      for (double e : xs) dmin = std::min(dmin, std::abs(c - e));
      if (dmin > best_dist) {
        best_dist = dmin;
        pick = c;
      }
    }
    return pick;
  };

  for (int it = bo.n_init; it < bo.budget; ++it) {
    std::vector<double> gx, gy;
    for (std::size_t i = 0; i < log.size(); ++i)
      if (!log[i].failed) {
        gx.push_back(xs[i]);
        gy.push_back(log[i].tpo);
      }
    double next = std::numeric_limits<double>::quiet_NaN();
    if (gx.size() >= 2) {
      const double mean = std::accumulate(gy.begin(), gy.end(), 0.0) / static_cast<double>(gy.size());
      double var = 0.0;
      for (double v : gy) var += (v - mean) * (v - mean);
      var /= static_cast<double>(gy.size() - 1);
      const double sd = std::sqrt(var);
      if (sd > 0.0 && std::isfinite(sd)) {
        Eigen::VectorXd xv(static_cast<Eigen::Index>(gx.size())), yv(static_cast<Eigen::Index>(gy.size()));
        for (std::size_t i = 0; i < gx.size(); ++i) {
          xv(static_cast<Eigen::Index>(i)) = gx[i];
          yv(static_cast<Eigen::Index>(i)) = (gy[i] - mean) / sd;
        }
        detail::Gp1d gp;
        gp.train(xv, yv);
        const double best_std = yv.maxCoeff();
        double best_ei = 0.0;
        for (double c : candidates) {
          const auto [mu, pv] = gp.predict(c);
          const double ei = detail::expected_improvement(mu, pv, best_std);
          if (ei > best_ei) {
            best_ei = ei;
            next = c;
          }
        }
        if (!(best_ei > 1e-16)) next = std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (!std::isfinite(next)) next = exploration_pick();  // flat or degenerate posterior
    record(next, it);
  }
  return log;
}

inline TuneResult bayes_opt_tune(const Eigen::MatrixXd& X, const FitConfig& cfg,
                                 const BayesOptConfig& bo) {
  TuneResult out;
  bool have_best = false;
  std::vector<detail::EvalOutcome> outcomes;
  const auto score = [&](double lambda, int iteration) {
    outcomes.push_back(detail::evaluate_lambda(X, cfg, lambda, iteration));
    return outcomes.back().entry.tpo;
  };
  out.log = bayes_opt_maximize(score, bo);
  // splice fit metadata back into the log and pick the best observed point
  for (std::size_t i = 0; i < out.log.size(); ++i) {
    detail::EvalOutcome& ev = outcomes[i];
    out.log[i].k = ev.entry.k;
    out.log[i].nonzero_total = ev.entry.nonzero_total;
    out.log[i].error = ev.entry.error;
    if (ev.entry.failed) continue;
    const bool better = !have_best || ev.entry.tpo > out.best_score.value ||
                        (ev.entry.tpo == out.best_score.value && ev.entry.lambda < out.best_lambda);
    if (better) {
      have_best = true;
      out.best_lambda = ev.entry.lambda;
      out.best_score = ev.score;
      out.best_fit = std::move(ev.fit);
    }
  }
  if (!have_best) throw TuningError("bayes_opt_tune: all fits failed", out.log);
  return out;
}

}  // namespace scramble
