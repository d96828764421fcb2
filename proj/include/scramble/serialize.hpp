#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "scramble/scramble.hpp"

namespace scramble {

// FitResult <-> JSON. Scores are written separately as CSV; the JSON holds
// everything needed to project and diagnose new data.

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array()) throw std::invalid_argument(name + ": expected an array of rows");
  const Eigen::Index n = static_cast<Eigen::Index>(j.size());
  Eigen::Index p = -1;
  Eigen::MatrixXd M;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array()) throw std::invalid_argument(name + ": expected an array of rows");
    if (p < 0) {
      p = static_cast<Eigen::Index>(row.size());
      M.resize(n, p);
    }
    if (static_cast<Eigen::Index>(row.size()) != p)
      throw std::invalid_argument(name + ": ragged rows");
    for (Eigen::Index c = 0; c < p; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw std::invalid_argument(name + ": non-numeric entry");
      M(i, c) = v.get<double>();
    }
  }
  if (n == 0) M.resize(0, 0);
  return M;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array()) throw std::invalid_argument(name + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& x = j[static_cast<std::size_t>(i)];
    if (!x.is_number()) throw std::invalid_argument(name + ": non-numeric entry");
    v(i) = x.get<double>();
  }
  return v;
}

inline nlohmann::json fit_result_to_json(const FitResult& r) {
  nlohmann::json j;
  j["p"] = r.loadings.rows();
  j["k"] = r.loadings.cols();
  j["n"] = r.scores.rows();
  j["loadings"] = matrix_to_json(r.loadings);
  j["eigenvalues"] = vector_to_json(r.eigenvalues);
  j["residual_scales"] = vector_to_json(r.residual_scales);
  j["center_offsets"] = vector_to_json(r.center_offsets);
  j["threshold"] = r.threshold;
  j["pre_threshold_orth_residual"] = r.pre_threshold_orth_residual;
  nlohmann::json t;
  t["iterations"] = r.trace.iterations;
  t["termination"] = r.trace.termination == Termination::Converged ? "converged" : "max_iters";
  t["max_orth_residual"] = r.trace.max_orth_residual;
  t["objectives"] = r.trace.objectives;
  t["param_changes"] = r.trace.param_changes;
  j["trace"] = std::move(t);
  return j;
}

inline FitResult fit_result_from_json(const nlohmann::json& j) {
  for (const char* key : {"loadings", "eigenvalues", "residual_scales", "center_offsets", "threshold"})
    if (!j.contains(key)) throw std::invalid_argument(std::string("fit json: missing key ") + key);
  FitResult r;
  r.loadings = matrix_from_json(j.at("loadings"), "loadings");
  r.eigenvalues = vector_from_json(j.at("eigenvalues"), "eigenvalues");
  r.residual_scales = vector_from_json(j.at("residual_scales"), "residual_scales");
  r.center_offsets = vector_from_json(j.at("center_offsets"), "center_offsets");
  r.threshold = j.at("threshold").get<double>();
  if (j.contains("pre_threshold_orth_residual"))
    r.pre_threshold_orth_residual = j.at("pre_threshold_orth_residual").get<double>();
  if (j.contains("trace")) {
    const auto& t = j.at("trace");
    if (t.contains("iterations")) r.trace.iterations = t.at("iterations").get<int>();
    if (t.contains("termination"))
      r.trace.termination = t.at("termination").get<std::string>() == "converged"
                                ? Termination::Converged
                                : Termination::MaxIters;
    if (t.contains("max_orth_residual")) r.trace.max_orth_residual = t.at("max_orth_residual").get<double>();
    if (t.contains("objectives")) r.trace.objectives = t.at("objectives").get<std::vector<double>>();
    if (t.contains("param_changes")) r.trace.param_changes = t.at("param_changes").get<std::vector<double>>();
  }
  if (r.center_offsets.size() != r.loadings.rows())
    throw std::invalid_argument("fit json: center_offsets length does not match loadings rows");
  if (r.eigenvalues.size() != r.loadings.cols())
    throw std::invalid_argument("fit json: eigenvalues length does not match loadings columns");
  return r;
}

inline void save_fit_json(const std::string& path, const FitResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << fit_result_to_json(r).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline FitResult load_fit_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("invalid fit json in " + path + ": " + e.what());
  }
  return fit_result_from_json(j);
}

}  // namespace scramble
