// command-line front end: fit / tune / diagnose / transform / simulate over
// CSV matrices, with a manifest echoing the fully resolved configuration of
// every run. exit codes: 0 success, 2 user/input error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "scramble/csv.hpp"
#include "scramble/diagnostics.hpp"
#include "scramble/scramble.hpp"
#include "scramble/serialize.hpp"
#include "scramble/simulation.hpp"
#include "scramble/tuning.hpp"

namespace {

using nlohmann::json;

struct FitFlags {
  int k = 2;
  std::string loss = "huber";
  std::string init = "rank";
  double lambda = 0.0;
  double alpha = 0.5;
  double lr = 1e-3;
  double decay = 0.99;
  int max_iters = 1000;
  double tol = 1e-6;
  int batch_size = 0;
  int threshold_window = 10;
  bool no_center = false;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

scramble::LossFamily parse_loss(const std::string& s) {
  if (s == "square") return scramble::LossFamily::Square;
  if (s == "huber") return scramble::LossFamily::Huber;
  if (s == "tukey") return scramble::LossFamily::Tukey;
  if (s == "lts") return scramble::LossFamily::LTS;
  throw std::invalid_argument("unknown loss: " + s);
}

scramble::FitConfig to_fit_config(const FitFlags& f) {
  scramble::FitConfig cfg;
  cfg.k = f.k;
  cfg.loss.family = parse_loss(f.loss);
  cfg.penalty.lambdas = scramble::uniform_lambdas(f.k, f.lambda);
  cfg.penalty.alpha = f.alpha;
  cfg.init = f.init == "wrap" ? scramble::InitTransform::Wrapping : scramble::InitTransform::RankTransform;
  cfg.optimizer.learning_rate = f.lr;
  cfg.optimizer.decay = f.decay;
  cfg.optimizer.max_iters = f.max_iters;
  cfg.optimizer.tol = f.tol;
  cfg.optimizer.batch_size = f.batch_size;
  cfg.optimizer.seed = f.seed;
  cfg.threshold_window = f.threshold_window;
  cfg.center = f.no_center ? scramble::Centering::None : scramble::Centering::Median;
  return cfg;
}

json fit_flags_to_json(const FitFlags& f) {
  json j;
  j["k"] = f.k;
  j["loss"] = f.loss;
  j["init"] = f.init;
  j["lambda"] = f.lambda;
  j["alpha"] = f.alpha;
  j["lr"] = f.lr;
  j["decay"] = f.decay;
  j["max_iters"] = f.max_iters;
  j["tol"] = f.tol;
  j["batch_size"] = f.batch_size;
  j["threshold_window"] = f.threshold_window;
  j["center"] = f.no_center ? "none" : "median";
  j["seed"] = f.seed;
  return j;
}

void add_fit_options(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--k", f.k, "number of components");
  cmd->add_option("--loss", f.loss, "loss family")
      ->check(CLI::IsMember({"square", "huber", "tukey", "lts"}));
  cmd->add_option("--init", f.init, "initialization transform")
      ->check(CLI::IsMember({"rank", "wrap"}));
  cmd->add_option("--lambda", f.lambda, "sparsity penalty strength");
  cmd->add_option("--alpha", f.alpha, "elastic-net mixing in [0,1]");
  cmd->add_option("--lr", f.lr, "initial learning rate");
  cmd->add_option("--decay", f.decay, "learning-rate decay per iteration");
  cmd->add_option("--max-iters", f.max_iters, "iteration cap");
  cmd->add_option("--tol", f.tol, "objective-change stopping tolerance");
  cmd->add_option("--batch-size", f.batch_size, "minibatch rows (0 = full batch)");
  cmd->add_option("--threshold-window", f.threshold_window, "trailing window for the loading threshold");
  cmd->add_flag("--no-center", f.no_center, "skip median centering");
  cmd->add_option("--seed", f.seed, "random seed")->envname("SCRAMBLE_SEED");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
}

std::vector<std::string> component_header(int k) {
  std::vector<std::string> h;
  for (int l = 1; l <= k; ++l) h.push_back("comp_" + std::to_string(l));
  return h;
}

void write_manifest(const std::string& out_dir, json manifest, double seconds) {
  manifest["timing_seconds"] = seconds;
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw std::runtime_error("cannot open file for writing: " + out_dir + "/manifest.json");
  out << manifest.dump(2) << '\n';
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + dir);
}

Eigen::MatrixXd load_matrix(const std::string& path, std::vector<std::string>* header = nullptr) {
  scramble::CsvData data = scramble::read_csv(path);
  if (header != nullptr) *header = data.header;
  return data.values;
}

void write_fit_artifacts(const std::string& out_dir, const scramble::FitResult& result) {
  scramble::save_fit_json(out_dir + "/fit.json", result);
  scramble::write_csv(out_dir + "/loadings.csv", result.loadings,
                      component_header(static_cast<int>(result.loadings.cols())));
  scramble::write_csv(out_dir + "/scores.csv", result.scores,
                      component_header(static_cast<int>(result.scores.cols())));
}

int cmd_fit(const std::string& input, const FitFlags& flags) {
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXd X = load_matrix(input);
  if (X.rows() == 0) throw std::invalid_argument("no data rows in " + input);
  const scramble::FitConfig cfg = to_fit_config(flags);
  ensure_out_dir(flags.out_dir);
  const scramble::FitResult result = scramble::fit(X, cfg);
  write_fit_artifacts(flags.out_dir, result);

  json manifest;
  manifest["command"] = "fit";
  manifest["input"] = input;
  manifest["n"] = X.rows();
  manifest["p"] = X.cols();
  manifest["config"] = fit_flags_to_json(flags);
  manifest["outputs"] = {"fit.json", "loadings.csv", "scores.csv"};
  manifest["converged"] = result.trace.termination == scramble::Termination::Converged;
  manifest["iterations"] = result.trace.iterations;
  manifest["threshold"] = result.threshold;
  json warnings = json::array();
  if (result.trace.termination == scramble::Termination::MaxIters)
    warnings.push_back("did not converge within max iterations");
  manifest["warnings"] = warnings;
  write_manifest(flags.out_dir, manifest,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

std::vector<double> parse_grid(const std::string& grid) {
  std::vector<double> out;
  std::stringstream ss(grid);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    double v;
    if (!scramble::detail::parse_double(scramble::detail::trim(tok), v))
      throw std::invalid_argument("invalid grid value: " + tok);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty grid");
  return out;
}

int cmd_tune(const std::string& input, const FitFlags& flags, const std::string& grid,
             bool grid_given, int budget, int n_init, double box_lo, double box_hi) {
  if (grid_given && grid.empty()) throw std::invalid_argument("empty grid");
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXd X = load_matrix(input);
  if (X.rows() == 0) throw std::invalid_argument("no data rows in " + input);
  const scramble::FitConfig cfg = to_fit_config(flags);
  ensure_out_dir(flags.out_dir);

  scramble::TuneResult result;
  if (!grid.empty()) {
    result = scramble::grid_tune(X, cfg, parse_grid(grid));
  } else {
    scramble::BayesOptConfig bo;
    bo.budget = budget;
    bo.n_init = n_init;
    bo.log10_lo = box_lo;
    bo.log10_hi = box_hi;
    bo.seed = flags.seed;
    result = scramble::bayes_opt_tune(X, cfg, bo);
  }

  std::vector<std::vector<std::string>> rows;
  for (const scramble::TuneEntry& e : result.log)
    rows.push_back({std::to_string(e.iteration), scramble::format_double(e.lambda),
                    scramble::format_double(e.tpo), std::to_string(e.k),
                    std::to_string(e.nonzero_total), scramble::format_double(e.seconds)});
  scramble::write_table(flags.out_dir + "/tune.csv",
                        {"iteration", "lambda", "tpo", "k", "nonzero_total", "seconds"}, rows);
  write_fit_artifacts(flags.out_dir, result.best_fit);

  json manifest;
  manifest["command"] = "tune";
  manifest["input"] = input;
  manifest["config"] = fit_flags_to_json(flags);
  if (grid.empty()) {
    manifest["tuner"] = {{"kind", "bayes"}, {"budget", budget}, {"n_init", n_init},
                         {"log10_lo", box_lo}, {"log10_hi", box_hi}};
  } else {
    manifest["tuner"] = {{"kind", "grid"}, {"grid", grid}};
  }
  manifest["best_lambda"] = result.best_lambda;
  manifest["best_tpo"] = result.best_score.value;
  manifest["evaluations"] = result.log.size();
  manifest["outputs"] = {"tune.csv", "fit.json", "loadings.csv", "scores.csv"};
  json warnings = json::array();
  for (const scramble::TuneEntry& e : result.log)
    if (e.failed) warnings.push_back("evaluation " + std::to_string(e.iteration) + " failed: " + e.error);
  manifest["warnings"] = warnings;
  write_manifest(flags.out_dir, manifest,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

int cmd_diagnose(const std::string& fit_path, const std::string& input, double quantile,
                 const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const scramble::FitResult model = scramble::load_fit_json(fit_path);
  const Eigen::MatrixXd X = load_matrix(input);
  if (X.cols() != model.loadings.rows())
    throw std::invalid_argument("data has " + std::to_string(X.cols()) + " columns but the fit expects " +
                                std::to_string(model.loadings.rows()));
  ensure_out_dir(out_dir);
  const scramble::DiagnosticsReport rep = scramble::diagnose(model, X, quantile);
  const Eigen::MatrixXd cell_map = scramble::residual_cell_map(model, X);

  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index i = 0; i < rep.sd.size(); ++i)
    rows.push_back({std::to_string(i), scramble::format_double(rep.sd(i)),
                    scramble::format_double(rep.od(i)),
                    scramble::to_string(rep.flags[static_cast<std::size_t>(i)])});
  scramble::write_table(out_dir + "/distances.csv", {"observation", "sd", "od", "flag"}, rows);
  scramble::write_csv(out_dir + "/residual_map.csv", cell_map);

  json manifest;
  manifest["command"] = "diagnose";
  manifest["fit"] = fit_path;
  manifest["input"] = input;
  manifest["quantile"] = quantile;
  manifest["sd_cutoff"] = rep.sd_cutoff;
  manifest["od_cutoff"] = rep.od_cutoff;
  int flagged = 0;
  for (scramble::OutlierFlag f : rep.flags)
    if (f != scramble::OutlierFlag::Regular) ++flagged;
  manifest["flagged"] = flagged;
  manifest["outputs"] = {"distances.csv", "residual_map.csv"};
  manifest["warnings"] = json::array();
  write_manifest(out_dir, manifest,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

int cmd_transform(const std::string& fit_path, const std::string& input, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const scramble::FitResult model = scramble::load_fit_json(fit_path);
  const Eigen::MatrixXd X = load_matrix(input);
  ensure_out_dir(out_dir);
  const Eigen::MatrixXd scores = scramble::transform(model, X);
  scramble::write_csv(out_dir + "/scores.csv", scores,
                      component_header(static_cast<int>(model.loadings.cols())));

  json manifest;
  manifest["command"] = "transform";
  manifest["fit"] = fit_path;
  manifest["input"] = input;
  manifest["rows"] = scores.rows();
  manifest["outputs"] = {"scores.csv"};
  manifest["warnings"] = json::array();
  write_manifest(out_dir, manifest,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

struct SimulateFlags {
  std::string config_path;
  std::string preset;
  double eps = 0.0;
  double gamma_cell = 100.0;
  int reps = 20;
  std::string methods = "svd,huber-rank,huber-wrap,tukey-rank,tukey-wrap,lts-rank,lts-wrap";
  int jobs = 1;
  FitFlags fit;  // optimizer/penalty/seed/out-dir knobs reused
};

scramble::SimScenario parse_preset(const std::string& preset) {
  scramble::SimScenario sc;
  const auto dash = preset.find('-');
  const std::string setting = preset.substr(0, dash);
  const std::string contamination = dash == std::string::npos ? "" : preset.substr(dash + 1);
  if (setting == "lowdim") sc.setting = scramble::SimSetting::LowDim;
  else if (setting == "highdim") sc.setting = scramble::SimSetting::HighDim;
  else throw std::invalid_argument("unknown preset: " + preset);
  if (contamination == "clean") sc.contamination = scramble::Contamination::None;
  else if (contamination == "casewise") sc.contamination = scramble::Contamination::Casewise;
  else if (contamination == "cellwise") sc.contamination = scramble::Contamination::CellwiseStructured;
  else throw std::invalid_argument("unknown preset: " + preset);
  return sc;
}

std::vector<scramble::MethodSpec> parse_methods(const std::string& spec, double lambda) {
  std::vector<scramble::MethodSpec> out;
  std::stringstream ss(spec);
  std::string tok;
  std::vector<std::string> bad;
  while (std::getline(ss, tok, ',')) {
    tok = scramble::detail::trim(tok);
    if (tok.empty()) continue;
    scramble::MethodSpec m;
    m.name = tok;
    m.lambda = lambda;
    if (tok == "svd") {
      m.svd_baseline = true;
      out.push_back(m);
      continue;
    }
    const auto dash = tok.rfind('-');
    const std::string loss = dash == std::string::npos ? tok : tok.substr(0, dash);
    const std::string init = dash == std::string::npos ? "" : tok.substr(dash + 1);
    try {
      m.loss = parse_loss(loss);
    } catch (const std::invalid_argument&) {
      bad.push_back(tok);
      continue;
    }
    if (init == "rank") m.init = scramble::InitTransform::RankTransform;
    else if (init == "wrap") m.init = scramble::InitTransform::Wrapping;
    else {
      bad.push_back(tok);
      continue;
    }
    out.push_back(m);
  }
  if (!bad.empty()) {
    std::string msg = "unknown methods:";
    for (const std::string& b : bad) msg += " " + b;
    throw std::invalid_argument(msg);
  }
  if (out.empty()) throw std::invalid_argument("no methods given");
  return out;
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where,
                std::vector<std::string>& bad) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      bad.push_back(where.empty() ? it.key() : where + "." + it.key());
}

// structured scenario config: scenarios plus study-level knobs
void load_sim_config(const std::string& path, SimulateFlags& f,
                     std::vector<scramble::SimScenario>& scenarios) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("invalid config json in " + path + ": " + e.what());
  }
  std::vector<std::string> bad;
  check_keys(j, {"seed", "replicates", "jobs", "k", "alpha", "lambda", "threshold_window",
                 "methods", "optimizer", "scenarios"}, "", bad);
  if (j.contains("optimizer"))
    check_keys(j.at("optimizer"), {"lr", "decay", "max_iters", "tol", "batch_size"}, "optimizer", bad);
  if (j.contains("scenarios")) {
    const auto& arr = j.at("scenarios");
    if (!arr.is_array()) throw std::invalid_argument("config: scenarios must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      check_keys(arr[i], {"setting", "contamination", "epsilon", "gamma_cell"},
                 "scenarios[" + std::to_string(i) + "]", bad);
  }
  if (!bad.empty()) {
    std::string msg = "invalid config keys:";
    for (const std::string& b : bad) msg += " " + b;
    throw std::invalid_argument(msg);
  }

  if (j.contains("seed")) f.fit.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("replicates")) f.reps = j.at("replicates").get<int>();
  if (j.contains("jobs")) f.jobs = j.at("jobs").get<int>();
  if (j.contains("k")) f.fit.k = j.at("k").get<int>();
  if (j.contains("alpha")) f.fit.alpha = j.at("alpha").get<double>();
  if (j.contains("lambda")) f.fit.lambda = j.at("lambda").get<double>();
  if (j.contains("threshold_window")) f.fit.threshold_window = j.at("threshold_window").get<int>();
  if (j.contains("methods")) {
    std::string joined;
    for (const auto& m : j.at("methods")) joined += (joined.empty() ? "" : ",") + m.get<std::string>();
    f.methods = joined;
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    if (o.contains("lr")) f.fit.lr = o.at("lr").get<double>();
    if (o.contains("decay")) f.fit.decay = o.at("decay").get<double>();
    if (o.contains("max_iters")) f.fit.max_iters = o.at("max_iters").get<int>();
    if (o.contains("tol")) f.fit.tol = o.at("tol").get<double>();
    if (o.contains("batch_size")) f.fit.batch_size = o.at("batch_size").get<int>();
  }
  if (!j.contains("scenarios")) throw std::invalid_argument("config: missing scenarios");
  for (const auto& s : j.at("scenarios")) {
    scramble::SimScenario sc;
    const std::string setting = s.value("setting", "lowdim");
    if (setting == "lowdim") sc.setting = scramble::SimSetting::LowDim;
    else if (setting == "highdim") sc.setting = scramble::SimSetting::HighDim;
    else throw std::invalid_argument("config: unknown setting " + setting);
    const std::string cont = s.value("contamination", "clean");
    if (cont == "clean") sc.contamination = scramble::Contamination::None;
    else if (cont == "casewise") sc.contamination = scramble::Contamination::Casewise;
    else if (cont == "cellwise") sc.contamination = scramble::Contamination::CellwiseStructured;
    else throw std::invalid_argument("config: unknown contamination " + cont);
    sc.epsilon = s.value("epsilon", 0.0);
    sc.gamma_cell = s.value("gamma_cell", 100.0);
    scenarios.push_back(sc);
  }
  if (scenarios.empty()) throw std::invalid_argument("config: empty scenarios");
}

int cmd_simulate(SimulateFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<scramble::SimScenario> scenarios;
  if (!f.config_path.empty()) {
    if (!f.preset.empty())
      throw std::invalid_argument("give either a config file or --preset, not both");
    load_sim_config(f.config_path, f, scenarios);
  } else if (!f.preset.empty()) {
    scramble::SimScenario sc = parse_preset(f.preset);
    sc.epsilon = f.eps;
    sc.gamma_cell = f.gamma_cell;
    scenarios.push_back(sc);
  } else {
    throw std::invalid_argument("simulate needs a config file or --preset");
  }

  const std::vector<scramble::MethodSpec> methods = parse_methods(f.methods, f.fit.lambda);
  scramble::StudyConfig study;
  study.replicates = f.reps;
  study.master_seed = f.fit.seed;
  study.jobs = f.jobs;
  study.k = f.fit.k;
  study.alpha = f.fit.alpha;
  study.threshold_window = f.fit.threshold_window;
  study.optimizer.learning_rate = f.fit.lr;
  study.optimizer.decay = f.fit.decay;
  study.optimizer.max_iters = f.fit.max_iters;
  study.optimizer.tol = f.fit.tol;
  study.optimizer.batch_size = f.fit.batch_size;

  ensure_out_dir(f.fit.out_dir);
  const std::vector<scramble::StudyRow> rows = scramble::run_study(scenarios, methods, study);

  std::vector<std::vector<std::string>> table;
  json warnings = json::array();
  for (const scramble::StudyRow& r : rows) {
    table.push_back({r.scenario, r.method, r.loss, r.init, scramble::format_double(r.epsilon),
                     std::to_string(r.replicate), scramble::format_double(r.angle),
                     scramble::format_double(r.tpr), scramble::format_double(r.tnr),
                     scramble::format_double(r.seconds)});
    if (r.failed)
      warnings.push_back(r.scenario + "/" + r.method + " replicate " + std::to_string(r.replicate) +
                         " failed: " + r.error);
  }
  scramble::write_table(f.fit.out_dir + "/results.csv",
                        {"scenario", "method", "loss", "init", "epsilon", "replicate", "angle",
                         "tpr", "tnr", "seconds"}, table);

  json manifest;
  manifest["command"] = "simulate";
  json sc_list = json::array();
  for (const scramble::SimScenario& sc : scenarios)
    sc_list.push_back({{"scenario", scramble::scenario_name(sc)}, {"epsilon", sc.epsilon},
                       {"gamma_cell", sc.gamma_cell}});
  manifest["scenarios"] = sc_list;
  manifest["methods"] = f.methods;
  manifest["replicates"] = f.reps;
  manifest["jobs"] = f.jobs;
  manifest["seed"] = f.fit.seed;
  manifest["k"] = f.fit.k;
  manifest["alpha"] = f.fit.alpha;
  manifest["lambda"] = f.fit.lambda;
  manifest["optimizer"] = {{"lr", f.fit.lr}, {"decay", f.fit.decay}, {"max_iters", f.fit.max_iters},
                           {"tol", f.fit.tol}, {"batch_size", f.fit.batch_size}};
  manifest["rows"] = rows.size();
  manifest["outputs"] = {"results.csv"};
  manifest["warnings"] = warnings;
  write_manifest(f.fit.out_dir, manifest,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse, cellwise-robust principal component analysis"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  std::string fit_input;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the model to a CSV matrix");
  fit_cmd->add_option("input", fit_input, "input CSV")->required();
  add_fit_options(fit_cmd, fit_flags);

  FitFlags tune_flags;
  std::string tune_input, tune_grid;
  int tune_budget = 30, tune_n_init = 8;
  double tune_box_lo = -4.0, tune_box_hi = 1.0;
  CLI::App* tune_cmd = app.add_subcommand("tune", "select the sparsity penalty by maximizing the tradeoff product");
  tune_cmd->add_option("input", tune_input, "input CSV")->required();
  add_fit_options(tune_cmd, tune_flags);
  tune_cmd->add_option("--grid", tune_grid, "comma-separated lambda grid (overrides Bayesian search)");
  tune_cmd->add_option("--budget", tune_budget, "total tuning evaluations");
  tune_cmd->add_option("--n-init", tune_n_init, "initial design size");
  tune_cmd->add_option("--box-lo", tune_box_lo, "log10(lambda) lower bound");
  tune_cmd->add_option("--box-hi", tune_box_hi, "log10(lambda) upper bound");

  std::string diag_fit, diag_input, diag_out = ".";
  double diag_quantile = 0.975;
  CLI::App* diag_cmd = app.add_subcommand("diagnose", "score/orthogonal distances and residual cell map");
  diag_cmd->add_option("fit", diag_fit, "fit.json from a previous run")->required();
  diag_cmd->add_option("input", diag_input, "input CSV")->required();
  diag_cmd->add_option("--quantile", diag_quantile, "cutoff quantile");
  diag_cmd->add_option("--out-dir", diag_out, "output directory");

  std::string tr_fit, tr_input, tr_out = ".";
  CLI::App* tr_cmd = app.add_subcommand("transform", "project new data onto a fitted model");
  tr_cmd->add_option("fit", tr_fit, "fit.json from a previous run")->required();
  tr_cmd->add_option("input", tr_input, "new data CSV")->required();
  tr_cmd->add_option("--out-dir", tr_out, "output directory");

  SimulateFlags sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run the synthetic benchmark study");
  sim_cmd->add_option("config", sim.config_path, "scenario config JSON");
  sim_cmd->add_option("--preset", sim.preset, "scenario preset")
      ->check(CLI::IsMember({"lowdim-clean", "lowdim-casewise", "lowdim-cellwise",
                             "highdim-clean", "highdim-casewise", "highdim-cellwise"}));
  sim_cmd->add_option("--eps", sim.eps, "contamination fraction");
  sim_cmd->add_option("--gamma-cell", sim.gamma_cell, "cellwise outlier magnitude");
  sim_cmd->add_option("--reps", sim.reps, "replicates per scenario");
  sim_cmd->add_option("--methods", sim.methods, "comma-separated method list");
  sim_cmd->add_option("--jobs", sim.jobs, "worker threads");
  add_fit_options(sim_cmd, sim.fit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_input, fit_flags);
    if (tune_cmd->parsed())
      return cmd_tune(tune_input, tune_flags, tune_grid, tune_cmd->count("--grid") > 0,
                      tune_budget, tune_n_init, tune_box_lo, tune_box_hi);
    if (diag_cmd->parsed()) return cmd_diagnose(diag_fit, diag_input, diag_quantile, diag_out);
    if (tr_cmd->parsed()) return cmd_transform(tr_fit, tr_input, tr_out);
    if (sim_cmd->parsed()) return cmd_simulate(sim);
  } catch (const scramble::CsvError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const scramble::DivergenceError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const scramble::TuningError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    std::cerr << "error: " << msg << "\n";
    return msg.rfind("cannot ", 0) == 0 || msg.rfind("write failed", 0) == 0 ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
