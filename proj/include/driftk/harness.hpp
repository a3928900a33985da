#pragma once

#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "driftk/controller.hpp"
#include "driftk/params.hpp"
#include "driftk/synth.hpp"

namespace driftk {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- CSV dialect: comma separated, header row, '.' decimal, LF endings ----

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct CsvWriter {
  std::ofstream out;

  CsvWriter(const fs::path& path, const std::vector<std::string>& header) {
    out.open(path, std::ios::binary);  // binary keeps LF endings on every platform
    if (!out) throw DataError("cannot open " + path.string());
    write_row_strings(header);
  }

  void write_row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  }

  void write_row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double v : cells) s.push_back(fmt_double(v));
    write_row_strings(s);
  }
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw DataError("missing column: " + name);
  }

  double num(std::size_t row, int col) const {
    const std::string& s = rows[row][col];
    if (s == "nan" || s.empty()) return kNaN;
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw DataError("non-numeric cell '" + s + "'");
    }
  }
};

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (first) {
      t.header = cells;
      first = false;
    } else {
      if (cells.size() != t.header.size())
        throw DataError("ragged csv row in " + path.string());
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw DataError("empty csv: " + path.string());
  return t;
}

// ---- configuration ----

namespace detail {

inline void check_keys(const json& j, const std::vector<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T dflt) {
  if (!j.contains(key) || j.at(key).is_null()) return dflt;
  return j.at(key).get<T>();
}

inline double get_num(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!j.at(key).is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline Vec get_vec(const json& j, int d, const std::string& where) {
  Vec v;
  if (j.is_number()) {
    v.assign(d, j.get<double>());
  } else if (j.is_array()) {
    for (const auto& x : j) v.push_back(x.get<double>());
    if (static_cast<int>(v.size()) != d)
      throw ConfigError(where + ": array length must equal d");
  } else {
    throw ConfigError(where + ": expected number or array");
  }
  return v;
}

}  // namespace detail

enum class TaskFamily { Regression, Classification };
enum class PsiSource { Known, Estimated };
enum class PsiEstimator { Quadratic, HessianGrid, HessianEigen, Heuristic };
enum class DriftModel { Constant, Bounded };

struct RunConfig {
  // task
  TaskFamily family = TaskFamily::Regression;
  int d = 5;
  double sigma_w2 = 0.9;   // regression feature variance
  double sigma2 = 1.0;     // classification noise variance
  double lambda = 0.1;
  double rho = 1.0;        // regression drift rate
  double arc_step = 0.2;   // classification drift
  int N = 20;
  std::uint64_t task_seed = 1;
  double r1_norm = kNaN;

  double target_eps = 0.1;
  FeasibleSet set = FeasibleSet::ball(Vec(5, 0.0), 25.0);

  BoundKind bound_kind = BoundKind::ConstStepAvg;
  double mu = 0.002;      // constant schedules
  double C = 0.5;         // power schedules
  double alpha = 0.75;

  DriftMethod drift_method = DriftMethod::Direct;
  DriftMode drift_mode = DriftMode::Practical;
  DriftModel drift_model = DriftModel::Constant;
  int W = 3;
  TnSchedule tn_schedule{0.5, 0.375};
  double ipm_scale = 1.0;

  PsiSource psi_source = PsiSource::Known;
  PsiEstimator psi_estimator = PsiEstimator::Quadratic;
  FunctionParams psi;  // known values; diam2 always refreshed from the set

  Policy policy = Policy::NoUpdate;
  std::vector<std::uint64_t> seeds;
  int K_max = 1000000;
  int bootstrap_K = 0;  // 0: derive from the eps target rule
  int test_batch = 200;
  int workers = 1;

  json echo;  // effective configuration with defaults resolved
};

// schedule/averaging for a bound kind, given the psi values actually in force
inline StepSchedule schedule_for(BoundKind kind, const RunConfig& cfg, double m) {
  switch (kind) {
    case BoundKind::LastIterate:
    case BoundKind::ConstStepAvg: return StepSchedule::constant(cfg.mu);
    case BoundKind::NedicLeeAvg: return StepSchedule::inv_strong(m);
    case BoundKind::QuadraticAvg:
    case BoundKind::ClosedFormD: return StepSchedule::power(cfg.C, cfg.alpha);
  }
  return StepSchedule::constant(cfg.mu);
}

inline AveragingScheme averaging_for(BoundKind kind, double m, double B) {
  switch (kind) {
    case BoundKind::LastIterate:
    case BoundKind::ClosedFormD: return AveragingScheme::last_iterate();
    case BoundKind::ConstStepAvg: return AveragingScheme::gamma_weighted(m, B);
    case BoundKind::NedicLeeAvg: return AveragingScheme::inv_step_weighted();
    case BoundKind::QuadraticAvg: return AveragingScheme::uniform();
  }
  return AveragingScheme::last_iterate();
}

inline RunConfig parse_config(const json& root) {
  detail::check_keys(root,
                     {"task", "target_eps", "feasible_set", "bound", "drift", "psi", "policy",
                      "seeds", "K_max", "bootstrap_K", "test_batch", "workers"},
                     "config");
  RunConfig cfg;

  const json& task = root.contains("task") ? root.at("task") : json::object();
  detail::check_keys(task,
                     {"family", "d", "sigma_w2", "sigma2", "lambda", "rho", "arc_step", "N",
                      "seed", "r1_norm"},
                     "task");
  const std::string family = detail::get_or<std::string>(task, "family", "regression");
  if (family == "regression")
    cfg.family = TaskFamily::Regression;
  else if (family == "classification")
    cfg.family = TaskFamily::Classification;
  else
    throw ConfigError("task.family must be regression or classification");
  cfg.d = detail::get_or<int>(task, "d", 5);
  cfg.sigma_w2 = detail::get_or<double>(task, "sigma_w2", 0.9);
  cfg.sigma2 = detail::get_or<double>(task, "sigma2", 1.0);
  cfg.lambda = detail::get_or<double>(task, "lambda", 0.1);
  cfg.rho = detail::get_or<double>(task, "rho", 1.0);
  cfg.arc_step = detail::get_or<double>(task, "arc_step", 0.2);
  cfg.N = detail::get_or<int>(task, "N", 20);
  cfg.task_seed = detail::get_or<std::uint64_t>(task, "seed", 1);
  cfg.r1_norm = detail::get_or<double>(task, "r1_norm", kNaN);

  cfg.target_eps = detail::get_or<double>(root, "target_eps", 0.1);
  if (!(cfg.target_eps > 0.0)) throw ConfigError("target_eps must be > 0");

  const json& setj = root.contains("feasible_set") ? root.at("feasible_set") : json::object();
  detail::check_keys(setj, {"kind", "center", "radius", "lo", "hi"}, "feasible_set");
  const std::string set_kind = detail::get_or<std::string>(setj, "kind", "ball");
  if (set_kind == "ball") {
    Vec center = setj.contains("center")
                     ? detail::get_vec(setj.at("center"), cfg.d, "feasible_set.center")
                     : Vec(cfg.d, 0.0);
    const double radius = detail::get_or<double>(setj, "radius", 25.0);
    cfg.set = FeasibleSet::ball(std::move(center), radius);
  } else if (set_kind == "box") {
    if (!setj.contains("lo") || !setj.contains("hi"))
      throw ConfigError("feasible_set: box requires lo and hi");
    cfg.set = FeasibleSet::box(detail::get_vec(setj.at("lo"), cfg.d, "feasible_set.lo"),
                               detail::get_vec(setj.at("hi"), cfg.d, "feasible_set.hi"));
  } else {
    throw ConfigError("feasible_set.kind must be ball or box");
  }

  const json& bound = root.contains("bound") ? root.at("bound") : json::object();
  detail::check_keys(bound, {"kind", "mu", "C", "alpha"}, "bound");
  const std::string bk = detail::get_or<std::string>(bound, "kind", "const_step_avg");
  if (bk == "last_iterate")
    cfg.bound_kind = BoundKind::LastIterate;
  else if (bk == "const_step_avg")
    cfg.bound_kind = BoundKind::ConstStepAvg;
  else if (bk == "nedic_lee_avg")
    cfg.bound_kind = BoundKind::NedicLeeAvg;
  else if (bk == "quadratic_avg")
    cfg.bound_kind = BoundKind::QuadraticAvg;
  else if (bk == "closed_form_d")
    cfg.bound_kind = BoundKind::ClosedFormD;
  else
    throw ConfigError("bound.kind unknown: " + bk);
  cfg.mu = detail::get_or<double>(bound, "mu", 0.002);
  cfg.C = detail::get_or<double>(bound, "C", 0.5);
  cfg.alpha = detail::get_or<double>(bound, "alpha", 0.75);

  const json& drift = root.contains("drift") ? root.at("drift") : json::object();
  detail::check_keys(drift, {"method", "mode", "model", "W", "tn", "ipm_scale"}, "drift");
  const std::string dm = detail::get_or<std::string>(drift, "method", "direct");
  if (dm == "direct")
    cfg.drift_method = DriftMethod::Direct;
  else if (dm == "ipm")
    cfg.drift_method = DriftMethod::Ipm;
  else
    throw ConfigError("drift.method must be direct or ipm");
  const std::string mode = detail::get_or<std::string>(drift, "mode", "practical");
  if (mode == "practical")
    cfg.drift_mode = DriftMode::Practical;
  else if (mode == "certified")
    cfg.drift_mode = DriftMode::Certified;
  else
    throw ConfigError("drift.mode must be practical or certified");
  const std::string model = detail::get_or<std::string>(drift, "model", "constant");
  if (model == "constant")
    cfg.drift_model = DriftModel::Constant;
  else if (model == "bounded")
    cfg.drift_model = DriftModel::Bounded;
  else
    throw ConfigError("drift.model must be constant or bounded");
  cfg.W = detail::get_or<int>(drift, "W", 3);
  if (cfg.W < 1) throw ConfigError("drift.W must be >= 1");
  cfg.ipm_scale = detail::get_or<double>(drift, "ipm_scale", 1.0);
  if (drift.contains("tn")) {
    detail::check_keys(drift.at("tn"), {"c", "eta"}, "drift.tn");
    cfg.tn_schedule = TnSchedule(detail::get_or<double>(drift.at("tn"), "c", 0.5),
                                 detail::get_or<double>(drift.at("tn"), "eta", 0.375));
  }

  const json& psi = root.contains("psi") ? root.at("psi") : json::object();
  detail::check_keys(psi, {"source", "estimator", "m", "M", "A", "B", "Cg", "LG"}, "psi");
  const std::string src = detail::get_or<std::string>(psi, "source", "known");
  if (src == "known") {
    cfg.psi_source = PsiSource::Known;
    cfg.psi.m = detail::get_num(psi, "m", "psi");
    cfg.psi.M = detail::get_num(psi, "M", "psi");
    cfg.psi.A = detail::get_num(psi, "A", "psi");
    cfg.psi.B = detail::get_num(psi, "B", "psi");
  } else if (src == "estimated") {
    cfg.psi_source = PsiSource::Estimated;
    const std::string est = detail::get_or<std::string>(psi, "estimator", "quadratic");
    if (est == "quadratic")
      cfg.psi_estimator = PsiEstimator::Quadratic;
    else if (est == "hessian_grid")
      cfg.psi_estimator = PsiEstimator::HessianGrid;
    else if (est == "hessian_eigen")
      cfg.psi_estimator = PsiEstimator::HessianEigen;
    else if (est == "heuristic")
      cfg.psi_estimator = PsiEstimator::Heuristic;
    else
      throw ConfigError("psi.estimator unknown: " + est);
  } else {
    throw ConfigError("psi.source must be known or estimated");
  }
  cfg.psi.Cg = detail::get_or<double>(psi, "Cg", kNaN);
  cfg.psi.LG = detail::get_or<double>(psi, "LG", kNaN);
  cfg.psi.diam2 = cfg.set.diameter2();

  const std::string pol = detail::get_or<std::string>(root, "policy", "no_update");
  if (pol == "known_rho")
    cfg.policy = Policy::KnownRho;
  else if (pol == "update_past")
    cfg.policy = Policy::UpdatePast;
  else if (pol == "no_update")
    cfg.policy = Policy::NoUpdate;
  else
    throw ConfigError("policy unknown: " + pol);

  if (root.contains("seeds")) {
    for (const auto& s : root.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
  } else {
    for (std::uint64_t s = 1; s <= 20; ++s) cfg.seeds.push_back(s);
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds must be nonempty");
  cfg.K_max = detail::get_or<int>(root, "K_max", 1000000);
  cfg.bootstrap_K = detail::get_or<int>(root, "bootstrap_K", 0);
  cfg.test_batch = detail::get_or<int>(root, "test_batch", 200);
  cfg.workers = detail::get_or<int>(root, "workers", 1);
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (cfg.psi_source == PsiSource::Estimated && cfg.bootstrap_K < 1)
    throw ConfigError("estimated psi requires a fixed bootstrap_K");
  if (cfg.policy == Policy::KnownRho && cfg.family != TaskFamily::Regression)
    throw ConfigError("known_rho policy needs the regression family's declared rho");

  // effective configuration with all defaults resolved
  json echo;
  echo["task"] = {{"family", family},
                  {"d", cfg.d},
                  {"lambda", cfg.lambda},
                  {"N", cfg.N},
                  {"seed", cfg.task_seed}};
  if (cfg.family == TaskFamily::Regression) {
    echo["task"]["sigma_w2"] = cfg.sigma_w2;
    echo["task"]["rho"] = cfg.rho;
    if (std::isfinite(cfg.r1_norm)) echo["task"]["r1_norm"] = cfg.r1_norm;
  } else {
    echo["task"]["sigma2"] = cfg.sigma2;
    echo["task"]["arc_step"] = cfg.arc_step;
  }
  echo["target_eps"] = cfg.target_eps;
  if (cfg.set.kind == SetKind::Ball)
    echo["feasible_set"] = {{"kind", "ball"}, {"center", cfg.set.center},
                            {"radius", cfg.set.radius}};
  else
    echo["feasible_set"] = {{"kind", "box"}, {"lo", cfg.set.lo}, {"hi", cfg.set.hi}};
  echo["bound"] = {{"kind", to_string(cfg.bound_kind)}, {"mu", cfg.mu}, {"C", cfg.C},
                   {"alpha", cfg.alpha}};
  echo["drift"] = {{"method", cfg.drift_method == DriftMethod::Direct ? "direct" : "ipm"},
                   {"mode", cfg.drift_mode == DriftMode::Practical ? "practical" : "certified"},
                   {"model", cfg.drift_model == DriftModel::Constant ? "constant" : "bounded"},
                   {"W", cfg.W},
                   {"ipm_scale", cfg.ipm_scale},
                   {"tn", {{"c", cfg.tn_schedule.c}, {"eta", cfg.tn_schedule.eta}}}};
  echo["psi"] = {{"source", src}};
  if (cfg.psi_source == PsiSource::Known) {
    echo["psi"]["m"] = cfg.psi.m;
    echo["psi"]["M"] = cfg.psi.M;
    echo["psi"]["A"] = cfg.psi.A;
    echo["psi"]["B"] = cfg.psi.B;
  } else {
    echo["psi"]["estimator"] = detail::get_or<std::string>(psi, "estimator", "quadratic");
  }
  if (std::isfinite(cfg.psi.Cg)) echo["psi"]["Cg"] = cfg.psi.Cg;
  if (std::isfinite(cfg.psi.LG)) echo["psi"]["LG"] = cfg.psi.LG;
  echo["policy"] = to_string(cfg.policy);
  echo["seeds"] = cfg.seeds;
  echo["K_max"] = cfg.K_max;
  echo["bootstrap_K"] = cfg.bootstrap_K;
  echo["test_batch"] = cfg.test_batch;
  echo["workers"] = cfg.workers;
  cfg.echo = std::move(echo);
  return cfg;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(root);
}

// ---- one row per (seed, n) ----

struct RunRecord {
  std::uint64_t seed = 0;
  int n = 0;
  int K = 0;
  double rho_hat = kNaN;
  double rho_cert = kNaN;
  double eps_hat = kNaN;
  double gap = kNaN;       // exact gap when the task is analytic
  double test_loss = kNaN;
  double wall_ms = 0.0;
};

// wall_ms lives in a timing sidecar so reruns of the record files stay
// byte-identical
inline const std::vector<std::string>& run_record_header() {
  static const std::vector<std::string> h = {"seed",    "n",   "K",        "rho_hat",
                                             "rho_cert", "eps_hat", "gap", "test_loss"};
  return h;
}

inline std::vector<double> run_record_cells(const RunRecord& r) {
  return {static_cast<double>(r.seed), static_cast<double>(r.n), static_cast<double>(r.K),
          r.rho_hat, r.rho_cert, r.eps_hat, r.gap, r.test_loss};
}

struct SeedRunOutput {
  std::vector<RunRecord> records;
  std::vector<Vec> iterates;                                // x_n per n
  std::vector<std::vector<std::pair<double, int>>> scores;  // (score, label) per n
};

// ---- the sequential controller loop for one seed ----

namespace detail {

// training-sample source; synthetic tasks draw fresh, replay resamples a pool
using BatchSource = std::function<std::vector<Sample>(int n, int count, std::uint64_t seed)>;

struct LoopSpec {
  const LossModel* model = nullptr;
  BatchSource train;
  BatchSource test;
  int N = 0;
  int dim = 0;
  const RunConfig* cfg = nullptr;
  std::function<double(int, const Vec&)> exact_gap;  // empty when not analytic
  double known_rho = kNaN;
  bool classification = false;
};

inline PsiOneStep estimate_psi_mMB(const RunConfig& cfg, const LossModel& model,
                                   const std::vector<Sample>& batch) {
  PsiOneStep p;
  switch (cfg.psi_estimator) {
    case PsiEstimator::Quadratic: {
      auto [mt, Mt] = quadratic_specific(batch, cfg.lambda, cfg.d);
      p.m = mt;
      p.M = Mt;
      break;
    }
    case PsiEstimator::HessianGrid: {
      p.m = m_hat_hessian(model, batch, cfg.set, ProbeMode::Grid);
      p.M = M_hat_hessian(model, batch, cfg.set, ProbeMode::Grid);
      break;
    }
    case PsiEstimator::HessianEigen: {
      p.m = m_hat_hessian(model, batch, cfg.set, ProbeMode::EigenGradientDescent);
      p.M = M_hat_hessian(model, batch, cfg.set, ProbeMode::EigenGradientDescent);
      break;
    }
    case PsiEstimator::Heuristic: {
      auto [mt, Mt] = m_M_heuristic(model, batch, default_probes(cfg.set));
      p.m = mt;
      p.M = Mt;
      break;
    }
  }
  p.B = B_hat(std::max(p.M, 0.0));
  return p;
}

// Fills `out` incrementally so the caller can flush partial rows when a
// budget turns out infeasible mid-run.
inline void run_seed_loop(const LoopSpec& spec, std::uint64_t seed, SeedRunOutput& out) {
  const RunConfig& cfg = *spec.cfg;
  const LossModel& model = *spec.model;
  const double diam = cfg.set.diameter();
  const bool estimated = cfg.psi_source == PsiSource::Estimated;

  FunctionParams psi = cfg.psi;
  psi.diam2 = cfg.set.diameter2();
  std::vector<PsiOneStep> psi_history;
  bool psi_ready = !estimated;  // A-complete psi available

  CombineOptions combine_opts;
  combine_opts.mode = cfg.drift_mode;
  combine_opts.dim = spec.dim;

  const SampleMetric metric = [scale = cfg.ipm_scale](const Vec& a, const Vec& b) {
    return scale * dist2(a, b);
  };
  const HWindowEstimator hw = uniform_max_estimator();

  GapLedger ledger;
  ledger.policy = cfg.policy;
  std::vector<OneStepEstimate> one_steps;
  std::vector<int> budgets;

  Vec x_prev = project(cfg.set, cfg.set.centroid());
  double gnorm_prev = kNaN;
  std::vector<Sample> batch_prev;  // retained for the IPM estimator only
  double cert_prev = kNaN;         // certified drift value computed at n-1
  bool monotone_checked = false;   // the K search needs b nonincreasing in K

  for (int n = 1; n <= spec.N; ++n) {
    const auto t0 = std::chrono::steady_clock::now();

    // --- budget decision; uses only information available through n-1 ---
    // the drift-estimate policies can act from n = 3 (two tasks feed the
    // first estimate); with rho known the K* rule applies already at n = 2
    const bool bootstrap_step =
        n == 1 || (n == 2 && !(cfg.policy == Policy::KnownRho && psi_ready));
    int K = 0;
    double eps_hat = kNaN;
    if (bootstrap_step) {
      if (cfg.bootstrap_K >= 1) {
        K = cfg.bootstrap_K;
      } else if (psi_ready) {
        GapBound b0(cfg.bound_kind, schedule_for(cfg.bound_kind, cfg, psi.m), psi);
        K = k_initial(cfg.target_eps, [&](double d0, int k) { return b0(d0, k); }, psi.diam2,
                      cfg.K_max);
      } else {
        throw ConfigError("estimated psi requires bootstrap_K");
      }
    } else {
      if (!psi_ready) throw ConfigError("psi unavailable for the budget rule");
      GapBound b_prev(cfg.bound_kind, schedule_for(cfg.bound_kind, cfg, psi.m), psi);
      auto bound_fn = [&](double d0, int k) { return b_prev(d0, k); };
      if (!monotone_checked) {
        if (!bound_nonincreasing_in_K(bound_fn, psi.diam2))
          throw ConfigError("configured bound is not nonincreasing in K");
        monotone_checked = true;
      }
      double plug = kNaN;
      switch (cfg.policy) {
        case Policy::KnownRho: plug = spec.known_rho; break;
        case Policy::NoUpdate:
        case Policy::UpdatePast: plug = cert_prev; break;
      }
      if (!std::isfinite(plug)) throw ConfigError("drift value unavailable for budget rule");
      if (cfg.policy == Policy::UpdatePast) {
        K = choose_K_update_past(ledger, plug, cfg.target_eps, bound_fn, psi.m, cfg.K_max);
        const double ref = std::max(ledger.eps_hist.back(), cfg.target_eps);
        eps_hat = propagate_eps(ref, plug, K, bound_fn, psi.m);
      } else {
        K = choose_K_no_update(plug, cfg.target_eps, bound_fn, psi.m, cfg.K_max);
        eps_hat = propagate_eps(cfg.target_eps, plug, K, bound_fn, psi.m);
      }
    }

    // --- draw the task batch and, in estimated mode, read psi off it ---
    std::vector<Sample> batch = spec.train(n, K, seed);
    PsiOneStep psi_step;
    double prev_m_adj = kNaN, prev_M_adj = kNaN;
    if (estimated) {
      if (!psi_history.empty()) {
        const ParamEstimates prev = combine_params(psi_history, cfg.tn_schedule);
        prev_m_adj = prev.m_adjusted();
        prev_M_adj = prev.M_adjusted();
      }
      psi_step = estimate_psi_mMB(cfg, model, batch);
      // schedule and averaging only need (m, B); A joins after the run
      std::vector<PsiOneStep> tmp = psi_history;
      tmp.push_back(psi_step);
      const ParamEstimates partial = combine_params(tmp, cfg.tn_schedule);
      psi.m = partial.m_adjusted();
      psi.M = std::max(partial.M_adjusted(), psi.m);
      psi.B = std::max(partial.B_adjusted(), 0.0);
    }

    const StepSchedule schedule = schedule_for(cfg.bound_kind, cfg, psi.m);
    const AveragingScheme averaging = averaging_for(cfg.bound_kind, psi.m, psi.B);
    const SgdResult res =
        run_sgd(model, [&](int k) { return batch[k]; }, x_prev, K, schedule, averaging, cfg.set);
    const Vec& x_n = res.x_hat;
    const double gnorm_n = norm2(empirical_gradient(model, x_n, batch));

    if (estimated) {
      if (std::isfinite(prev_m_adj)) {
        psi_step.A = A_hat(model, x_n, batch, prev_m_adj, prev_M_adj);
      } else {
        // first task: no earlier adjusted pair exists, use its own
        const double t1 = cfg.tn_schedule.at(1);
        if (psi_step.m - t1 > 0.0)
          psi_step.A = A_hat(model, x_n, batch, psi_step.m - t1, psi_step.M + t1);
      }
      psi_history.push_back(psi_step);
      const ParamEstimates est = combine_params(psi_history, cfg.tn_schedule);
      FunctionParams base = cfg.psi;
      base.diam2 = cfg.set.diameter2();
      psi = est.adjusted(base);
      if (std::isfinite(psi.A)) psi_ready = true;
    }

    // --- one-step drift estimate and the running combination ---
    if (n >= 2) {
      OneStepEstimate est;
      if (cfg.drift_method == DriftMethod::Direct) {
        est = direct_one_step_from_norms(dist2(x_n, x_prev), gnorm_n, gnorm_prev, psi.m, diam, n);
      } else {
        est = ipm_one_step(batch, batch_prev, metric, psi.m, diam, n);
      }
      one_steps.push_back(est);
    }
    budgets.push_back(K);
    ledger.K_hist.push_back(K);

    double rho_hat = kNaN, rho_cert = kNaN;
    if (n >= 2) {
      GapBound b_now(cfg.bound_kind, schedule_for(cfg.bound_kind, cfg, psi.m), psi);
      combine_opts.bound = [&](double d0, int k) { return b_now(d0, k); };
      const DriftEstimate de =
          cfg.drift_model == DriftModel::Constant
              ? combine_constant(one_steps, budgets, psi, cfg.tn_schedule, combine_opts)
              : combine_bounded(one_steps, cfg.W, hw, budgets, psi, cfg.tn_schedule,
                                combine_opts);
      rho_hat = de.rho_hat;
      rho_cert = de.certified;
      cert_prev = de.certified;
    }

    if (bootstrap_step && psi_ready) {
      GapBound b_now(cfg.bound_kind, schedule_for(cfg.bound_kind, cfg, psi.m), psi);
      eps_hat = b_now(psi.diam2, K);
    }
    if (n == 1)
      ledger.eps1 = eps_hat;
    else if (n == 2)
      ledger.eps2 = eps_hat;
    ledger.eps_hist.push_back(eps_hat);

    // --- held-out evaluation on a fresh stream ---
    const std::vector<Sample> test = spec.test(n, cfg.test_batch, seed);
    const double test_loss = empirical_loss(model, x_n, test);
    if (spec.classification) {
      std::vector<std::pair<double, int>> sc;
      sc.reserve(test.size());
      for (const Sample& s : test) {
        double wx = 0.0;
        for (int i = 0; i < spec.dim; ++i) wx += s.z[i] * x_n[i];
        sc.emplace_back(wx, static_cast<int>(s.z[spec.dim]));
      }
      out.scores.push_back(std::move(sc));
    }

    RunRecord rec;
    rec.seed = seed;
    rec.n = n;
    rec.K = K;
    rec.rho_hat = rho_hat;
    rec.rho_cert = rho_cert;
    rec.eps_hat = eps_hat;
    if (spec.exact_gap) rec.gap = spec.exact_gap(n, x_n);
    rec.test_loss = test_loss;
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.records.push_back(rec);
    out.iterates.push_back(x_n);

    x_prev = x_n;
    gnorm_prev = gnorm_n;
    if (cfg.drift_method == DriftMethod::Ipm) batch_prev = std::move(batch);
  }
}

inline void write_seed_outputs(const fs::path& dir, std::uint64_t seed, const SeedRunOutput& out,
                               bool classification) {
  {
    CsvWriter w(dir / ("records_" + std::to_string(seed) + ".csv"), run_record_header());
    for (const RunRecord& r : out.records) w.write_row(run_record_cells(r));
  }
  {
    CsvWriter w(dir / ("timings_" + std::to_string(seed) + ".csv"), {"seed", "n", "wall_ms"});
    for (const RunRecord& r : out.records)
      w.write_row({static_cast<double>(r.seed), static_cast<double>(r.n), r.wall_ms});
  }
  if (!out.iterates.empty()) {
    std::vector<std::string> header = {"n"};
    const int d = static_cast<int>(out.iterates.front().size());
    for (int i = 0; i < d; ++i) header.push_back("x" + std::to_string(i));
    CsvWriter w(dir / ("iterates_" + std::to_string(seed) + ".csv"), header);
    for (std::size_t i = 0; i < out.iterates.size(); ++i) {
      std::vector<double> row = {static_cast<double>(out.records[i].n)};
      row.insert(row.end(), out.iterates[i].begin(), out.iterates[i].end());
      w.write_row(row);
    }
  }
  if (classification && !out.scores.empty()) {
    CsvWriter w(dir / ("scores_" + std::to_string(seed) + ".csv"), {"n", "score", "label"});
    for (std::size_t i = 0; i < out.scores.size(); ++i)
      for (const auto& [score, label] : out.scores[i])
        w.write_row({static_cast<double>(out.records[i].n), score, static_cast<double>(label)});
  }
}

// fan seeds out to a small worker pool; each worker owns its own files
template <class Fn>
void for_each_seed(const std::vector<std::uint64_t>& seeds, int workers, Fn&& fn) {
  const int nw = std::max(1, std::min<int>(workers, static_cast<int>(seeds.size())));
  if (nw == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::mutex err_mu;
  std::exception_ptr first_error;
  for (int t = 0; t < nw; ++t)
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= seeds.size()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// ---- aggregation ----

struct AggregateRow {
  int n = 0;
  MeanSE K, rho_hat, rho_cert, eps_hat, gap, test_loss;
};

inline std::vector<AggregateRow> aggregate_records(
    const std::vector<std::vector<RunRecord>>& per_seed) {
  std::map<int, std::array<Vec, 6>> cols;
  for (const auto& rows : per_seed)
    for (const RunRecord& r : rows) {
      auto& c = cols[r.n];
      c[0].push_back(static_cast<double>(r.K));
      if (std::isfinite(r.rho_hat)) c[1].push_back(r.rho_hat);
      if (std::isfinite(r.rho_cert)) c[2].push_back(r.rho_cert);
      if (std::isfinite(r.eps_hat)) c[3].push_back(r.eps_hat);
      if (std::isfinite(r.gap)) c[4].push_back(r.gap);
      if (std::isfinite(r.test_loss)) c[5].push_back(r.test_loss);
    }
  std::vector<AggregateRow> out;
  for (auto& [n, c] : cols) {
    AggregateRow row;
    row.n = n;
    row.K = mean_se(c[0]);
    row.rho_hat = mean_se(c[1]);
    row.rho_cert = mean_se(c[2]);
    row.eps_hat = mean_se(c[3]);
    row.gap = mean_se(c[4]);
    row.test_loss = mean_se(c[5]);
    out.push_back(row);
  }
  return out;
}

inline void write_aggregate(const fs::path& path, const std::vector<AggregateRow>& rows) {
  CsvWriter w(path, {"n", "K_mean", "K_se", "rho_hat_mean", "rho_hat_se", "rho_cert_mean",
                     "rho_cert_se", "eps_hat_mean", "eps_hat_se", "gap_mean", "gap_se",
                     "test_loss_mean", "test_loss_se"});
  for (const AggregateRow& r : rows) {
    auto m = [](const MeanSE& x) { return x.count ? x.mean : kNaN; };
    auto s = [](const MeanSE& x) { return x.count ? x.se : kNaN; };
    w.write_row({static_cast<double>(r.n), m(r.K), s(r.K), m(r.rho_hat), s(r.rho_hat),
                 m(r.rho_cert), s(r.rho_cert), m(r.eps_hat), s(r.eps_hat), m(r.gap), s(r.gap),
                 m(r.test_loss), s(r.test_loss)});
  }
}

// ---- run: synthetic experiment driver ----

inline std::unique_ptr<TaskSequence> build_task(const RunConfig& cfg) {
  if (cfg.family == TaskFamily::Regression)
    return std::make_unique<RegressionSequence>(cfg.d, cfg.sigma_w2, cfg.lambda, cfg.rho, cfg.N,
                                                cfg.task_seed, cfg.r1_norm);
  return std::make_unique<ClassificationSequence>(cfg.d, cfg.sigma2, cfg.lambda, cfg.N,
                                                  cfg.arc_step, cfg.task_seed);
}

// Runs every seed, writes per-seed CSVs, the aggregate, and the effective
// config echo into out_dir.  On an infeasible budget the partial logs are
// flushed before the error propagates.
inline void run(const RunConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream echo(out_dir / "config_echo.json");
    echo << cfg.echo.dump(2) << "\n";
  }
  const std::unique_ptr<TaskSequence> task = build_task(cfg);

  detail::LoopSpec spec;
  spec.model = &task->loss_model();
  spec.N = cfg.N;
  spec.dim = cfg.d;
  spec.cfg = &cfg;
  spec.classification = cfg.family == TaskFamily::Classification;
  spec.train = [&](int n, int count, std::uint64_t seed) {
    std::vector<Sample> b;
    b.reserve(count);
    for (int k = 0; k < count; ++k) b.push_back(task->sample(n, k, seed, 0));
    return b;
  };
  spec.test = [&](int n, int count, std::uint64_t seed) {
    std::vector<Sample> b;
    b.reserve(count);
    for (int k = 0; k < count; ++k) b.push_back(task->sample(n, k, seed, 1));
    return b;
  };
  if (task->has_analytic())
    spec.exact_gap = [&](int n, const Vec& x) { return task->exact_gap(n, x); };
  if (cfg.family == TaskFamily::Regression) spec.known_rho = cfg.rho;

  std::vector<std::vector<RunRecord>> collected(cfg.seeds.size());
  std::mutex abort_mu;
  std::exception_ptr abort_error;

  detail::for_each_seed(cfg.seeds, cfg.workers, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    SeedRunOutput out;
    try {
      detail::run_seed_loop(spec, seed, out);
    } catch (const InfeasibleBudget&) {
      detail::write_seed_outputs(out_dir, seed, out, spec.classification);
      collected[i] = std::move(out.records);
      std::lock_guard<std::mutex> lk(abort_mu);
      if (!abort_error) abort_error = std::current_exception();
      return;
    }
    detail::write_seed_outputs(out_dir, seed, out, spec.classification);
    collected[i] = std::move(out.records);
  });
  write_aggregate(out_dir / "aggregate.csv", aggregate_records(collected));
  if (abort_error) std::rethrow_exception(abort_error);
}

// ---- CSV replay ----

struct ReplaySchema {
  std::string period_column;
  std::vector<std::string> feature_columns;
  std::string target_column;
  double train_fraction = 0.8;
};

struct ReplayData {
  std::vector<std::string> period_labels;    // order of first appearance
  std::vector<std::vector<Sample>> periods;  // z = (features..., target)
};

inline ReplayData load_replay_csv(const fs::path& path, const ReplaySchema& schema) {
  const CsvTable t = read_csv(path);
  const int pcol = t.column(schema.period_column);
  const int ycol = t.column(schema.target_column);
  std::vector<int> fcols;
  for (const auto& c : schema.feature_columns) fcols.push_back(t.column(c));
  ReplayData data;
  std::map<std::string, int> index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& label = t.rows[r][pcol];
    auto it = index.find(label);
    if (it == index.end()) {
      it = index.emplace(label, static_cast<int>(data.periods.size())).first;
      data.period_labels.push_back(label);
      data.periods.emplace_back();
    }
    Sample s;
    for (int fc : fcols) s.z.push_back(t.num(r, fc));
    s.z.push_back(t.num(r, ycol));
    data.periods[it->second].push_back(std::move(s));
  }
  if (data.periods.empty()) throw DataError("replay csv has no rows");
  return data;
}

namespace detail {

// draw samples from the pool without replacement, reshuffling when a pass is
// exhausted
struct PoolSampler {
  const std::vector<Sample>* pool;
  std::vector<int> order;
  std::size_t pos = 0;
  Rng rng;

  PoolSampler(const std::vector<Sample>& p, std::uint64_t seed)
      : pool(&p), rng(Rng::from_keys(seed, 0x706f6f6cULL)) {
    order.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) order[i] = static_cast<int>(i);
    shuffle();
  }

  void shuffle() {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(static_cast<int>(i))]);
    pos = 0;
  }

  std::vector<Sample> draw(long count) {
    std::vector<Sample> out;
    out.reserve(count);
    for (long k = 0; k < count; ++k) {
      if (pos >= order.size()) shuffle();
      out.push_back((*pool)[order[pos++]]);
    }
    return out;
  }
};

}  // namespace detail

// Per-period sequential run over a replayed CSV with a seeded train/test
// split, plus the all-samples-up-front comparison arm.
inline void replay_csv(const fs::path& csv_path, const ReplaySchema& schema, const RunConfig& cfg,
                       const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const ReplayData data = load_replay_csv(csv_path, schema);
  const int N = static_cast<int>(data.periods.size());
  const int d = static_cast<int>(schema.feature_columns.size());
  if (d != cfg.d) throw ConfigError("config d must match the number of feature columns");

  {
    json echo = cfg.echo;
    echo["replay"] = {{"csv", csv_path.string()},
                      {"period_column", schema.period_column},
                      {"feature_columns", schema.feature_columns},
                      {"target_column", schema.target_column},
                      {"train_fraction", schema.train_fraction},
                      {"periods", data.period_labels}};
    echo["task"]["N"] = N;
    std::ofstream out(out_dir / "config_echo.json");
    out << echo.dump(2) << "\n";
  }

  std::unique_ptr<LossModel> model;
  if (cfg.family == TaskFamily::Regression)
    model = std::make_unique<PenalizedQuadraticLoss>(d, cfg.lambda);
  else
    model = std::make_unique<SmoothedHingeLoss>(d, cfg.lambda);

  std::vector<std::vector<RunRecord>> collected(cfg.seeds.size());
  std::exception_ptr abort_error;
  std::mutex abort_mu;

  detail::for_each_seed(cfg.seeds, cfg.workers, [&](std::size_t si) {
    const std::uint64_t seed = cfg.seeds[si];
    // per-period split, reseeded per run so averaging over runs resamples
    std::vector<std::vector<Sample>> train(N), test(N);
    for (int n = 0; n < N; ++n) {
      const auto& pool = data.periods[n];
      std::vector<int> order(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) order[i] = static_cast<int>(i);
      Rng rng = Rng::from_keys(seed, 0x73706c69ULL, static_cast<std::uint64_t>(n));
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(static_cast<int>(i))]);
      const std::size_t ntrain =
          static_cast<std::size_t>(schema.train_fraction * static_cast<double>(pool.size()));
      for (std::size_t i = 0; i < order.size(); ++i)
        (i < ntrain ? train[n] : test[n]).push_back(pool[order[i]]);
      if (train[n].empty() || test[n].empty())
        throw DataError("period '" + data.period_labels[n] + "' empty after the train/test split");
    }

    std::vector<std::unique_ptr<detail::PoolSampler>> samplers(N);
    detail::LoopSpec spec;
    spec.model = model.get();
    spec.N = N;
    spec.dim = d;
    spec.cfg = &cfg;
    spec.classification = cfg.family == TaskFamily::Classification;
    spec.train = [&](int n, int count, std::uint64_t s) {
      if (!samplers[n - 1])
        samplers[n - 1] = std::make_unique<detail::PoolSampler>(
            train[n - 1], s ^ (0x64726177ULL + static_cast<std::uint64_t>(n)));
      return samplers[n - 1]->draw(count);
    };
    spec.test = [&](int n, int /*count*/, std::uint64_t) { return test[n - 1]; };

    SeedRunOutput out;
    bool aborted = false;
    try {
      detail::run_seed_loop(spec, seed, out);
    } catch (const InfeasibleBudget&) {
      aborted = true;
      std::lock_guard<std::mutex> lk(abort_mu);
      if (!abort_error) abort_error = std::current_exception();
    }
    detail::write_seed_outputs(out_dir, seed, out, spec.classification);
    collected[si] = out.records;
    if (aborted) return;

    // comparison arm: one model fitted at the first period with the same
    // total sample count, evaluated on every period's held-out split
    long total = 0;
    for (const RunRecord& r : out.records) total += r.K;
    detail::PoolSampler upfront_sampler(train[0], seed ^ 0x75706672ULL);
    std::vector<Sample> upfront_batch = upfront_sampler.draw(total);
    const double m_arm = cfg.psi_source == PsiSource::Known ? cfg.psi.m : 1.0;
    const double B_arm = cfg.psi_source == PsiSource::Known ? cfg.psi.B : 0.0;
    const SgdResult up = run_sgd(
        *model, [&](int k) { return upfront_batch[k]; }, project(cfg.set, cfg.set.centroid()),
        static_cast<int>(total), schedule_for(cfg.bound_kind, cfg, m_arm),
        averaging_for(cfg.bound_kind, m_arm, B_arm), cfg.set);
    CsvWriter w(out_dir / ("upfront_" + std::to_string(seed) + ".csv"),
                {"n", "test_loss_upfront"});
    for (int n = 1; n <= N; ++n)
      w.write_row({static_cast<double>(n), empirical_loss(*model, up.x_hat, test[n - 1])});
  });

  write_aggregate(out_dir / "aggregate.csv", aggregate_records(collected));
  if (abort_error) std::rethrow_exception(abort_error);
}

// ---- ROC ----

struct RocPoint {
  double threshold, fpr, tpr;
};

// threshold sweep over scores with labels in {-1, +1}
inline std::vector<RocPoint> roc_curve(std::vector<std::pair<double, int>> scored) {
  if (scored.empty()) throw DataError("roc: no scores");
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  double pos = 0, neg = 0;
  for (const auto& [s, y] : scored) (y > 0 ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) throw DataError("roc: needs both classes");
  std::vector<RocPoint> curve;
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    (scored[i].second > 0 ? tp : fp) += 1.0;
    if (i + 1 < scored.size() && scored[i + 1].first == scored[i].first) continue;
    curve.push_back({scored[i].first, fp / neg, tp / pos});
  }
  return curve;
}

inline double roc_auc(const std::vector<RocPoint>& curve) {
  double auc = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    auc += 0.5 * (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr);
  return auc;
}

// ---- plot data emission ----

inline void emit_plotdata(const fs::path& run_dir, const std::vector<int>& roc_periods = {}) {
  const fs::path plots = run_dir / "plots";
  fs::create_directories(plots);
  std::ifstream ein(run_dir / "config_echo.json");
  if (!ein) throw DataError("run directory lacks config_echo.json");
  json echo;
  ein >> echo;
  const CsvTable agg = read_csv(run_dir / "aggregate.csv");

  const double eps = echo.at("target_eps").get<double>();
  const bool regression = echo.at("task").at("family").get<std::string>() == "regression";
  const double rho_true = regression && echo.at("task").contains("rho")
                              ? echo.at("task").at("rho").get<double>()
                              : kNaN;

  {
    CsvWriter w(plots / "rho_estimate.csv", {"n", "rho_hat_mean", "rho_cert_mean", "rho_true"});
    const int cn = agg.column("n"), ch = agg.column("rho_hat_mean"),
              cc = agg.column("rho_cert_mean");
    for (std::size_t r = 0; r < agg.rows.size(); ++r)
      w.write_row({agg.num(r, cn), agg.num(r, ch), agg.num(r, cc), rho_true});
  }
  {
    CsvWriter w(plots / "budgets.csv", {"n", "K_mean", "K_se"});
    const int cn = agg.column("n"), ck = agg.column("K_mean"), cs = agg.column("K_se");
    for (std::size_t r = 0; r < agg.rows.size(); ++r)
      w.write_row({agg.num(r, cn), agg.num(r, ck), agg.num(r, cs)});
  }
  {
    CsvWriter w(plots / "mean_gap.csv", {"n", "gap_mean", "gap_se", "eps_hat_mean", "eps_target"});
    const int cn = agg.column("n"), cg = agg.column("gap_mean"), cs = agg.column("gap_se"),
              ce = agg.column("eps_hat_mean");
    for (std::size_t r = 0; r < agg.rows.size(); ++r)
      w.write_row({agg.num(r, cn), agg.num(r, cg), agg.num(r, cs), agg.num(r, ce), eps});
  }
  {
    // adaptive arm always; the up-front arm when replay outputs exist
    std::map<int, Vec> upfront;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("upfront_", 0) != 0) continue;
      const CsvTable t = read_csv(entry.path());
      const int cn = t.column("n"), cl = t.column("test_loss_upfront");
      for (std::size_t r = 0; r < t.rows.size(); ++r)
        upfront[static_cast<int>(t.num(r, cn))].push_back(t.num(r, cl));
    }
    CsvWriter w(plots / "test_loss.csv",
                {"n", "test_loss_mean", "test_loss_se", "test_loss_upfront_mean"});
    const int cn = agg.column("n"), cl = agg.column("test_loss_mean"),
              cs = agg.column("test_loss_se");
    for (std::size_t r = 0; r < agg.rows.size(); ++r) {
      const int n = static_cast<int>(agg.num(r, cn));
      const double up = upfront.count(n) ? mean_se(upfront[n]).mean : kNaN;
      w.write_row({static_cast<double>(n), agg.num(r, cl), agg.num(r, cs), up});
    }
  }

  if (!roc_periods.empty()) {
    std::map<int, std::vector<std::pair<double, int>>> pooled;
    bool any = false;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("scores_", 0) != 0) continue;
      any = true;
      const CsvTable t = read_csv(entry.path());
      const int cn = t.column("n"), cscore = t.column("score"), cy = t.column("label");
      for (std::size_t r = 0; r < t.rows.size(); ++r)
        pooled[static_cast<int>(t.num(r, cn))].emplace_back(t.num(r, cscore),
                                                            static_cast<int>(t.num(r, cy)));
    }
    if (!any) throw DataError("roc requested but the run has no score files");
    for (int n : roc_periods) {
      if (!pooled.count(n)) throw DataError("roc: period " + std::to_string(n) + " not in run");
      CsvWriter w(plots / ("roc_n" + std::to_string(n) + ".csv"), {"threshold", "fpr", "tpr"});
      for (const RocPoint& p : roc_curve(pooled[n])) w.write_row({p.threshold, p.fpr, p.tpr});
    }
  }
}

// ---- Monte Carlo dominance validation of the bound family ----

// validation family: l(x, z) = 1/2 sum_i h_i (x_i - z_i)^2 with z drawn
// N(x*, sigma^2 I); psi is exact, the gap is exact, and the distance
// recursion is tight, which makes it a sharp falsification probe.
struct CenteredQuadraticLoss final : LossModel {
  Vec h;

  explicit CenteredQuadraticLoss(Vec curvatures) : h(std::move(curvatures)) {
    for (double v : h)
      if (!(v > 0.0)) throw std::invalid_argument("CenteredQuadraticLoss: curvatures > 0");
  }

  int dim() const override { return static_cast<int>(h.size()); }

  double loss(const Vec& x, const Vec& z) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * (x[i] - z[i]) * (x[i] - z[i]);
    return 0.5 * s;
  }

  Vec grad(const Vec& x, const Vec& z) const override {
    Vec g(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) g[i] = h[i] * (x[i] - z[i]);
    return g;
  }

  bool has_hessian() const override { return true; }

  Matrix hessian(const Vec& /*x*/, const Vec& /*z*/) const override {
    Matrix m(dim());
    for (int i = 0; i < dim(); ++i) m(i, i) = h[i];
    return m;
  }
};

struct DominanceCell {
  BoundKind kind;
  int K = 0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct DominanceSetup {
  int d = 4;
  double sigma = 0.5;
  double d0 = 1.0;
  int replicates = 1000;
  std::uint64_t seed = 2024;
  double mu_last = 0.15;      // last-iterate constant step
  double mu_avg = 0.1;        // const-step averaging
  double C = 0.5;             // power schedule for the quadratic average
  double alpha = 0.75;
  bool halve_true_m = false;  // falsification: weaken one true curvature only
};

// claimed psi for the validation family: m = M = 1, A = d sigma^2, B = 1
inline FunctionParams dominance_claimed_psi(const DominanceSetup& s) {
  FunctionParams p;
  p.m = 1.0;
  p.M = 1.0;
  p.A = s.d * s.sigma * s.sigma;
  p.B = 1.0;
  p.diam2 = 16.0 * s.d0;
  return p;
}

inline std::vector<DominanceCell> dominance_suite(const DominanceSetup& setup,
                                                  const std::vector<int>& Ks = {10, 100, 1000}) {
  const FunctionParams psi = dominance_claimed_psi(setup);
  Vec curvatures(setup.d, 1.0);
  if (setup.halve_true_m) curvatures[0] = 0.5;
  const CenteredQuadraticLoss model(curvatures);

  const Vec x_star(setup.d, 0.0);
  const FeasibleSet set = FeasibleSet::ball(x_star, 2.0 * std::sqrt(setup.d0) + 1.0);
  Vec x0 = x_star;
  x0[0] += std::sqrt(setup.d0);  // offset along the weakened coordinate

  struct Variant {
    BoundKind kind;
    StepSchedule sched;
  };
  const std::vector<Variant> variants = {
      {BoundKind::LastIterate, StepSchedule::constant(setup.mu_last)},
      {BoundKind::ConstStepAvg, StepSchedule::constant(setup.mu_avg)},
      {BoundKind::NedicLeeAvg, StepSchedule::inv_strong(psi.m)},
      {BoundKind::QuadraticAvg, StepSchedule::power(setup.C, setup.alpha)},
  };

  std::vector<DominanceCell> cells;
  for (const Variant& v : variants) {
    const GapBound bound(v.kind, v.sched, psi);
    for (int K : Ks) {
      Vec gaps;
      gaps.reserve(setup.replicates);
      for (int rep = 0; rep < setup.replicates; ++rep) {
        Rng rng = Rng::from_keys(setup.seed, static_cast<std::uint64_t>(v.kind),
                                 static_cast<std::uint64_t>(K), static_cast<std::uint64_t>(rep));
        auto sampler = [&](int) {
          Sample s;
          s.z.resize(setup.d);
          for (int i = 0; i < setup.d; ++i) s.z[i] = x_star[i] + setup.sigma * rng.gaussian();
          return s;
        };
        const SgdResult res = run_sgd(model, sampler, x0, K, bound.matching_schedule(),
                                      bound.matching_averaging(), set);
        double g = 0.0;
        for (int i = 0; i < setup.d; ++i)
          g += curvatures[i] * (res.x_hat[i] - x_star[i]) * (res.x_hat[i] - x_star[i]);
        gaps.push_back(0.5 * g);
      }
      DominanceCell cell;
      cell.kind = v.kind;
      cell.K = K;
      const MeanSE ms = mean_se(gaps);
      cell.mc_mean = ms.mean;
      cell.mc_se = ms.se;
      cell.bound = bound(setup.d0, K);
      cell.pass = cell.mc_mean <= cell.bound + 3.0 * cell.mc_se;
      cells.push_back(cell);
    }
  }
  return cells;
}

inline bool validate_bounds(const DominanceSetup& setup, const fs::path& out_path,
                            const std::vector<int>& Ks = {10, 100, 1000}) {
  const std::vector<DominanceCell> cells = dominance_suite(setup, Ks);
  CsvWriter w(out_path, {"kind", "K", "mc_mean", "mc_se", "bound", "pass"});
  bool all = true;
  for (const DominanceCell& c : cells) {
    w.write_row_strings({to_string(c.kind), std::to_string(c.K), fmt_double(c.mc_mean),
                         fmt_double(c.mc_se), fmt_double(c.bound), c.pass ? "1" : "0"});
    all = all && c.pass;
  }
  return all;
}

}  // namespace driftk
