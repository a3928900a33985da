// driftk command line: configure, run, and post-process drifting-task
// experiments.  Exit codes: 0 success, 2 config error, 3 infeasible budget,
// 4 data error.

#include <iostream>

#include <CLI11.hpp>

#include "driftk/driftk.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& list) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    seeds.push_back(std::stoull(tok));
  }
  if (seeds.empty()) throw driftk::ConfigError("--seeds: empty list");
  return seeds;
}

std::vector<int> parse_int_list(const std::string& list) {
  std::vector<int> xs;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    xs.push_back(std::stoi(tok));
  }
  return xs;
}

void apply_overrides(driftk::RunConfig& cfg, const std::string& seeds, int workers) {
  if (!seeds.empty()) {
    cfg.seeds = parse_seed_list(seeds);
    cfg.echo["seeds"] = cfg.seeds;
  }
  if (workers > 0) {
    cfg.workers = workers;
    cfg.echo["workers"] = workers;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive sample budgeting for sequences of drifting stochastic tasks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds, csv_path, period_col, feature_cols, target_col;
  std::string roc_list;
  double train_fraction = 0.8;
  double fp_tol = 1e-12;
  int workers = 0;
  int replicates = 1000;
  std::uint64_t mc_seed = 2024;
  bool falsify_m = false;

  auto* run_cmd = app.add_subcommand("run", "run a synthetic experiment from a config file");
  run_cmd->add_option("--config", config_path, "config file (json)")->required();
  run_cmd->add_option("--out", out_dir, "output directory")->required();
  run_cmd->add_option("--seeds", seeds, "comma separated seed list override");
  run_cmd->add_option("--workers", workers, "worker pool size override");

  auto* replay_cmd = app.add_subcommand("replay", "replay an external CSV period by period");
  replay_cmd->add_option("--config", config_path, "config file (json)")->required();
  replay_cmd->add_option("--out", out_dir, "output directory")->required();
  replay_cmd->add_option("--csv", csv_path, "input csv")->required();
  replay_cmd->add_option("--period-col", period_col, "period column name")->required();
  replay_cmd->add_option("--feature-cols", feature_cols, "comma separated feature columns")
      ->required();
  replay_cmd->add_option("--target-col", target_col, "target column name")->required();
  replay_cmd->add_option("--train-fraction", train_fraction, "train split fraction (default 0.8)");
  replay_cmd->add_option("--seeds", seeds, "comma separated seed list override");
  replay_cmd->add_option("--workers", workers, "worker pool size override");

  auto* plot_cmd = app.add_subcommand("plotdata", "emit per-figure tables for a finished run");
  plot_cmd->add_option("--out", out_dir, "run directory")->required();
  plot_cmd->add_option("--roc", roc_list, "comma separated periods for ROC tables");

  auto* vb_cmd = app.add_subcommand("validate-bounds",
                                    "Monte Carlo dominance check of the bound family");
  vb_cmd->add_option("--out", out_dir, "output directory")->required();
  vb_cmd->add_option("--replicates", replicates, "SGD replicates per cell (default 1000)");
  vb_cmd->add_option("--seed", mc_seed, "Monte Carlo seed");
  vb_cmd->add_flag("--falsify-m", falsify_m,
                   "halve the problem's true strong convexity while keeping the claimed psi");

  auto* fp_cmd = app.add_subcommand("fixed-point",
                                    "print the propagation-map fixed point for a config");
  fp_cmd->add_option("--config", config_path, "config file (json)")->required();
  fp_cmd->add_option("--tol", fp_tol, "fixed point tolerance (default 1e-12)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      driftk::RunConfig cfg = driftk::load_config(config_path);
      apply_overrides(cfg, seeds, workers);
      driftk::run(cfg, out_dir);
      std::cout << "run complete: " << out_dir << "\n";
    } else if (replay_cmd->parsed()) {
      driftk::RunConfig cfg = driftk::load_config(config_path);
      apply_overrides(cfg, seeds, workers);
      driftk::ReplaySchema schema;
      schema.period_column = period_col;
      schema.target_column = target_col;
      std::stringstream ss(feature_cols);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) schema.feature_columns.push_back(tok);
      if (schema.feature_columns.empty())
        throw driftk::ConfigError("--feature-cols: empty list");
      schema.train_fraction = train_fraction;
      if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw driftk::ConfigError("--train-fraction must be in (0,1)");
      driftk::replay_csv(csv_path, schema, cfg, out_dir);
      std::cout << "replay complete: " << out_dir << "\n";
    } else if (plot_cmd->parsed()) {
      driftk::emit_plotdata(out_dir, parse_int_list(roc_list));
      std::cout << "plot data written to " << out_dir << "/plots\n";
    } else if (vb_cmd->parsed()) {
      driftk::DominanceSetup setup;
      setup.replicates = replicates;
      setup.seed = mc_seed;
      setup.halve_true_m = falsify_m;
      driftk::fs::create_directories(out_dir);
      const driftk::fs::path report = driftk::fs::path(out_dir) / "bound_validation.csv";
      const bool all_pass = driftk::validate_bounds(setup, report);
      std::cout << "report: " << report.string() << "\n";
      std::cout << (all_pass ? "all cells pass" : "dominance failure detected") << "\n";
    } else if (fp_cmd->parsed()) {
      const driftk::RunConfig cfg = driftk::load_config(config_path);
      if (cfg.psi_source != driftk::PsiSource::Known)
        throw driftk::ConfigError("fixed-point needs known psi");
      if (cfg.family != driftk::TaskFamily::Regression)
        throw driftk::ConfigError("fixed-point needs the regression family's declared rho");
      driftk::FunctionParams psi = cfg.psi;
      psi.diam2 = cfg.set.diameter2();
      const driftk::GapBound bound(cfg.bound_kind,
                                   driftk::schedule_for(cfg.bound_kind, cfg, psi.m), psi);
      const int K = driftk::k_star(
          cfg.target_eps, cfg.rho, [&](double d0, int k) { return bound(d0, k); }, psi.m,
          cfg.K_max);
      const driftk::Factorization f = bound.factorize(K);
      const driftk::PhiMap phi{f.alpha, f.beta, psi.m, cfg.rho};
      const driftk::FixedPointResult r = driftk::fixed_point(phi, fp_tol, cfg.target_eps);
      std::cout << "K* = " << K << "\n";
      std::cout << "v_bar = " << driftk::fmt_double(r.v_bar) << "\n";
      std::cout << "phi'(v_bar) = " << driftk::fmt_double(r.derivative) << "\n";
      std::cout << "iterations = " << r.iterations << (r.degenerate ? " (degenerate)" : "")
                << "\n";
    }
  } catch (const driftk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const driftk::InfeasibleBudget& e) {
    std::cerr << "infeasible budget: " << e.what() << "\n";
    return 3;
  } catch (const driftk::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
