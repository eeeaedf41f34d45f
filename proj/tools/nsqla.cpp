// Command-line front end: simulate, estimate, table, asymptotics.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nsqla/nsqla.hpp"

namespace
{

struct CommonOptions
{
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<unsigned> workers;
};

void add_common(CLI::App* cmd, CommonOptions& opts)
{
  cmd->add_option("-c,--config", opts.config_path, "Configuration file (key = value lines)");
  cmd->add_option("-s,--set", opts.overrides, "Override a configuration key, e.g. --set seed=7")->take_all();
  cmd->add_option("-w,--workers", opts.workers, "Worker threads (0 = all cores)");
}

nsqla::ExperimentConfig load_config(const CommonOptions& opts)
{
  nsqla::ExperimentConfig cfg;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) {
      throw nsqla::Error("cannot open configuration file '" + opts.config_path + "'");
    }
    cfg = nsqla::read_config(in, opts.config_path);
  }
  for (const auto& o : opts.overrides) {
    cfg.apply_override(o);
  }
  if (opts.workers) {
    cfg.workers = *opts.workers;
  }
  cfg.validate();
  return cfg;
}

/// Writes through `emit` to `path`, or to `fallback` when the path is empty.
template <class Emit>
void write_to(const std::string& path, std::ostream& fallback, Emit&& emit)
{
  if (path.empty()) {
    emit(fallback);
    return;
  }
  std::ofstream out(path);
  if (!out) {
    throw nsqla::Error("cannot write '" + path + "'");
  }
  emit(out);
  if (!out) {
    throw nsqla::Error("write to '" + path + "' failed");
  }
}

int run_simulate(const CommonOptions& opts)
{
  nsqla::ExperimentConfig cfg = load_config(opts);
  cfg.qmle = cfg.bayes = cfg.hy = false;
  const nsqla::SingleRun run = nsqla::run_single(cfg);
  write_to(cfg.dataset, std::cout, [&](std::ostream& os) { nsqla::write_observations(os, *run.obs); });
  if (!cfg.path_dump.empty()) {
    write_to(cfg.path_dump, std::cout, [&](std::ostream& os) { nsqla::write_path(os, *run.path); });
  }
  return 0;
}

int run_estimate(const CommonOptions& opts, const std::string& dataset_path)
{
  nsqla::ExperimentConfig cfg = load_config(opts);
  const std::string path = dataset_path.empty() ? cfg.dataset : dataset_path;
  std::optional<nsqla::ObservationSet> data;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) {
      throw nsqla::Error("cannot open dataset '" + path + "'");
    }
    data = nsqla::read_observations(in, path);
    if (data->horizon() != cfg.horizon) {
      cfg.horizon = data->horizon();
    }
  }
  const nsqla::SingleRun run = nsqla::run_single(cfg, std::move(data));
  if (run.path && !cfg.path_dump.empty()) {
    write_to(cfg.path_dump, std::cout, [&](std::ostream& os) { nsqla::write_path(os, *run.path); });
  }
  write_to(cfg.report, std::cout, [&](std::ostream& os) { nsqla::write_estimate_report(os, run.report); });
  return 0;
}

int run_table(const CommonOptions& opts)
{
  const nsqla::ExperimentConfig cfg = load_config(opts);
  const auto rows = nsqla::run_table(cfg);
  write_to(cfg.csv, std::cout, [&](std::ostream& os) { nsqla::write_table_csv(os, rows); });
  const auto cells = nsqla::summarize(rows, cfg.n_values);
  write_to(cfg.summary, cfg.csv.empty() ? std::cerr : std::cout,
           [&](std::ostream& os) { nsqla::write_summary(os, cells); });
  return 0;
}

int run_asymptotics(const CommonOptions& opts, const std::string& coefficients_out)
{
  const nsqla::ExperimentConfig cfg = load_config(opts);
  const nsqla::AsymptoticsReport report = nsqla::run_asymptotics(cfg);
  if (!coefficients_out.empty()) {
    write_to(coefficients_out, std::cout, [&](std::ostream& os) { nsqla::write_coefficients(os, report.coeffs); });
  }
  write_to(cfg.report, std::cout, [&](std::ostream& os) { nsqla::write_report(os, report, cfg.n_values); });
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Quasi-likelihood analysis of nonsynchronously observed bivariate diffusions"};
  app.require_subcommand(1);

  CommonOptions sim_opts, est_opts, table_opts, asym_opts;
  std::string dataset_path;
  std::string coefficients_out;

  auto* sim = app.add_subcommand("simulate", "Simulate one data set and write it (and optionally the fine path)");
  add_common(sim, sim_opts);
  auto* est = app.add_subcommand("estimate", "Estimate on a data set file or on a fresh simulation");
  add_common(est, est_opts);
  est->add_option("-d,--dataset", dataset_path, "Observation file 'coordinate time level'");
  auto* table = app.add_subcommand("table", "Monte Carlo table of estimates over replications and n values");
  add_common(table, table_opts);
  auto* asym = app.add_subcommand("asymptotics", "Sampling coefficients, Gamma, Gamma^-1, v and v0");
  add_common(asym, asym_opts);
  asym->add_option("--coefficients-out", coefficients_out, "Write the coefficient table here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      return run_simulate(sim_opts);
    }
    if (*est) {
      return run_estimate(est_opts, dataset_path);
    }
    if (*table) {
      return run_table(table_opts);
    }
    if (*asym) {
      return run_asymptotics(asym_opts, coefficients_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
