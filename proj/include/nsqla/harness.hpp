#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsqla/asymptotics.hpp"
#include "nsqla/config.hpp"
#include "nsqla/diffusion_model.hpp"
#include "nsqla/error.hpp"
#include "nsqla/estimators.hpp"
#include "nsqla/interval_grid.hpp"
#include "nsqla/parallel.hpp"
#include "nsqla/quasi_likelihood.hpp"
#include "nsqla/random.hpp"
#include "nsqla/simulation.hpp"
#include "nsqla/text_io.hpp"

namespace nsqla
{

inline DiffusionModel config_model(const ExperimentConfig& c)
{
  DiffusionModel model = triangular_model(ParamBox(c.box_lower, c.box_upper));
  if (c.drift != Eigen::Vector2d::Zero()) {
    const Eigen::Vector2d mu = c.drift;
    model = model.with_drift([mu](double, const Eigen::Vector2d&) { return mu; });
  }
  return model;
}

/// Observation schemes at scale n: Poisson with intensities lambda_k, or
/// equispaced with round(lambda_k n T) intervals.
inline std::pair<SamplingScheme, SamplingScheme> config_schemes(const ExperimentConfig& c, double n)
{
  if (c.scheme == "poisson") {
    return {SamplingScheme::poisson(c.lambda1, n, c.horizon), SamplingScheme::poisson(c.lambda2, n, c.horizon)};
  }
  const auto count = [&](double lambda) {
    return static_cast<std::size_t>(std::max(1.0, std::round(lambda * n * c.horizon)));
  };
  return {SamplingScheme::equispaced(count(c.lambda1), c.horizon, n),
          SamplingScheme::equispaced(count(c.lambda2), c.horizon, n)};
}

/// Random stream of replication `rep` at scale n.
inline Engine replication_engine(const ExperimentConfig& c, double n, std::uint64_t rep)
{
  return Engine(c.seed, stream_id(static_cast<std::uint64_t>(std::llround(n)), rep));
}

struct SimulatedData
{
  FinePath path;
  std::shared_ptr<const ObservationSet> obs;
};

/// Draws both grids, simulates the path on a fine grid refined by the
/// observation times, and observes it.
inline SimulatedData simulate_dataset(const ExperimentConfig& c, const DiffusionModel& model, double n, Engine& rng)
{
  const auto [s1, s2] = config_schemes(c, n);
  const IntervalGrid g1 = generate_grid(s1, rng);
  const IntervalGrid g2 = generate_grid(s2, rng);
  const double expected = std::max(s1.expected_count(), s2.expected_count());
  const auto fine = static_cast<std::size_t>(std::ceil(c.fine_steps_factor * std::max(1.0, expected)));
  std::vector<double> knots(g1.endpoints().begin(), g1.endpoints().end());
  knots.insert(knots.end(), g2.endpoints().begin(), g2.endpoints().end());
  SimulatedData d;
  d.path = simulate_path(model, c.sigma_star, c.horizon, fine, rng, knots);
  d.obs = std::make_shared<const ObservationSet>(observe(d.path, g1, g2));
  return d;
}

/// Runs every enabled estimator on one data set. The QMLE is also computed
/// when only the Bayes estimator is enabled, to center its quadrature window.
inline EstimateReport estimate_all(const std::shared_ptr<const ObservationSet>& obs, const DiffusionModel& model,
                                   const ExperimentConfig& c, Engine& rng)
{
  EstimateReport r;
  r.count1 = obs->grid1.size();
  r.count2 = obs->grid2.size();
  r.mesh = grid_mesh(obs->grid1, obs->grid2);
  r.sum1 = obs->incr1.sum();
  r.sum2 = obs->incr2.sum();
  if (c.qmle || c.bayes) {
    QuasiLikelihood ws(obs, model);
    const Eigen::VectorXd start = c.sigma_start.size() != 0 ? c.sigma_start : c.sigma_star;
    QmleResult fit = qmle(ws, start, rng);
    if (c.bayes) {
      BayesOptions opts;
      opts.nodes = c.bayes_nodes;
      opts.window = c.bayes_window;
      r.sigma_tilde = bayes(ws, fit.sigma_hat, opts);
    }
    if (c.qmle) {
      r.plugin = plugin_crosscov(fit.sigma_hat, obs->horizon());
      r.qmle = std::move(fit);
    }
  }
  if (c.hy) {
    r.hy = hayashi_yoshida(*obs);
  }
  return r;
}

inline void write_estimate_report(std::ostream& os, const EstimateReport& r)
{
  const auto vec = [](const Eigen::VectorXd& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      s += (i ? " " : "") + text::format_double(v[i]);
    }
    return s;
  };
  os << "count1 = " << r.count1 << '\n'
     << "count2 = " << r.count2 << '\n'
     << "mesh = " << text::format_double(r.mesh) << '\n'
     << "sum_incr1 = " << text::format_double(r.sum1) << '\n'
     << "sum_incr2 = " << text::format_double(r.sum2) << '\n';
  if (r.qmle) {
    os << "sigma_hat = " << vec(r.qmle->sigma_hat) << '\n'
       << "loglik = " << text::format_double(r.qmle->loglik) << '\n'
       << "iterations = " << r.qmle->iterations << '\n'
       << "converged = " << (r.qmle->converged ? "true" : "false") << '\n'
       << "on_boundary = " << (r.qmle->on_boundary ? "true" : "false") << '\n';
    for (const auto& w : r.qmle->warnings) {
      os << "warning = " << w << '\n';
    }
  }
  if (r.plugin) {
    os << "plugin = " << text::format_double(*r.plugin) << '\n';
  }
  if (r.sigma_tilde) {
    os << "sigma_tilde = " << vec(*r.sigma_tilde) << '\n';
  }
  if (r.hy) {
    os << "hy = " << text::format_double(*r.hy) << '\n';
  }
}

struct SingleRun
{
  std::shared_ptr<const ObservationSet> obs;
  std::optional<FinePath> path;
  EstimateReport report;
};

/// Estimates on `dataset` when given, otherwise on a fresh simulation at the
/// first configured n (replication 0).
inline SingleRun run_single(const ExperimentConfig& c, std::optional<ObservationSet> dataset = std::nullopt)
{
  c.validate();
  const DiffusionModel model = config_model(c);
  const double n = c.n_values.front();
  Engine rng = replication_engine(c, n, 0);
  SingleRun out;
  if (dataset) {
    out.obs = std::make_shared<const ObservationSet>(std::move(*dataset));
  } else {
    SimulatedData d = simulate_dataset(c, model, n, rng);
    out.obs = d.obs;
    out.path = std::move(d.path);
  }
  out.report = estimate_all(out.obs, model, c, rng);
  return out;
}

struct TableRow
{
  double n = 0.0;
  std::size_t rep = 0;
  Eigen::Vector3d sigma_hat = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  double plugin = std::numeric_limits<double>::quiet_NaN();
  double hy = std::numeric_limits<double>::quiet_NaN();
  Eigen::Vector3d bayes = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  std::optional<bool> converged;
};

/// One row per (n, replication), ordered by that key. Replication r at
/// scale n always uses stream (seed, stream_id(n, r)), so rows do not depend
/// on the worker count.
inline std::vector<TableRow> run_table(const ExperimentConfig& c)
{
  c.validate();
  const DiffusionModel model = config_model(c);
  const std::size_t reps = c.replications;
  std::vector<TableRow> rows(c.n_values.size() * reps);
  parallel_for(rows.size(), c.workers, [&](std::size_t k) {
    const double n = c.n_values[k / reps];
    const std::size_t rep = k % reps;
    Engine rng = replication_engine(c, n, rep);
    const SimulatedData d = simulate_dataset(c, model, n, rng);
    const EstimateReport r = estimate_all(d.obs, model, c, rng);
    TableRow& row = rows[k];
    row.n = n;
    row.rep = rep;
    if (r.qmle) {
      row.sigma_hat = r.qmle->sigma_hat;
      row.converged = r.qmle->converged;
    }
    if (r.plugin) {
      row.plugin = *r.plugin;
    }
    if (r.hy) {
      row.hy = *r.hy;
    }
    if (r.sigma_tilde) {
      row.bayes = *r.sigma_tilde;
    }
  });
  return rows;
}

inline const std::vector<std::string>& table_columns()
{
  static const std::vector<std::string> cols{"n",      "rep", "sigma1_hat", "sigma2_hat", "sigma3_hat", "plugin",
                                             "hy",     "bayes1", "bayes2",  "bayes3",     "converged"};
  return cols;
}

/// CSV with the columns of table_columns(); disabled estimators leave
/// empty fields.
inline void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows)
{
  const auto& cols = table_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    os << (i ? "," : "") << cols[i];
  }
  os << '\n';
  const auto num = [](double v) { return std::isnan(v) ? std::string() : text::format_double(v); };
  for (const auto& r : rows) {
    os << text::format_double(r.n) << ',' << r.rep;
    for (int i = 0; i < 3; ++i) {
      os << ',' << num(r.sigma_hat[i]);
    }
    os << ',' << num(r.plugin) << ',' << num(r.hy);
    for (int i = 0; i < 3; ++i) {
      os << ',' << num(r.bayes[i]);
    }
    os << ',' << (r.converged ? (*r.converged ? "1" : "0") : "") << '\n';
  }
}

struct SummaryCell
{
  std::string estimator;
  double n = 0.0;
  std::size_t count = 0;
  double mean = 0.0;
  std::optional<double> sd;  ///< absent for a single replication
};

/// Mean and sample SD (divisor count - 1) of every estimator column per n.
inline std::vector<SummaryCell> summarize(const std::vector<TableRow>& rows, const std::vector<double>& n_values)
{
  const std::vector<std::pair<std::string, double TableRow::*>> scalar{{"plugin", &TableRow::plugin},
                                                                         {"hy", &TableRow::hy}};
  std::vector<SummaryCell> out;
  for (double n : n_values) {
    const auto column = [&](const std::string& name, auto get) {
      std::vector<double> xs;
      for (const auto& r : rows) {
        if (r.n == n && !std::isnan(get(r))) {
          xs.push_back(get(r));
        }
      }
      if (xs.empty()) {
        return;
      }
      SummaryCell cell{name, n, xs.size(), 0.0, std::nullopt};
      for (double x : xs) {
        cell.mean += x;
      }
      cell.mean /= static_cast<double>(xs.size());
      if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) {
          ss += (x - cell.mean) * (x - cell.mean);
        }
        cell.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
      }
      out.push_back(cell);
    };
    for (int i = 0; i < 3; ++i) {
      column("sigma" + std::to_string(i + 1) + "_hat", [i](const TableRow& r) { return r.sigma_hat[i]; });
    }
    for (const auto& [name, member] : scalar) {
      column(name, [member](const TableRow& r) { return r.*member; });
    }
    for (int i = 0; i < 3; ++i) {
      column("bayes" + std::to_string(i + 1), [i](const TableRow& r) { return r.bayes[i]; });
    }
  }
  return out;
}

/// Human summary at 4 significant digits: estimator, n, reps, mean, sd.
inline void write_summary(std::ostream& os, const std::vector<SummaryCell>& cells)
{
  os << "estimator n reps mean sd\n";
  for (const auto& c : cells) {
    os << c.estimator << ' ' << text::format_double(c.n, 4) << ' ' << c.count << ' '
       << text::format_double(c.mean, 4) << ' ' << (c.sd ? text::format_double(*c.sd, 4) : std::string("NA"))
       << '\n';
  }
}

/// Coefficients from `c.coefficients` if set, else estimated at b_n = coeff_bn.
inline SamplingCoefficients config_coefficients(const ExperimentConfig& c)
{
  if (!c.coefficients.empty()) {
    std::ifstream in(c.coefficients);
    if (!in) {
      throw Error("cannot open coefficient table '" + c.coefficients + "'");
    }
    return read_coefficients(in, c.coefficients);
  }
  const auto [s1, s2] = config_schemes(c, c.coeff_bn);
  return estimate_coefficients(s1, s2, c.coeff_order, c.coeff_reps, c.seed, c.workers);
}

inline AsymptoticsReport run_asymptotics(const ExperimentConfig& c)
{
  c.validate();
  return triangular_asymptotics(config_coefficients(c), config_model(c), c.sigma_star, c.horizon);
}

}  // namespace nsqla
