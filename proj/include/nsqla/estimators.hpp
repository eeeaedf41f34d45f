#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsqla/error.hpp"
#include "nsqla/gauss_legendre.hpp"
#include "nsqla/interval_grid.hpp"
#include "nsqla/nelder_mead.hpp"
#include "nsqla/quasi_likelihood.hpp"
#include "nsqla/random.hpp"
#include "nsqla/simulation.hpp"

namespace nsqla
{

struct QmleOptions
{
  double tolerance = 1e-6;  ///< simplex diameter in box-scaled coordinates
  int max_iterations = 5000;
  double initial_step = 0.05;
  int starts = 3;           ///< sigma_0, box center, one uniform draw from the box
  double boundary_margin = 1e-6;
};

struct QmleResult
{
  Eigen::VectorXd sigma_hat;
  double loglik = -std::numeric_limits<double>::infinity();
  int iterations = 0;     ///< summed over starts
  int evaluations = 0;
  bool converged = false; ///< the winning start met the tolerance
  bool on_boundary = false;
  int best_start = -1;
  std::vector<std::string> warnings;
};

/// Quasi-MLE: maximizes H_n over the parameter box by Nelder–Mead in
/// box-scaled coordinates from several starts. The first start reaching the
/// largest H_n wins.
inline QmleResult qmle(QuasiLikelihood& ws, const Eigen::VectorXd& sigma0, Engine& rng, const QmleOptions& opts = {})
{
  const ParamBox& box = ws.model().box();
  if (!box.contains(sigma0)) {
    throw std::invalid_argument("qmle: starting point must lie inside the parameter box");
  }
  std::vector<Eigen::VectorXd> starts{sigma0, box.center()};
  Eigen::VectorXd u(box.dim());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    u[i] = 0.05 + 0.9 * uniform01(rng);
  }
  starts.push_back(box.from_unit(u));
  starts.resize(static_cast<std::size_t>(std::max(1, std::min(opts.starts, 3))));

  const auto objective = [&](const Eigen::VectorXd& unit) {
    if ((unit.array() <= 0.0).any() || (unit.array() >= 1.0).any()) {
      return std::numeric_limits<double>::infinity();
    }
    return -ws.objective(box.from_unit(unit));
  };
  NelderMeadOptions nm;
  nm.tolerance = opts.tolerance;
  nm.max_iterations = opts.max_iterations;
  nm.initial_step = opts.initial_step;

  QmleResult out;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    Eigen::VectorXd u0 = box.to_unit(starts[k]);
    // Keep the initial simplex inside the box.
    for (Eigen::Index i = 0; i < u0.size(); ++i) {
      u0[i] = std::min(u0[i], 1.0 - 2.0 * opts.initial_step);
    }
    const NelderMeadResult r = nelder_mead(objective, u0, nm);
    out.iterations += r.iterations;
    out.evaluations += r.evaluations;
    if (-r.value > out.loglik) {
      out.loglik = -r.value;
      out.sigma_hat = box.from_unit(r.x);
      out.converged = r.converged;
      out.best_start = static_cast<int>(k);
    }
  }
  if (out.best_start < 0) {
    out.sigma_hat = sigma0;
    out.warnings.emplace_back("no start reached a finite quasi-likelihood");
    return out;
  }
  if (!out.converged) {
    out.warnings.emplace_back("optimizer stopped at the iteration limit");
  }
  const Eigen::VectorXd unit = box.to_unit(out.sigma_hat);
  out.on_boundary = (unit.array() < opts.boundary_margin).any() || (unit.array() > 1.0 - opts.boundary_margin).any();
  if (out.on_boundary) {
    out.warnings.emplace_back("estimate on the boundary of the parameter box");
  }
  return out;
}

/// Posterior mean of sigma under the unnormalized log density on the box
/// [lower, upper], by tensor-product Gauss–Legendre quadrature. Log-density
/// values are shifted by their maximum on the grid before exponentiating.
template <class LogDensity>
Eigen::VectorXd posterior_mean(LogDensity&& log_density, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                               int nodes)
{
  const Eigen::Index d = lower.size();
  if (d < 1 || d > 4) {
    throw std::invalid_argument("posterior_mean: dimension must be between 1 and 4");
  }
  const QuadratureRule rule = gauss_legendre(nodes);
  const auto q = static_cast<std::size_t>(nodes);
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    total *= q;
  }
  const Eigen::VectorXd half = 0.5 * (upper - lower);
  const Eigen::VectorXd mid = 0.5 * (upper + lower);
  std::vector<double> logv(total);
  std::vector<double> logw(total);
  std::vector<Eigen::VectorXd> points(total, Eigen::VectorXd(d));
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    double lw = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const std::size_t k = rest % q;
      rest /= q;
      points[flat][i] = mid[i] + half[i] * rule.nodes[k];
      lw += std::log(rule.weights[k] * half[i]);
    }
    logw[flat] = lw;
    logv[flat] = log_density(points[flat]);
    if (!std::isnan(logv[flat])) {
      top = std::max(top, logv[flat]);
    }
  }
  if (!std::isfinite(top)) {
    throw Error("bayes: posterior mass below resolution");
  }
  double mass = 0.0;
  Eigen::VectorXd moment = Eigen::VectorXd::Zero(d);
  for (std::size_t flat = 0; flat < total; ++flat) {
    if (std::isnan(logv[flat])) {
      continue;
    }
    const double w = std::exp(logv[flat] - top + logw[flat]);
    mass += w;
    moment += w * points[flat];
  }
  if (!(mass > std::numeric_limits<double>::min())) {
    throw Error("bayes: posterior mass below resolution");
  }
  return moment / mass;
}

struct BayesOptions
{
  int nodes = 15;
  /// Half-width of the integration window in posterior standard deviations
  /// around the QMLE; 0 integrates over the whole box.
  double window = 6.0;
  /// log pi(sigma); flat when empty.
  std::function<double(const Eigen::VectorXd&)> log_prior;
};

/// Bayes-type estimator: posterior mean with exp(H_n) as likelihood. The
/// window mode clips the box to sigma_hat ± window·sd, with sd from the
/// finite-difference Hessian of H_n at sigma_hat; it falls back to the whole
/// box when that Hessian is unusable.
inline Eigen::VectorXd bayes(QuasiLikelihood& ws, const Eigen::VectorXd& sigma_hat, const BayesOptions& opts = {})
{
  const ParamBox& box = ws.model().box();
  Eigen::VectorXd lo = box.lower;
  Eigen::VectorXd hi = box.upper;
  if (opts.window > 0.0) {
    try {
      const Derivatives der = ws.grad_hess(sigma_hat);
      Eigen::LLT<Eigen::MatrixXd> llt(-der.hessian);
      if (llt.info() == Eigen::Success) {
        const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(sigma_hat.size(), sigma_hat.size()));
        const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
        lo = lo.cwiseMax(sigma_hat - opts.window * sd);
        hi = hi.cwiseMin(sigma_hat + opts.window * sd);
      }
    } catch (const std::invalid_argument&) {
      // sigma_hat too close to the boundary for differences: integrate the whole box
    } catch (const NotPositiveDefinite&) {
    }
  }
  const auto logd = [&](const Eigen::VectorXd& s) {
    const double h = ws.objective(s);
    return opts.log_prior ? h + opts.log_prior(s) : h;
  };
  return posterior_mean(logd, lo, hi, opts.nodes);
}

/// Sum of Y^1(I) Y^2(J) over overlapping pairs.
inline double hayashi_yoshida(const ObservationSet& obs)
{
  double sum = 0.0;
  for_each_overlap(obs.grid1, obs.grid2, [&](std::size_t i, std::size_t j, double) {
    sum += obs.incr1[static_cast<Eigen::Index>(i)] * obs.incr2[static_cast<Eigen::Index>(j)];
  });
  return sum;
}

/// sigma_1 sigma_3 T, the cross variation implied by a triangular-model parameter.
inline double plugin_crosscov(const Eigen::VectorXd& sigma_hat, double horizon)
{
  if (sigma_hat.size() != 3) {
    throw std::invalid_argument("plugin_crosscov: expects (sigma_1, sigma_2, sigma_3)");
  }
  return sigma_hat[0] * sigma_hat[2] * horizon;
}

struct EstimateReport
{
  std::optional<QmleResult> qmle;
  std::optional<Eigen::VectorXd> sigma_tilde;
  std::optional<double> hy;
  std::optional<double> plugin;
  std::size_t count1 = 0;
  std::size_t count2 = 0;
  double mesh = 0.0;
  double sum1 = 0.0;
  double sum2 = 0.0;
};

}  // namespace nsqla
