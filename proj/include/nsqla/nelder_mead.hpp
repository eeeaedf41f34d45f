#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace nsqla
{

struct NelderMeadOptions
{
  double tolerance = 1e-6;    ///< stop when max vertex distance from the best vertex falls below this
  int max_iterations = 5000;
  double initial_step = 0.05;
};

struct NelderMeadResult
{
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes f over R^d with the standard Nelder–Mead moves (reflection 1,
/// expansion 2, contraction 1/2, shrink 1/2). f may return +inf to mark
/// infeasible points.
template <class F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& start, const NelderMeadOptions& opts = {})
{
  const Eigen::Index d = start.size();
  const auto n = static_cast<std::size_t>(d + 1);
  std::vector<Eigen::VectorXd> pts(n, start);
  std::vector<double> val(n);
  NelderMeadResult res;
  const auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  for (Eigen::Index i = 0; i < d; ++i) {
    pts[static_cast<std::size_t>(i) + 1][i] += opts.initial_step;
  }
  for (std::size_t k = 0; k < n; ++k) {
    val[k] = eval(pts[k]);
  }
  std::vector<std::size_t> order(n);
  const auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
  };
  const auto diameter = [&] {
    double r = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      r = std::max(r, (pts[order[k]] - pts[order[0]]).lpNorm<Eigen::Infinity>());
    }
    return r;
  };

  sort_simplex();
  while (res.iterations < opts.max_iterations) {
    if (diameter() < opts.tolerance) {
      res.converged = true;
      break;
    }
    ++res.iterations;
    const std::size_t best = order[0];
    const std::size_t worst = order[n - 1];
    const std::size_t second = order[n - 2];
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      centroid += pts[order[k]];
    }
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < val[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe, val[worst] = fe;
      } else {
        pts[worst] = xr, val[worst] = fr;
      }
    } else if (fr < val[second]) {
      pts[worst] = xr, val[worst] = fr;
    } else {
      const bool outside = fr < val[worst];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                         : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : val[worst])) {
        pts[worst] = xc, val[worst] = fc;
      } else {
        for (std::size_t k = 0; k < n; ++k) {
          if (k != best) {
            pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
            val[k] = eval(pts[k]);
          }
        }
      }
    }
    sort_simplex();
  }
  res.x = pts[order[0]];
  res.value = val[order[0]];
  return res;
}

}  // namespace nsqla
