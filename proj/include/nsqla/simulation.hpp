#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nsqla/diffusion_model.hpp"
#include "nsqla/error.hpp"
#include "nsqla/interval_grid.hpp"
#include "nsqla/random.hpp"
#include "nsqla/text_io.hpp"

namespace nsqla
{

/// Simulated (Y^1, Y^2, X) on the fine time grid.
struct FinePath
{
  std::vector<double> times;
  std::vector<Eigen::Vector2d> y;
  std::vector<Eigen::VectorXd> x;

  std::size_t size() const noexcept { return times.size(); }
  double horizon() const { return times.back(); }

  /// Index of the fine node nearest to t (ties go to the earlier node).
  std::size_t nearest_node(double t) const
  {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) {
      return 0;
    }
    if (it == times.end()) {
      return times.size() - 1;
    }
    const auto hi = static_cast<std::size_t>(it - times.begin());
    return (*it - t) < (t - times[hi - 1]) ? hi : hi - 1;
  }
};

/// Euler–Maruyama on the uniform grid k·T/fine_steps, refined by `knots`
/// (typically the observation times) so that observing needs no interpolation.
/// Exact in law for constant-coefficient, zero-drift models.
inline FinePath simulate_path(const DiffusionModel& model, const Eigen::VectorXd& sigma_star, double horizon,
                              std::size_t fine_steps, Engine& rng, std::span<const double> knots = {},
                              const Eigen::Vector2d& y0 = Eigen::Vector2d::Zero())
{
  if (!model.box().contains(sigma_star)) {
    throw std::invalid_argument("simulate_path: true parameter lies outside the parameter box");
  }
  if (fine_steps == 0 || !(horizon > 0.0)) {
    throw std::invalid_argument("simulate_path: fine_steps and horizon must be positive");
  }
  std::vector<double> t(fine_steps + 1);
  for (std::size_t k = 0; k < fine_steps; ++k) {
    t[k] = horizon * static_cast<double>(k) / static_cast<double>(fine_steps);
  }
  t[fine_steps] = horizon;
  for (double s : knots) {
    if (s > 0.0 && s < horizon) {
      t.push_back(s);
    }
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());

  FinePath path;
  path.times = std::move(t);
  const std::size_t n = path.times.size();
  path.y.resize(n);
  path.x.resize(n);
  path.y[0] = y0;
  path.x[0] = model.covariate(0.0, y0);
  const bool constant = model.constant_coefficients();
  const Eigen::VectorXd none;
  Eigen::Matrix2d b = model.diffusion(none, sigma_star);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    if (!constant) {
      b = model.diffusion(path.x[k], sigma_star);
    }
    Eigen::Vector2d dw(standard_normal(rng), standard_normal(rng));
    dw *= std::sqrt(dt);
    Eigen::Vector2d next = path.y[k] + b * dw;
    if (model.has_drift()) {
      next += model.drift(path.times[k], path.y[k]) * dt;
    }
    path.y[k + 1] = next;
    path.x[k + 1] = model.covariate(path.times[k + 1], next);
  }
  return path;
}

/// Asynchronous increments Y^1(I), Y^2(J) with covariate snapshots X_{L(K)}.
struct ObservationSet
{
  IntervalGrid grid1;
  IntervalGrid grid2;
  Eigen::VectorXd incr1;
  Eigen::VectorXd incr2;
  Eigen::MatrixXd cov1;  ///< l × n2, row i = X at L(I^i)
  Eigen::MatrixXd cov2;  ///< m × n2
  Eigen::Vector2d start = Eigen::Vector2d::Zero();

  ObservationSet(IntervalGrid g1, IntervalGrid g2, Eigen::VectorXd y1, Eigen::VectorXd y2,
                 Eigen::MatrixXd c1 = {}, Eigen::MatrixXd c2 = {})
    : grid1(std::move(g1)), grid2(std::move(g2)), incr1(std::move(y1)), incr2(std::move(y2)),
      cov1(std::move(c1)), cov2(std::move(c2))
  {
    if (grid1.horizon() != grid2.horizon()) {
      throw std::invalid_argument("ObservationSet: grids cover different horizons");
    }
    if (static_cast<std::size_t>(incr1.size()) != grid1.size() ||
        static_cast<std::size_t>(incr2.size()) != grid2.size()) {
      throw std::invalid_argument("ObservationSet: increment count does not match the grid");
    }
    if (cov1.size() == 0) {
      cov1.resize(incr1.size(), 0);
    }
    if (cov2.size() == 0) {
      cov2.resize(incr2.size(), 0);
    }
    if (cov1.rows() != incr1.size() || cov2.rows() != incr2.size() || cov1.cols() != cov2.cols()) {
      throw std::invalid_argument("ObservationSet: covariate snapshot shape mismatch");
    }
  }

  double horizon() const { return grid1.horizon(); }
  std::size_t covariate_dim() const { return static_cast<std::size_t>(cov1.cols()); }
};

namespace detail
{

inline std::vector<std::size_t> snap(const FinePath& path, const IntervalGrid& grid)
{
  std::vector<std::size_t> nodes;
  nodes.reserve(grid.endpoints().size());
  for (double t : grid.endpoints()) {
    const std::size_t k = path.nearest_node(t);
    if (nodes.empty() || k != nodes.back()) {
      nodes.push_back(k);
    }
  }
  nodes.front() = 0;
  if (nodes.back() != path.size() - 1) {
    nodes.back() = path.size() - 1;
  }
  if (nodes.size() < 2) {
    nodes = {0, path.size() - 1};
  }
  return nodes;
}

}  // namespace detail

/// Snaps grid endpoints to the nearest fine node (intervals that collapse are
/// merged) and takes exact differences of the path between snapped endpoints.
inline ObservationSet observe(const FinePath& path, const IntervalGrid& grid1, const IntervalGrid& grid2)
{
  if (grid1.horizon() != path.horizon() || grid2.horizon() != path.horizon()) {
    throw std::invalid_argument("observe: grid horizon differs from the path horizon");
  }
  const auto make = [&](const IntervalGrid& grid, int coord, IntervalGrid& out_grid, Eigen::VectorXd& incr,
                        Eigen::MatrixXd& cov) {
    const auto nodes = detail::snap(path, grid);
    std::vector<double> e(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      e[i] = path.times[nodes[i]];
    }
    out_grid = IntervalGrid(std::move(e));
    const auto count = static_cast<Eigen::Index>(nodes.size() - 1);
    const auto n2 = static_cast<Eigen::Index>(path.x.front().size());
    incr.resize(count);
    cov.resize(count, n2);
    for (Eigen::Index i = 0; i < count; ++i) {
      const auto a = nodes[static_cast<std::size_t>(i)];
      const auto b = nodes[static_cast<std::size_t>(i) + 1];
      incr[i] = path.y[b][coord] - path.y[a][coord];
      if (n2 > 0) {
        cov.row(i) = path.x[a].transpose();
      }
    }
  };
  IntervalGrid g1 = grid1;
  IntervalGrid g2 = grid2;
  Eigen::VectorXd y1, y2;
  Eigen::MatrixXd c1, c2;
  make(grid1, 0, g1, y1, c1);
  make(grid2, 1, g2, y2, c2);
  ObservationSet obs(std::move(g1), std::move(g2), std::move(y1), std::move(y2), std::move(c1), std::move(c2));
  obs.start = path.y.front();
  return obs;
}

/// Text table "t Y1 Y2 X1 ... Xn2".
inline void write_path(std::ostream& os, const FinePath& path)
{
  os << "# t Y1 Y2";
  if (!path.x.empty()) {
    for (Eigen::Index k = 0; k < path.x.front().size(); ++k) {
      os << " X" << (k + 1);
    }
  }
  os << '\n';
  for (std::size_t i = 0; i < path.size(); ++i) {
    os << text::format_double(path.times[i]) << ' ' << text::format_double(path.y[i][0]) << ' '
       << text::format_double(path.y[i][1]);
    for (Eigen::Index k = 0; k < path.x[i].size(); ++k) {
      os << ' ' << text::format_double(path.x[i][k]);
    }
    os << '\n';
  }
}

/// Dataset table "coordinate time level": observed levels Y^k at each
/// observation time of coordinate k (1 or 2), times starting at 0.
inline void write_observations(std::ostream& os, const ObservationSet& obs)
{
  os << "# coordinate time level\n";
  const auto emit = [&](int coord, const IntervalGrid& g, const Eigen::VectorXd& incr, double y0) {
    double level = y0;
    os << coord << ' ' << text::format_double(g.left(0)) << ' ' << text::format_double(level) << '\n';
    for (std::size_t i = 0; i < g.size(); ++i) {
      level += incr[static_cast<Eigen::Index>(i)];
      os << coord << ' ' << text::format_double(g.right(i)) << ' ' << text::format_double(level) << '\n';
    }
  };
  emit(1, obs.grid1, obs.incr1, obs.start[0]);
  emit(2, obs.grid2, obs.incr2, obs.start[1]);
}

inline ObservationSet read_observations(std::istream& is, const std::string& source = "<observations>")
{
  std::map<int, std::vector<std::pair<double, double>>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto f = text::fields(line);
    if (f.empty()) {
      continue;
    }
    std::size_t coord = 0;
    double t = 0.0;
    double level = 0.0;
    if (f.size() != 3 || !text::parse_size(f[0], coord) || (coord != 1 && coord != 2) ||
        !text::parse_double(f[1], t) || !text::parse_double(f[2], level)) {
      throw ParseError(source, lineno, "expected '<coordinate 1|2> <time> <level>'");
    }
    auto& r = rows[static_cast<int>(coord)];
    if (!r.empty() && !(t > r.back().first)) {
      throw ParseError(source, lineno, "observation times must be strictly increasing");
    }
    if (r.empty() && t != 0.0) {
      throw ParseError(source, lineno, "first observation time must be 0");
    }
    r.emplace_back(t, level);
  }
  if (rows[1].size() < 2 || rows[2].size() < 2) {
    throw ParseError(source, lineno, "each coordinate needs at least two observations");
  }
  const auto build = [](const std::vector<std::pair<double, double>>& r, Eigen::VectorXd& incr) {
    std::vector<double> e(r.size());
    incr.resize(static_cast<Eigen::Index>(r.size() - 1));
    for (std::size_t i = 0; i < r.size(); ++i) {
      e[i] = r[i].first;
      if (i > 0) {
        incr[static_cast<Eigen::Index>(i - 1)] = r[i].second - r[i - 1].second;
      }
    }
    return IntervalGrid(std::move(e));
  };
  Eigen::VectorXd y1, y2;
  IntervalGrid g1 = build(rows[1], y1);
  IntervalGrid g2 = build(rows[2], y2);
  if (g1.horizon() != g2.horizon()) {
    throw ParseError(source, lineno, "both coordinates must end at the same horizon");
  }
  ObservationSet obs(std::move(g1), std::move(g2), std::move(y1), std::move(y2));
  obs.start = Eigen::Vector2d(rows[1].front().second, rows[2].front().second);
  return obs;
}

}  // namespace nsqla
