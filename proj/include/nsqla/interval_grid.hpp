#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nsqla/error.hpp"
#include "nsqla/random.hpp"
#include "nsqla/text_io.hpp"

namespace nsqla
{

/// Ordered partition 0 = t_0 < t_1 < ... < t_k = T of the observation window.
///
/// Interval i (0-based here, 1-based in reports) is [t_i, t_{i+1}].
class IntervalGrid
{
public:
  /// Intervals shorter than this fraction of the horizon are merged away.
  static constexpr double kMinRelativeLength = 1e-12;

  explicit IntervalGrid(std::vector<double> endpoints) : endpoints_(std::move(endpoints))
  {
    if (endpoints_.size() < 2) {
      throw std::invalid_argument("IntervalGrid: need at least two endpoints");
    }
    if (endpoints_.front() != 0.0) {
      throw std::invalid_argument("IntervalGrid: first endpoint must be 0");
    }
    if (!(endpoints_.back() > 0.0) || !std::isfinite(endpoints_.back())) {
      throw std::invalid_argument("IntervalGrid: horizon must be positive and finite");
    }
    for (std::size_t i = 1; i < endpoints_.size(); ++i) {
      if (!(endpoints_[i] > endpoints_[i - 1])) {
        throw std::invalid_argument("IntervalGrid: endpoints must be strictly increasing");
      }
    }
  }

  static IntervalGrid equispaced(std::size_t count, double horizon)
  {
    if (count == 0 || !(horizon > 0.0)) {
      throw std::invalid_argument("IntervalGrid::equispaced: count and horizon must be positive");
    }
    std::vector<double> e(count + 1);
    for (std::size_t i = 0; i < count; ++i) {
      e[i] = horizon * static_cast<double>(i) / static_cast<double>(count);
    }
    e[count] = horizon;
    return IntervalGrid(std::move(e));
  }

  /// Builds the grid S^i = inf{t : N_t >= i} ∧ T from raw event times.
  /// Events outside (0, T) are dropped (an event at T coincides with the
  /// final endpoint); intervals below kMinRelativeLength·T are merged with
  /// their successor, or with the predecessor for the final interval.
  static IntervalGrid from_event_times(std::vector<double> times, double horizon)
  {
    if (!(horizon > 0.0)) {
      throw std::invalid_argument("IntervalGrid::from_event_times: horizon must be positive");
    }
    std::sort(times.begin(), times.end());
    const double min_len = kMinRelativeLength * horizon;
    std::vector<double> e{0.0};
    e.reserve(times.size() + 2);
    for (double t : times) {
      if (t <= 0.0 || t >= horizon) {
        continue;
      }
      if (t - e.back() < min_len) {
        continue;
      }
      e.push_back(t);
    }
    if (e.size() > 1 && horizon - e.back() < min_len) {
      e.pop_back();
    }
    e.push_back(horizon);
    return IntervalGrid(std::move(e));
  }

  std::span<const double> endpoints() const noexcept { return endpoints_; }
  std::size_t size() const noexcept { return endpoints_.size() - 1; }
  double horizon() const noexcept { return endpoints_.back(); }
  double left(std::size_t i) const { return endpoints_[i]; }
  double right(std::size_t i) const { return endpoints_[i + 1]; }
  double length(std::size_t i) const { return endpoints_[i + 1] - endpoints_[i]; }

  double max_length() const
  {
    double r = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      r = std::max(r, length(i));
    }
    return r;
  }

  friend bool operator==(const IntervalGrid&, const IntervalGrid&) = default;

private:
  std::vector<double> endpoints_;
};

/// How observation times are generated. Poisson event times come from a
/// homogeneous process of rate `intensity` on the rescaled clock, i.e. rate
/// intensity·scale on [0, horizon].
struct SamplingScheme
{
  enum class Kind { poisson, equispaced };

  Kind kind = Kind::poisson;
  double intensity = 1.0;
  std::size_t count = 1;
  double scale = 1.0;
  double horizon = 1.0;

  static SamplingScheme poisson(double intensity, double scale, double horizon)
  {
    SamplingScheme s{Kind::poisson, intensity, 0, scale, horizon};
    s.validate();
    return s;
  }

  static SamplingScheme equispaced(std::size_t count, double horizon, double scale = 1.0)
  {
    SamplingScheme s{Kind::equispaced, 1.0, count, scale, horizon};
    s.validate();
    return s;
  }

  double expected_count() const
  {
    return kind == Kind::poisson ? intensity * scale * horizon : static_cast<double>(count);
  }

  void validate() const
  {
    if (!(horizon > 0.0)) {
      throw std::invalid_argument("SamplingScheme: horizon must be positive");
    }
    if (!(scale >= 1.0)) {
      throw std::invalid_argument("SamplingScheme: scale b_n must be >= 1");
    }
    if (kind == Kind::poisson && !(intensity > 0.0)) {
      throw std::invalid_argument("SamplingScheme: Poisson intensity must be positive");
    }
    if (kind == Kind::equispaced && count == 0) {
      throw std::invalid_argument("SamplingScheme: equispaced count must be positive");
    }
  }
};

inline IntervalGrid generate_grid(const SamplingScheme& scheme, Engine& rng)
{
  scheme.validate();
  if (scheme.kind == SamplingScheme::Kind::equispaced) {
    return IntervalGrid::equispaced(scheme.count, scheme.horizon);
  }
  std::exponential_distribution<double> gap(scheme.intensity * scheme.scale);
  std::vector<double> events;
  events.reserve(static_cast<std::size_t>(scheme.expected_count() * 1.2) + 8);
  for (double t = gap(rng); t < scheme.horizon; t += gap(rng)) {
    events.push_back(t);
  }
  return IntervalGrid::from_event_times(std::move(events), scheme.horizon);
}

/// Calls f(i, j, |I^i ∩ J^j|) for every pair with positive overlap, in
/// increasing (i, j) order. O(l + m) two-pointer sweep.
template <class F>
void for_each_overlap(const IntervalGrid& g1, const IntervalGrid& g2, F&& f)
{
  if (g1.horizon() != g2.horizon()) {
    throw std::invalid_argument("overlap: grids cover different horizons");
  }
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < g1.size() && j < g2.size()) {
    const double lo = std::max(g1.left(i), g2.left(j));
    const double hi = std::min(g1.right(i), g2.right(j));
    if (hi > lo) {
      f(i, j, hi - lo);
    }
    if (g1.right(i) < g2.right(j)) {
      ++i;
    } else if (g2.right(j) < g1.right(i)) {
      ++j;
    } else {
      ++i;
      ++j;
    }
  }
}

/// G_ij = |I^i ∩ J^j| / sqrt(|I^i| |J^j|), stored dense (l × m).
class OverlapMatrix
{
public:
  OverlapMatrix() = default;
  explicit OverlapMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {}

  const Eigen::MatrixXd& dense() const noexcept { return entries_; }
  Eigen::Index rows() const noexcept { return entries_.rows(); }
  Eigen::Index cols() const noexcept { return entries_.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

private:
  Eigen::MatrixXd entries_;
};

inline OverlapMatrix overlap_matrix(const IntervalGrid& g1, const IntervalGrid& g2)
{
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g1.size()),
                                            static_cast<Eigen::Index>(g2.size()));
  for_each_overlap(g1, g2, [&](std::size_t i, std::size_t j, double len) {
    g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        len / std::sqrt(g1.length(i) * g2.length(j));
  });
  return OverlapMatrix(std::move(g));
}

/// r_n: the longest interval across both grids.
inline double grid_mesh(const IntervalGrid& g1, const IntervalGrid& g2)
{
  return std::max(g1.max_length(), g2.max_length());
}

/// Two-column table "grid_id endpoint", grid ids 1-based, 17 significant digits.
inline void write_grids(std::ostream& os, std::span<const IntervalGrid> grids)
{
  os << "# grid endpoint\n";
  for (std::size_t k = 0; k < grids.size(); ++k) {
    for (double t : grids[k].endpoints()) {
      os << (k + 1) << ' ' << text::format_double(t) << '\n';
    }
  }
}

inline std::vector<IntervalGrid> read_grids(std::istream& is, const std::string& source = "<grids>")
{
  std::map<std::size_t, std::vector<double>> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto f = text::fields(line);
    if (f.empty()) {
      continue;
    }
    std::size_t id = 0;
    double t = 0.0;
    if (f.size() != 2 || !text::parse_size(f[0], id) || id == 0 || !text::parse_double(f[1], t)) {
      throw ParseError(source, lineno, "expected '<grid id> <endpoint>'");
    }
    by_id[id].push_back(t);
  }
  std::vector<IntervalGrid> out;
  std::size_t expected = 1;
  for (auto& [id, e] : by_id) {
    if (id != expected++) {
      throw ParseError(source, lineno, "grid ids must be consecutive from 1");
    }
    try {
      out.emplace_back(std::move(e));
    } catch (const std::invalid_argument& ex) {
      throw ParseError(source, lineno, "grid " + std::to_string(id) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace nsqla
