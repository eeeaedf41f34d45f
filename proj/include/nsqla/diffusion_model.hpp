#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nsqla
{

/// Open parameter box Λ = Π (lower_i, upper_i).
struct ParamBox
{
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  ParamBox() = default;
  ParamBox(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi))
  {
    if (lower.size() != upper.size() || lower.size() == 0) {
      throw std::invalid_argument("ParamBox: bounds must be non-empty and of equal length");
    }
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (!(lower[i] < upper[i])) {
        throw std::invalid_argument("ParamBox: lower bound must be below upper bound");
      }
    }
  }

  Eigen::Index dim() const noexcept { return lower.size(); }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  Eigen::VectorXd width() const { return upper - lower; }

  bool contains(const Eigen::VectorXd& s) const
  {
    return s.size() == dim() && (s.array() > lower.array()).all() && (s.array() < upper.array()).all();
  }

  bool contains_closed(const Eigen::VectorXd& s) const
  {
    return s.size() == dim() && (s.array() >= lower.array()).all() && (s.array() <= upper.array()).all();
  }

  Eigen::VectorXd to_unit(const Eigen::VectorXd& s) const
  {
    return ((s - lower).array() / width().array()).matrix();
  }

  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const
  {
    return lower + (u.array() * width().array()).matrix();
  }
};

/// Parametric diffusion dY = mu(t, Y) dt + b(X_t, sigma) dW with covariate
/// X_t = phi(t, Y_t). Row k of b is b^k, the loading of Y^k on W.
class DiffusionModel
{
public:
  using Diffusion = std::function<Eigen::Matrix2d(const Eigen::VectorXd& x, const Eigen::VectorXd& sigma)>;
  using Drift = std::function<Eigen::Vector2d(double t, const Eigen::Vector2d& y)>;
  using Covariate = std::function<Eigen::VectorXd(double t, const Eigen::Vector2d& y)>;

  /// Throws std::invalid_argument when det(b b^T) < ellipticity at any probe
  /// point of the box (center and the midpoints towards every corner).
  DiffusionModel(std::string name, ParamBox box, Diffusion diffusion, double ellipticity,
                 std::size_t covariate_dim = 0, Covariate covariate = {})
    : name_(std::move(name)), box_(std::move(box)), diffusion_(std::move(diffusion)),
      ellipticity_(ellipticity), covariate_dim_(covariate_dim), covariate_(std::move(covariate))
  {
    if (!diffusion_) {
      throw std::invalid_argument("DiffusionModel: diffusion map is required");
    }
    if (!(ellipticity_ > 0.0)) {
      throw std::invalid_argument("DiffusionModel: ellipticity constant must be positive");
    }
    if (covariate_dim_ > 0 && !covariate_) {
      throw std::invalid_argument("DiffusionModel: covariate map required when covariate_dim > 0");
    }
    check_ellipticity();
  }

  DiffusionModel with_drift(Drift drift) const
  {
    DiffusionModel m = *this;
    m.drift_ = std::move(drift);
    return m;
  }

  const std::string& name() const noexcept { return name_; }
  const ParamBox& box() const noexcept { return box_; }
  Eigen::Index dim_param() const noexcept { return box_.dim(); }
  double ellipticity() const noexcept { return ellipticity_; }
  std::size_t covariate_dim() const noexcept { return covariate_dim_; }
  bool has_drift() const noexcept { return static_cast<bool>(drift_); }

  /// b does not depend on the covariate, so S(sigma) has scalar blocks.
  bool constant_coefficients() const noexcept { return covariate_dim_ == 0; }

  Eigen::Matrix2d diffusion(const Eigen::VectorXd& x, const Eigen::VectorXd& sigma) const
  {
    return diffusion_(x, sigma);
  }

  Eigen::Vector2d drift(double t, const Eigen::Vector2d& y) const
  {
    return drift_ ? drift_(t, y) : Eigen::Vector2d::Zero();
  }

  Eigen::VectorXd covariate(double t, const Eigen::Vector2d& y) const
  {
    return covariate_dim_ > 0 ? covariate_(t, y) : Eigen::VectorXd();
  }

  /// rho(x, sigma) = b^1·b^2 / (|b^1| |b^2|)
  double correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& sigma) const
  {
    const Eigen::Matrix2d b = diffusion(x, sigma);
    return b.row(0).dot(b.row(1)) / (b.row(0).norm() * b.row(1).norm());
  }

private:
  void check_ellipticity() const
  {
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(covariate_dim_));
    const Eigen::VectorXd c = box_.center();
    std::vector<Eigen::VectorXd> probes{c};
    const Eigen::Index d = box_.dim();
    if (d < 12) {
      for (unsigned mask = 0; mask < (1u << d); ++mask) {
        Eigen::VectorXd corner(d);
        for (Eigen::Index i = 0; i < d; ++i) {
          corner[i] = (mask >> i) & 1u ? box_.upper[i] : box_.lower[i];
        }
        probes.push_back(0.5 * (c + corner));
      }
    }
    for (const auto& s : probes) {
      const Eigen::Matrix2d b = diffusion(x, s);
      const double det = (b * b.transpose()).determinant();
      if (!(det >= ellipticity_)) {
        throw std::invalid_argument("DiffusionModel '" + name_ +
                                    "': det(b b^T) below the declared ellipticity constant");
      }
    }
  }

  std::string name_;
  ParamBox box_;
  Diffusion diffusion_;
  Drift drift_;
  double ellipticity_;
  std::size_t covariate_dim_;
  Covariate covariate_;
};

inline ParamBox default_triangular_box()
{
  return ParamBox(Eigen::Vector3d(0.1, 0.1, -3.0), Eigen::Vector3d(3.0, 3.0, 3.0));
}

/// dY^1 = sigma_1 dW^1,  dY^2 = sigma_3 dW^1 + sigma_2 dW^2  on
/// Λ = (eps, R) × (eps, R) × (-R, R).
inline DiffusionModel triangular_model(ParamBox box = default_triangular_box())
{
  if (box.dim() != 3 || !(box.lower[0] > 0.0) || !(box.lower[1] > 0.0)) {
    throw std::invalid_argument("triangular_model: box must be 3-dimensional with positive sigma_1, sigma_2 bounds");
  }
  const double eps = box.lower[0] * box.lower[0] * box.lower[1] * box.lower[1];
  return DiffusionModel(
      "triangular", std::move(box),
      [](const Eigen::VectorXd&, const Eigen::VectorXd& s) {
        Eigen::Matrix2d b;
        b << s[0], 0.0, s[2], s[1];
        return b;
      },
      eps);
}

}  // namespace nsqla
