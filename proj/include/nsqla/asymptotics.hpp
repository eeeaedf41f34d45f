#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nsqla/diffusion_model.hpp"
#include "nsqla/error.hpp"
#include "nsqla/interval_grid.hpp"
#include "nsqla/parallel.hpp"
#include "nsqla/random.hpp"
#include "nsqla/text_io.hpp"

namespace nsqla
{

/// tr((G G^T)^p) for which = 1, tr((G^T G)^p) for which = 2, p = 0..max_power,
/// by repeated products of the Gram matrix.
inline std::vector<double> trace_powers(const OverlapMatrix& g, int max_power, int which)
{
  if (max_power < 0 || (which != 1 && which != 2)) {
    throw std::invalid_argument("trace_powers: need max_power >= 0 and which in {1, 2}");
  }
  const Eigen::MatrixXd& m = g.dense();
  const Eigen::MatrixXd gram = which == 1 ? Eigen::MatrixXd(m * m.transpose()) : Eigen::MatrixXd(m.transpose() * m);
  std::vector<double> out(static_cast<std::size_t>(max_power) + 1);
  out[0] = static_cast<double>(gram.rows());
  Eigen::MatrixXd power = gram;
  for (int p = 1; p <= max_power; ++p) {
    if (p > 1) {
      power = power * gram;
    }
    out[static_cast<std::size_t>(p)] = power.trace();
  }
  return out;
}

/// Same traces from the eigenvalues of the smaller Gram matrix (equal for
/// p >= 1); eigenvalues are clamped to [0, 1] against rounding.
inline std::vector<double> trace_powers_spectral(const OverlapMatrix& g, int max_power, int which)
{
  if (max_power < 0 || (which != 1 && which != 2)) {
    throw std::invalid_argument("trace_powers_spectral: need max_power >= 0 and which in {1, 2}");
  }
  const Eigen::MatrixXd& m = g.dense();
  const Eigen::MatrixXd gram = m.rows() <= m.cols() ? Eigen::MatrixXd(m * m.transpose())
                                                    : Eigen::MatrixXd(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  Eigen::ArrayXd lambda = eig.eigenvalues().array().max(0.0).min(1.0);
  std::vector<double> out(static_cast<std::size_t>(max_power) + 1);
  out[0] = static_cast<double>(which == 1 ? m.rows() : m.cols());
  Eigen::ArrayXd power = Eigen::ArrayXd::Ones(lambda.size());
  for (int p = 1; p <= max_power; ++p) {
    power *= lambda;
    out[static_cast<std::size_t>(p)] = power.sum();
  }
  return out;
}

/// nu_n^{p,which}([0, T]) = b_n^{-1} tr((G G^T)^p) or b_n^{-1} tr((G^T G)^p).
inline double nu_measure(const OverlapMatrix& g, int p, double bn, int which)
{
  if (!(bn > 0.0)) {
    throw std::invalid_argument("nu_measure: b_n must be positive");
  }
  return trace_powers(g, p, which)[static_cast<std::size_t>(p)] / bn;
}

/// Limit coefficients a_0..a_P and c_0 of a stationary sampling scheme pair.
struct SamplingCoefficients
{
  std::vector<double> a;
  std::vector<double> se;
  double c0 = 1.0;
  double c0_se = 0.0;
  SamplingScheme scheme1;
  SamplingScheme scheme2;
  std::size_t replications = 0;
  std::vector<std::string> warnings;

  int order() const noexcept { return static_cast<int>(a.size()) - 1; }

  /// Synchronous equispaced sampling: every a_p and c_0 equal 1.
  static SamplingCoefficients synchronous(int order, std::size_t count = 1, double horizon = 1.0)
  {
    SamplingCoefficients c;
    c.a.assign(static_cast<std::size_t>(order) + 1, 1.0);
    c.se.assign(c.a.size(), 0.0);
    c.scheme1 = SamplingScheme::equispaced(count, horizon, std::max(1.0, static_cast<double>(count) / horizon));
    c.scheme2 = c.scheme1;
    return c;
  }
};

/// Monte Carlo estimate of a_p = T^{-1} E[nu^{p,1}] (p = 0..P) and
/// c_0 = T^{-1} E[nu^{0,2}] over `reps` grid pairs drawn at the schemes'
/// scale b_n. Replication r uses stream (seed, stream_id(cell, r)), so the
/// result does not depend on `workers`.
inline SamplingCoefficients estimate_coefficients(const SamplingScheme& s1, const SamplingScheme& s2, int order,
                                                  std::size_t reps, std::uint64_t seed, unsigned workers = 0,
                                                  std::uint64_t cell = 0xC0EF)
{
  s1.validate();
  s2.validate();
  if (order < 1) {
    throw std::invalid_argument("estimate_coefficients: order P must be >= 1");
  }
  if (s1.horizon != s2.horizon || s1.scale != s2.scale) {
    throw std::invalid_argument("estimate_coefficients: schemes must share horizon and scale b_n");
  }
  const bool deterministic =
      s1.kind == SamplingScheme::Kind::equispaced && s2.kind == SamplingScheme::Kind::equispaced;
  if (!deterministic && reps < 100) {
    throw std::invalid_argument("estimate_coefficients: need at least 100 replications");
  }
  const std::size_t draws = deterministic ? 1 : reps;
  const auto width = static_cast<std::size_t>(order) + 2;  // a_0..a_P, c_0
  std::vector<std::vector<double>> rows(draws);
  const double bn = s1.scale;
  const double horizon = s1.horizon;
  parallel_for(draws, workers, [&](std::size_t r) {
    Engine rng(seed, stream_id(cell, r));
    const IntervalGrid g1 = generate_grid(s1, rng);
    const IntervalGrid g2 = generate_grid(s2, rng);
    const OverlapMatrix g = overlap_matrix(g1, g2);
    std::vector<double> row = trace_powers_spectral(g, order, 1);
    row.push_back(static_cast<double>(g2.size()));
    for (double& v : row) {
      v /= bn * horizon;
    }
    rows[r] = std::move(row);
  });

  std::vector<double> mean(width, 0.0), sq(width, 0.0);
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < width; ++k) {
      mean[k] += row[k];
    }
  }
  for (double& v : mean) {
    v /= static_cast<double>(draws);
  }
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < width; ++k) {
      sq[k] += (row[k] - mean[k]) * (row[k] - mean[k]);
    }
  }
  SamplingCoefficients out;
  out.scheme1 = s1;
  out.scheme2 = s2;
  out.replications = draws;
  out.a.assign(mean.begin(), mean.end() - 1);
  out.se.resize(out.a.size());
  for (std::size_t k = 0; k < width; ++k) {
    const double se = draws > 1 ? std::sqrt(sq[k] / static_cast<double>(draws - 1) / static_cast<double>(draws)) : 0.0;
    if (k + 1 < width) {
      out.se[k] = se;
    } else {
      out.c0_se = se;
    }
  }
  out.c0 = mean.back();
  if (out.se[1] > 0.05 * out.a[1]) {
    out.warnings.emplace_back("Monte Carlo error of a_1 exceeds 5%; raise the replication count");
  }
  return out;
}

/// Power series in rho^2 built from a_1..a_P:
///   A = Σ a_p ρ^{2p},  dA = ∂ρ A,  C = Σ a_p ρ^{2p} / p,
///   A_over_rho2 = A / ρ², dA_over_rho = dA / ρ (finite at ρ = 0).
struct SeriesValues
{
  double A = 0.0;
  double dA = 0.0;
  double C = 0.0;
  double A_over_rho2 = 0.0;
  double dA_over_rho = 0.0;
};

inline SeriesValues series_at(const SamplingCoefficients& coeffs, double rho, double tol = 1e-10)
{
  const int order = coeffs.order();
  if (order < 1) {
    throw std::invalid_argument("series_at: coefficients need order P >= 1");
  }
  if (!(std::abs(rho) < 1.0)) {
    throw std::invalid_argument("series_at: |rho| must be below 1");
  }
  const double r2 = rho * rho;
  const double tail = coeffs.a[static_cast<std::size_t>(order)] * std::pow(r2, order) / (1.0 - r2);
  if (tail > tol) {
    throw Error("series truncation tail " + text::format_double(tail, 4) + " above tolerance at rho = " +
                text::format_double(rho, 6) + "; increase P");
  }
  SeriesValues s;
  double pw = 1.0;  // ρ^{2p-2}
  for (int p = 1; p <= order; ++p) {
    const double ap = coeffs.a[static_cast<std::size_t>(p)];
    s.A_over_rho2 += ap * pw;
    s.dA_over_rho += 2.0 * p * ap * pw;
    s.C += ap * pw * r2 / p;
    pw *= r2;
  }
  s.A = s.A_over_rho2 * r2;
  s.dA = s.dA_over_rho * rho;
  return s;
}

/// (A(rho), ∂ρ A(rho)).
inline std::pair<double, double> A_and_derivative(const SamplingCoefficients& coeffs, double rho, double tol = 1e-10)
{
  const SeriesValues s = series_at(coeffs, rho, tol);
  return {s.A, s.dA};
}

/// h_t^∞(σ) for the true parameter sigma_star at covariate value x:
///   -1/2 B1² (a0 + A) - 1/2 B2² (c0 + A) + B1 B2 ρ ρ* A/ρ²
///   - a0 log|b¹| - c0 log|b²| + 1/2 C(ρ),
/// with B^k = |b^k(σ*)| / |b^k(σ)| and A, C evaluated at ρ = ρ(σ).
inline double limit_field(const SamplingCoefficients& coeffs, const DiffusionModel& model, const Eigen::VectorXd& sigma,
                          const Eigen::VectorXd& sigma_star, const Eigen::VectorXd& x = {}, double tol = 1e-10)
{
  const Eigen::Matrix2d b = model.diffusion(x, sigma);
  const Eigen::Matrix2d bs = model.diffusion(x, sigma_star);
  const double n1 = b.row(0).norm();
  const double n2 = b.row(1).norm();
  const double rho = b.row(0).dot(b.row(1)) / (n1 * n2);
  const double rho_star = bs.row(0).dot(bs.row(1)) / (bs.row(0).norm() * bs.row(1).norm());
  const double big1 = bs.row(0).norm() / n1;
  const double big2 = bs.row(1).norm() / n2;
  const double a0 = coeffs.a[0];
  const double c0 = coeffs.c0;
  const SeriesValues s = series_at(coeffs, rho, tol);
  return -0.5 * big1 * big1 * (a0 + s.A) - 0.5 * big2 * big2 * (c0 + s.A) +
         big1 * big2 * rho * rho_star * s.A_over_rho2 - a0 * std::log(n1) - c0 * std::log(n2) + 0.5 * s.C;
}

/// y_t(σ) = h_t^∞(σ) - h_t^∞(σ*); non-positive for an identifiable model.
inline double identifiability_contrast(const SamplingCoefficients& coeffs, const DiffusionModel& model,
                                       const Eigen::VectorXd& sigma, const Eigen::VectorXd& sigma_star,
                                       const Eigen::VectorXd& x = {}, double tol = 1e-10)
{
  return limit_field(coeffs, model, sigma, sigma_star, x, tol) - limit_field(coeffs, model, sigma_star, sigma_star, x, tol);
}

/// Hessian ∂²_σ h_t^∞(σ*) at covariate value x:
///   (A/ρ²) u uᵀ - (∂A/ρ) ∂ρ ∂ρᵀ - 2(a0 + A) ∂B¹ ∂B¹ᵀ - 2(c0 + A) ∂B² ∂B²ᵀ,
/// u = ∂ρ - ρ (∂B¹ + ∂B²), all at ρ = ρ*. σ-derivatives of |b^k| and ρ are
/// central differences of the model.
inline Eigen::MatrixXd limit_hessian(const SamplingCoefficients& coeffs, const DiffusionModel& model,
                                     const Eigen::VectorXd& sigma_star, const Eigen::VectorXd& x = {},
                                     double tol = 1e-10)
{
  const Eigen::Index d = sigma_star.size();
  const auto stats = [&](const Eigen::VectorXd& s) {
    const Eigen::Matrix2d b = model.diffusion(x, s);
    const double n1 = b.row(0).norm();
    const double n2 = b.row(1).norm();
    return Eigen::Vector3d(n1, n2, b.row(0).dot(b.row(1)) / (n1 * n2));
  };
  const Eigen::Vector3d at = stats(sigma_star);
  Eigen::VectorXd dn1(d), dn2(d), drho(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(sigma_star[i]));
    Eigen::VectorXd sp = sigma_star, sm = sigma_star;
    sp[i] += h;
    sm[i] -= h;
    const Eigen::Vector3d diff = (stats(sp) - stats(sm)) / (2.0 * h);
    dn1[i] = diff[0];
    dn2[i] = diff[1];
    drho[i] = diff[2];
  }
  const Eigen::VectorXd db1 = -dn1 / at[0];
  const Eigen::VectorXd db2 = -dn2 / at[1];
  const double rho = at[2];
  const SeriesValues s = series_at(coeffs, rho, tol);
  const Eigen::VectorXd u = drho - rho * (db1 + db2);
  return s.A_over_rho2 * u * u.transpose() - s.dA_over_rho * drho * drho.transpose() -
         2.0 * (coeffs.a[0] + s.A) * db1 * db1.transpose() - 2.0 * (coeffs.c0 + s.A) * db2 * db2.transpose();
}

/// Γ = -∫_0^T ∂²_σ h_t^∞(σ*) dt. Constant-coefficient models need a single
/// evaluation; otherwise the covariate trajectory t -> X_t is integrated by
/// the midpoint rule.
inline Eigen::MatrixXd gamma_general(const SamplingCoefficients& coeffs, const DiffusionModel& model,
                                     const Eigen::VectorXd& sigma_star, double horizon,
                                     const std::function<Eigen::VectorXd(double)>& covariate_at = {},
                                     int nodes = 64)
{
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("gamma_general: horizon must be positive");
  }
  Eigen::MatrixXd gamma;
  if (model.constant_coefficients() || !covariate_at) {
    if (!model.constant_coefficients()) {
      throw std::invalid_argument("gamma_general: covariate trajectory required for this model");
    }
    gamma = -horizon * limit_hessian(coeffs, model, sigma_star);
  } else {
    const double dt = horizon / nodes;
    gamma = Eigen::MatrixXd::Zero(sigma_star.size(), sigma_star.size());
    for (int k = 0; k < nodes; ++k) {
      gamma -= dt * limit_hessian(coeffs, model, sigma_star, covariate_at((k + 0.5) * dt));
    }
  }
  return 0.5 * (gamma + gamma.transpose());
}

namespace detail
{

struct TriangularTerms
{
  double rho, A, dArho, a0, c0, a, c;
};

inline TriangularTerms triangular_terms(const SamplingCoefficients& coeffs, const Eigen::VectorXd& s, double tol)
{
  if (s.size() != 3) {
    throw std::invalid_argument("triangular-model closed forms expect (sigma_1, sigma_2, sigma_3)");
  }
  TriangularTerms t{};
  t.rho = s[2] / std::hypot(s[1], s[2]);
  const SeriesValues sv = series_at(coeffs, t.rho, tol);
  t.A = sv.A;
  t.dArho = sv.dA * t.rho;
  t.a0 = coeffs.a[0];
  t.c0 = coeffs.c0;
  t.a = t.a0 + t.A;
  t.c = t.c0 + t.A;
  return t;
}

}  // namespace detail

/// Closed-form Γ of the triangular model (requires ρ* ≠ 0).
inline Eigen::Matrix3d gamma_triangular(const SamplingCoefficients& coeffs, const Eigen::VectorXd& s, double horizon,
                                      double tol = 1e-10)
{
  const auto t = detail::triangular_terms(coeffs, s, tol);
  if (t.rho == 0.0) {
    throw Error("gamma_triangular: rho = 0, the sign of sigma_3 is not identifiable");
  }
  const double r2 = t.rho * t.rho;
  const double q = (1.0 - r2) * (1.0 - r2);
  Eigen::Matrix3d g;
  g(0, 0) = (t.a0 + t.a) / (s[0] * s[0]);
  g(0, 1) = 0.0;
  g(0, 2) = -t.A / (s[0] * s[2]);
  g(1, 1) = (2.0 * t.c * q + t.dArho * q) / (s[1] * s[1]);
  g(1, 2) = (2.0 * t.c * r2 * (1.0 - r2) - t.dArho * q) / (s[1] * s[2]);
  g(2, 2) = (-t.A + 2.0 * t.c * r2 * r2 + t.dArho * q) / (s[2] * s[2]);
  g(1, 0) = g(0, 1);
  g(2, 0) = g(0, 2);
  g(2, 1) = g(1, 2);
  return horizon * g;
}

/// Closed-form Γ^{-1} of the triangular model: diag(σ) P diag(σ) / (T {-4acA + 2 ∂A ρ (a0 c + c0 a)}).
inline Eigen::Matrix3d gamma_inverse_triangular(const SamplingCoefficients& coeffs, const Eigen::VectorXd& s,
                                              double horizon, double tol = 1e-10)
{
  const auto t = detail::triangular_terms(coeffs, s, tol);
  if (t.rho == 0.0) {
    throw Error("gamma_inverse_triangular: rho = 0, the sign of sigma_3 is not identifiable");
  }
  const double r2 = t.rho * t.rho;
  const double q = (1.0 - r2) * (1.0 - r2);
  const double k = -2.0 * t.c * r2 / (1.0 - r2) + t.dArho;
  Eigen::Matrix3d p;
  p(0, 0) = -2.0 * t.c * t.A + (t.c0 + t.c) * t.dArho;
  p(0, 1) = t.A * k;
  p(0, 2) = t.A * (2.0 * t.c + t.dArho);
  p(1, 1) = (-2.0 * t.a * t.A + (t.a0 + t.a) * (2.0 * t.c * r2 * r2 + t.dArho * q)) / q;
  p(1, 2) = (t.a0 + t.a) * k;
  p(2, 2) = (t.a0 + t.a) * (2.0 * t.c + t.dArho);
  p(1, 0) = p(0, 1);
  p(2, 0) = p(0, 2);
  p(2, 1) = p(1, 2);
  const double denom = horizon * (-4.0 * t.a * t.c * t.A + 2.0 * t.dArho * (t.a0 * t.c + t.c0 * t.a));
  const Eigen::DiagonalMatrix<double, 3> d(s[0], s[1], s[2]);
  return (d * p * d) / denom;
}

struct TriangularVariance
{
  double v = 0.0;   ///< asymptotic variance of sqrt(n)(σ̂1 σ̂3 T - <Y¹, Y²>_T)
  double v0 = 0.0;  ///< asymptotic variance of sqrt(n)(HY_n - <Y¹, Y²>_T)
};

/// Delta-method variance v of the plug-in cross variation and the
/// Hayashi–Yoshida variance v0. v0 has a closed form for two Poisson schemes
/// (intensities λ1, λ2) and for identical equispaced grids (realized
/// covariance).
inline TriangularVariance variance_triangular(const SamplingCoefficients& coeffs, const Eigen::VectorXd& s, double horizon,
                                          double tol = 1e-10)
{
  const auto t = detail::triangular_terms(coeffs, s, tol);
  const double scale = horizon * s[0] * s[0] * s[2] * s[2];
  const double den = -2.0 * t.a * t.c * t.A + t.dArho * (t.a0 * t.c + t.c0 * t.a);
  if (!(std::abs(den) >= 1e-12)) {
    throw Error("variance_triangular: degenerate information (rho = 0)");
  }
  TriangularVariance out;
  out.v = scale * (2.0 * t.a * t.c + t.dArho * (t.a + t.c)) / den;

  using Kind = SamplingScheme::Kind;
  const SamplingScheme& s1 = coeffs.scheme1;
  const SamplingScheme& s2 = coeffs.scheme2;
  if (s1.kind == Kind::poisson && s2.kind == Kind::poisson) {
    const double l1 = s1.intensity;
    const double l2 = s2.intensity;
    const double r2 = s[2] * s[2] / (s[1] * s[1] + s[2] * s[2]);
    out.v0 = scale * ((1.0 + 1.0 / r2) * (2.0 / l1 + 2.0 / l2) - 2.0 / (l1 + l2));
  } else if (s1.kind == Kind::equispaced && s2.kind == Kind::equispaced && s1.count == s2.count) {
    const double s11 = s[0] * s[0];
    const double s22 = s[1] * s[1] + s[2] * s[2];
    const double s12 = s[0] * s[2];
    const double per_obs = s1.scale * horizon / static_cast<double>(s1.count);
    out.v0 = horizon * per_obs * (s11 * s22 + s12 * s12);
  } else {
    throw Error("variance_triangular: no closed form for v0 under this scheme pair");
  }
  return out;
}

/// Coefficient table: "p a_p se" rows, a "c0 value se" row, plus the
/// scheme pair and replication count needed to reuse the table.
inline void write_coefficients(std::ostream& os, const SamplingCoefficients& c)
{
  const auto scheme = [&](int id, const SamplingScheme& s) {
    os << "scheme " << id << ' ' << (s.kind == SamplingScheme::Kind::poisson ? "poisson" : "equispaced") << ' '
       << text::format_double(s.intensity) << ' ' << s.count << ' ' << text::format_double(s.scale) << ' '
       << text::format_double(s.horizon) << '\n';
  };
  os << "# p a_p se\n";
  scheme(1, c.scheme1);
  scheme(2, c.scheme2);
  os << "replications " << c.replications << '\n';
  for (std::size_t p = 0; p < c.a.size(); ++p) {
    os << p << ' ' << text::format_double(c.a[p]) << ' ' << text::format_double(c.se[p]) << '\n';
  }
  os << "c0 " << text::format_double(c.c0) << ' ' << text::format_double(c.c0_se) << '\n';
}

inline SamplingCoefficients read_coefficients(std::istream& is, const std::string& source = "<coefficients>")
{
  SamplingCoefficients c;
  bool have_c0 = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto f = text::fields(line);
    if (f.empty()) {
      continue;
    }
    if (f[0] == "scheme") {
      std::size_t id = 0;
      SamplingScheme s;
      if (f.size() != 7 || !text::parse_size(f[1], id) || (id != 1 && id != 2) ||
          (f[2] != "poisson" && f[2] != "equispaced") || !text::parse_double(f[3], s.intensity) ||
          !text::parse_size(f[4], s.count) || !text::parse_double(f[5], s.scale) ||
          !text::parse_double(f[6], s.horizon)) {
        throw ParseError(source, lineno, "expected 'scheme <1|2> <poisson|equispaced> <intensity> <count> <b_n> <T>'");
      }
      s.kind = f[2] == "poisson" ? SamplingScheme::Kind::poisson : SamplingScheme::Kind::equispaced;
      try {
        s.validate();
      } catch (const std::invalid_argument& e) {
        throw ParseError(source, lineno, e.what());
      }
      (id == 1 ? c.scheme1 : c.scheme2) = s;
    } else if (f[0] == "replications") {
      if (f.size() != 2 || !text::parse_size(f[1], c.replications)) {
        throw ParseError(source, lineno, "expected 'replications <count>'");
      }
    } else if (f[0] == "c0") {
      if (f.size() != 3 || !text::parse_double(f[1], c.c0) || !text::parse_double(f[2], c.c0_se)) {
        throw ParseError(source, lineno, "expected 'c0 <value> <se>'");
      }
      have_c0 = true;
    } else {
      std::size_t p = 0;
      double v = 0.0;
      double se = 0.0;
      if (f.size() != 3 || !text::parse_size(f[0], p) || !text::parse_double(f[1], v) ||
          !text::parse_double(f[2], se)) {
        throw ParseError(source, lineno, "expected '<p> <a_p> <se>'");
      }
      if (p != c.a.size()) {
        throw ParseError(source, lineno, "coefficient orders must be consecutive from 0");
      }
      c.a.push_back(v);
      c.se.push_back(se);
    }
  }
  if (c.a.size() < 2 || !have_c0) {
    throw ParseError(source, lineno, "table needs a_0, a_1 and a c0 row");
  }
  return c;
}

struct AsymptoticsReport
{
  SamplingCoefficients coeffs;
  Eigen::VectorXd sigma_star;
  double horizon = 1.0;
  double rho = 0.0;
  double A = 0.0;
  double dA = 0.0;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd gamma_inv;
  double v = 0.0;
  double v0 = 0.0;
};

/// Evaluates the triangular-model asymptotics: Γ from the general formula, Γ^{-1}
/// from the closed form, and (v, v0).
inline AsymptoticsReport triangular_asymptotics(SamplingCoefficients coeffs, const DiffusionModel& model,
                                              const Eigen::VectorXd& sigma_star, double horizon)
{
  AsymptoticsReport r;
  r.sigma_star = sigma_star;
  r.horizon = horizon;
  r.rho = model.correlation(Eigen::VectorXd(), sigma_star);
  std::tie(r.A, r.dA) = A_and_derivative(coeffs, r.rho);
  r.gamma = gamma_general(coeffs, model, sigma_star, horizon);
  r.gamma_inv = gamma_inverse_triangular(coeffs, sigma_star, horizon);
  const TriangularVariance var = variance_triangular(coeffs, sigma_star, horizon);
  r.v = var.v;
  r.v0 = var.v0;
  r.coeffs = std::move(coeffs);
  return r;
}

/// "key = value" report; matrices are row-major, space separated.
inline void write_report(std::ostream& os, const AsymptoticsReport& r, std::span<const double> n_values)
{
  const auto vec = [](const Eigen::VectorXd& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      s += (i ? " " : "") + text::format_double(v[i]);
    }
    return s;
  };
  const auto mat = [&](const Eigen::MatrixXd& m) {
    std::string s;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      s += (i ? " " : "") + vec(m.row(i).transpose());
    }
    return s;
  };
  os << "sigma_star = " << vec(r.sigma_star) << '\n';
  os << "T = " << text::format_double(r.horizon) << '\n';
  os << "replications = " << r.coeffs.replications << '\n';
  os << "order = " << r.coeffs.order() << '\n';
  os << "a0 = " << text::format_double(r.coeffs.a[0]) << '\n';
  os << "a1 = " << text::format_double(r.coeffs.a[1]) << '\n';
  os << "c0 = " << text::format_double(r.coeffs.c0) << '\n';
  os << "rho = " << text::format_double(r.rho) << '\n';
  os << "A = " << text::format_double(r.A) << '\n';
  os << "dA = " << text::format_double(r.dA) << '\n';
  os << "gamma = " << mat(r.gamma) << '\n';
  os << "gamma_inv = " << mat(r.gamma_inv) << '\n';
  os << "v = " << text::format_double(r.v) << '\n';
  os << "v0 = " << text::format_double(r.v0) << '\n';
  for (double n : n_values) {
    os << "sqrt_v_over_n[" << text::format_double(n) << "] = " << text::format_double(std::sqrt(r.v / n)) << '\n';
    os << "sqrt_v0_over_n[" << text::format_double(n) << "] = " << text::format_double(std::sqrt(r.v0 / n)) << '\n';
  }
  for (const auto& w : r.coeffs.warnings) {
    os << "warning = " << w << '\n';
  }
}

}  // namespace nsqla
