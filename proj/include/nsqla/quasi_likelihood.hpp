#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "nsqla/diffusion_model.hpp"
#include "nsqla/error.hpp"
#include "nsqla/interval_grid.hpp"
#include "nsqla/simulation.hpp"

namespace nsqla
{

/// Which algebraic route evaluates H_n.
///
/// `cholesky` factors the dense (l+m)² matrix S(sigma) for every sigma and
/// works for any model. `schur` is available when b does not depend on the
/// covariate: S then has scalar diagonal blocks, and after one
/// tridiagonalization of G^T G (or G G^T) per dataset every evaluation is a
/// Schur-complement solve in O(min(l, m)). Both are exact.
enum class LikelihoodMethod { automatic, cholesky, schur };

struct NeumannEvaluation
{
  double value = 0.0;
  int terms = 0;        ///< number of p-orders summed, p = 0 .. terms-1
  double rho_bar = 0.0; ///< max |rho| over overlapping pairs and interval starts
};

struct Derivatives
{
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  Eigen::VectorXd step;
};

/// Central finite differences of f at sigma with step
/// h_i = max(1e-5, 1e-5 |sigma_i|), halved until sigma ± 2h stays inside the
/// open box (error once h < 1e-8). The Hessian is symmetric by construction.
template <class F>
Derivatives central_differences(F&& f, const Eigen::VectorXd& sigma, const ParamBox& box)
{
  const Eigen::Index n = sigma.size();
  if (!box.contains(sigma)) {
    throw std::invalid_argument("grad_hess: sigma must be interior to the parameter box");
  }
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double step = std::max(1e-5, 1e-5 * std::abs(sigma[i]));
    while (sigma[i] - 2.0 * step <= box.lower[i] || sigma[i] + 2.0 * step >= box.upper[i]) {
      step *= 0.5;
      if (step < 1e-8) {
        throw std::invalid_argument("grad_hess: sigma too close to the boundary for finite differences");
      }
    }
    h[i] = step;
  }
  const double f0 = f(sigma);
  Derivatives out;
  out.step = h;
  out.gradient.resize(n);
  out.hessian.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd sp = sigma, sm = sigma;
    sp[i] += h[i];
    sm[i] -= h[i];
    const double fp = f(sp);
    const double fm = f(sm);
    out.gradient[i] = (fp - fm) / (2.0 * h[i]);
    out.hessian(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Eigen::VectorXd spp = sigma, spm = sigma, smp = sigma, smm = sigma;
      spp[i] += h[i], spp[j] += h[j];
      spm[i] += h[i], spm[j] -= h[j];
      smp[i] -= h[i], smp[j] += h[j];
      smm[i] -= h[i], smm[j] -= h[j];
      const double v = (f(spp) - f(spm) - f(smp) + f(smm)) / (4.0 * h[i] * h[j]);
      out.hessian(i, j) = v;
      out.hessian(j, i) = v;
    }
  }
  return out;
}

/// Quasi-log-likelihood H_n for one observation set and model.
///
/// Single owner: evaluations update an internal cache. Several workspaces may
/// share one immutable ObservationSet.
class QuasiLikelihood
{
public:
  QuasiLikelihood(std::shared_ptr<const ObservationSet> obs, DiffusionModel model,
                  LikelihoodMethod method = LikelihoodMethod::automatic)
    : obs_(std::move(obs)), model_(std::move(model)), method_(method)
  {
    if (!obs_) {
      throw std::invalid_argument("QuasiLikelihood: null observation set");
    }
    if (obs_->covariate_dim() != model_.covariate_dim()) {
      throw std::invalid_argument("QuasiLikelihood: covariate dimension of data and model differ");
    }
    if (method_ == LikelihoodMethod::automatic) {
      method_ = model_.constant_coefficients() ? LikelihoodMethod::schur : LikelihoodMethod::cholesky;
    }
    if (method_ == LikelihoodMethod::schur && !model_.constant_coefficients()) {
      throw std::invalid_argument("QuasiLikelihood: Schur route needs covariate-free diffusion coefficients");
    }
    overlap_ = overlap_matrix(obs_->grid1, obs_->grid2);
    const Eigen::Index l = obs_->incr1.size();
    const Eigen::Index m = obs_->incr2.size();
    z_.resize(l + m);
    for (Eigen::Index i = 0; i < l; ++i) {
      z_[i] = obs_->incr1[i] / std::sqrt(obs_->grid1.length(static_cast<std::size_t>(i)));
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      z_[l + j] = obs_->incr2[j] / std::sqrt(obs_->grid2.length(static_cast<std::size_t>(j)));
    }
  }

  QuasiLikelihood(ObservationSet obs, DiffusionModel model, LikelihoodMethod method = LikelihoodMethod::automatic)
    : QuasiLikelihood(std::make_shared<const ObservationSet>(std::move(obs)), std::move(model), method)
  {
  }

  const ObservationSet& observations() const noexcept { return *obs_; }
  std::shared_ptr<const ObservationSet> shared_observations() const noexcept { return obs_; }
  const DiffusionModel& model() const noexcept { return model_; }
  const OverlapMatrix& overlap() const noexcept { return overlap_; }
  LikelihoodMethod method() const noexcept { return method_; }
  Eigen::Index rows1() const noexcept { return obs_->incr1.size(); }
  Eigen::Index rows2() const noexcept { return obs_->incr2.size(); }

  /// z = ((Y^1(I)/sqrt|I|)_I, (Y^2(J)/sqrt|J|)_J)
  const Eigen::VectorXd& scaled_increments() const noexcept { return z_; }

  Eigen::MatrixXd assemble_S(const Eigen::VectorXd& sigma) const
  {
    Eigen::MatrixX2d b1, b2;
    loadings(sigma, b1, b2);
    const Eigen::Index l = rows1();
    const Eigen::Index m = rows2();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(l + m, l + m);
    for (Eigen::Index i = 0; i < l; ++i) {
      s(i, i) = b1.row(i).squaredNorm();
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      s(l + j, l + j) = b2.row(j).squaredNorm();
    }
    for_each_overlap(obs_->grid1, obs_->grid2, [&](std::size_t i, std::size_t j, double) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      const double v = b1.row(ii).dot(b2.row(jj)) * overlap_(ii, jj);
      s(ii, l + jj) = v;
      s(l + jj, ii) = v;
    });
    return s;
  }

  /// H_n(sigma). Throws NotPositiveDefinite when S(sigma) does not factor.
  double loglik(const Eigen::VectorXd& sigma)
  {
    if (sigma.size() != model_.dim_param()) {
      throw std::invalid_argument("loglik: parameter dimension mismatch");
    }
    if (cached_sigma_ && cached_sigma_->size() == sigma.size() && *cached_sigma_ == sigma) {
      if (!cached_pd_) {
        throw NotPositiveDefinite("S(sigma) is not positive definite");
      }
      return cached_value_;
    }
    cached_sigma_ = sigma;
    cached_pd_ = false;
    const double value = method_ == LikelihoodMethod::schur ? loglik_schur(sigma) : loglik_cholesky(sigma);
    cached_pd_ = true;
    cached_value_ = value;
    return value;
  }

  /// H_n(sigma), or -inf where S(sigma) is not positive definite.
  double objective(const Eigen::VectorXd& sigma)
  {
    try {
      return loglik(sigma);
    } catch (const NotPositiveDefinite&) {
      return -std::numeric_limits<double>::infinity();
    }
  }

  /// Lower Cholesky factor of the last S(sigma) evaluated on the dense route.
  const Eigen::MatrixXd& cholesky_factor() const noexcept { return chol_; }

  /// Series evaluation of H_n through S = D (E + L~) D:
  ///   -1/2 Σ_p (-1)^p Z^T L~^p Z - log det D + Σ_k tr((L L^T)^k) / (2k).
  /// Orders are summed until rho_bar^p (l+m) < tol.
  NeumannEvaluation loglik_neumann(const Eigen::VectorXd& sigma, double tol = 1e-10) const
  {
    Eigen::MatrixX2d b1, b2;
    loadings(sigma, b1, b2);
    const Eigen::Index l = rows1();
    const Eigen::Index m = rows2();
    Eigen::VectorXd d(l + m);
    for (Eigen::Index i = 0; i < l; ++i) {
      d[i] = b1.row(i).norm();
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      d[l + j] = b2.row(j).norm();
    }
    if ((d.array() <= 0.0).any()) {
      throw NotPositiveDefinite("loglik_neumann: zero diffusion row");
    }
    double rho_bar = 0.0;
    const Eigen::VectorXd none;
    const auto rho_at = [&](const Eigen::MatrixXd& cov, Eigen::Index row) {
      const Eigen::VectorXd x = cov.cols() > 0 ? Eigen::VectorXd(cov.row(row).transpose()) : none;
      return std::abs(model_.correlation(x, sigma));
    };
    for (Eigen::Index i = 0; i < l; ++i) {
      rho_bar = std::max(rho_bar, rho_at(obs_->cov1, i));
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      rho_bar = std::max(rho_bar, rho_at(obs_->cov2, j));
    }
    Eigen::MatrixXd link = Eigen::MatrixXd::Zero(l, m);
    for_each_overlap(obs_->grid1, obs_->grid2, [&](std::size_t i, std::size_t j, double) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      const double rho = b1.row(ii).dot(b2.row(jj)) / (d[ii] * d[l + jj]);
      rho_bar = std::max(rho_bar, std::abs(rho));
      link(ii, jj) = rho * overlap_(ii, jj);
    });
    if (rho_bar >= 1.0 - 1e-6) {
      throw Error("loglik_neumann: near-singular correlation (rho_bar = " + std::to_string(rho_bar) + ")");
    }

    const Eigen::VectorXd scaled = z_.cwiseQuotient(d);
    const Eigen::MatrixXd gram = l <= m ? Eigen::MatrixXd(link * link.transpose())
                                        : Eigen::MatrixXd(link.transpose() * link);
    Eigen::MatrixXd power = gram;
    Eigen::VectorXd v = scaled;
    const auto apply = [&](const Eigen::VectorXd& u) {
      Eigen::VectorXd out(l + m);
      out.head(l) = link * u.tail(m);
      out.tail(m) = link.transpose() * u.head(l);
      return out;
    };

    const double size = static_cast<double>(l + m);
    double quad = 0.0;
    double trace_part = 0.0;
    int terms = 0;
    for (int p = 0;; ++p) {
      if (p >= 1 && std::pow(rho_bar, p) * size < tol) {
        break;
      }
      if (p > 100000) {
        throw Error("loglik_neumann: series did not reach tolerance");
      }
      const double term = scaled.dot(v);
      quad += (p % 2 == 0 ? term : -term);
      if (p >= 2 && p % 2 == 0) {
        const int k = p / 2;
        if (k > 1) {
          power = power * gram;
        }
        trace_part += power.trace() / (2.0 * k);
      }
      v = apply(v);
      ++terms;
    }
    NeumannEvaluation out;
    out.value = -0.5 * quad - d.array().log().sum() + trace_part;
    out.terms = terms;
    out.rho_bar = rho_bar;
    return out;
  }

  /// Central finite differences of H_n; see central_differences().
  Derivatives grad_hess(const Eigen::VectorXd& sigma);

private:
  /// Rows b^1 at every I and b^2 at every J, evaluated at the covariate
  /// snapshot taken at the interval's left end.
  void loadings(const Eigen::VectorXd& sigma, Eigen::MatrixX2d& b1, Eigen::MatrixX2d& b2) const
  {
    const Eigen::Index l = rows1();
    const Eigen::Index m = rows2();
    b1.resize(l, 2);
    b2.resize(m, 2);
    if (model_.constant_coefficients()) {
      const Eigen::Matrix2d b = model_.diffusion(Eigen::VectorXd(), sigma);
      b1.rowwise() = b.row(0);
      b2.rowwise() = b.row(1);
      return;
    }
    for (Eigen::Index i = 0; i < l; ++i) {
      b1.row(i) = model_.diffusion(obs_->cov1.row(i).transpose(), sigma).row(0);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      b2.row(j) = model_.diffusion(obs_->cov2.row(j).transpose(), sigma).row(1);
    }
  }

  double loglik_cholesky(const Eigen::VectorXd& sigma)
  {
    const Eigen::MatrixXd s = assemble_S(sigma);
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite("S(sigma) is not positive definite");
    }
    chol_ = llt.matrixL();
    const Eigen::VectorXd diag = chol_.diagonal();
    if (!(diag.array() > 0.0).all() || !diag.allFinite()) {
      throw NotPositiveDefinite("S(sigma) has a non-positive Cholesky pivot");
    }
    const Eigen::VectorXd w = chol_.triangularView<Eigen::Lower>().solve(z_);
    return -0.5 * w.squaredNorm() - diag.array().log().sum();
  }

  struct SchurData
  {
    bool eliminate_first = true;  ///< eliminate the block of grid 1
    Eigen::Index big = 0;
    Eigen::Index small = 0;
    double big_norm2 = 0.0;       ///< |z_b|^2
    Eigen::VectorXd diag;         ///< tridiagonal form of G_bs^T G_bs
    Eigen::VectorXd sub;
    Eigen::VectorXd q;            ///< Q^T z_s
    Eigen::VectorXd r;            ///< Q^T G_bs^T z_b
  };

  void prepare_schur()
  {
    SchurData sd;
    const Eigen::Index l = rows1();
    const Eigen::Index m = rows2();
    sd.eliminate_first = l >= m;
    const Eigen::MatrixXd& g = overlap_.dense();
    // G_bs couples the eliminated (big) block to the kept (small) block.
    const Eigen::MatrixXd coupling = sd.eliminate_first ? g : Eigen::MatrixXd(g.transpose());
    const Eigen::VectorXd zb = sd.eliminate_first ? Eigen::VectorXd(z_.head(l)) : Eigen::VectorXd(z_.tail(m));
    const Eigen::VectorXd zs = sd.eliminate_first ? Eigen::VectorXd(z_.tail(m)) : Eigen::VectorXd(z_.head(l));
    sd.big = coupling.rows();
    sd.small = coupling.cols();
    sd.big_norm2 = zb.squaredNorm();
    const Eigen::MatrixXd gram = coupling.transpose() * coupling;
    const Eigen::VectorXd gz = coupling.transpose() * zb;

    bool tridiagonal = true;
    for (Eigen::Index j = 0; j < gram.cols() && tridiagonal; ++j) {
      for (Eigen::Index i = j + 2; i < gram.rows(); ++i) {
        if (gram(i, j) != 0.0) {
          tridiagonal = false;
          break;
        }
      }
    }
    if (tridiagonal) {
      sd.diag = gram.diagonal();
      sd.sub = sd.small > 1 ? Eigen::VectorXd(gram.diagonal(-1)) : Eigen::VectorXd();
      sd.q = zs;
      sd.r = gz;
    } else {
      Eigen::Tridiagonalization<Eigen::MatrixXd> tri(gram);
      sd.diag = tri.diagonal();
      sd.sub = tri.subDiagonal();
      const auto qmat = tri.matrixQ();
      sd.q = qmat.transpose() * zs;
      sd.r = qmat.transpose() * gz;
    }
    schur_ = std::move(sd);
  }

  double loglik_schur(const Eigen::VectorXd& sigma)
  {
    if (!schur_) {
      prepare_schur();
    }
    const SchurData& sd = *schur_;
    const Eigen::Matrix2d b = model_.diffusion(Eigen::VectorXd(), sigma);
    const double n1 = b.row(0).squaredNorm();
    const double n2 = b.row(1).squaredNorm();
    const double cross = b.row(0).dot(b.row(1));
    const double alpha_b = sd.eliminate_first ? n1 : n2;
    const double alpha_s = sd.eliminate_first ? n2 : n1;
    if (!(alpha_b > 0.0) || !(alpha_s > 0.0)) {
      throw NotPositiveDefinite("S(sigma) has a zero diagonal block");
    }
    const double c = cross * cross / alpha_b;
    const double ratio = cross / alpha_b;
    double logdet = static_cast<double>(sd.big) * std::log(alpha_b);
    double quad = sd.big_norm2 / alpha_b;
    // LDL^T of the tridiagonal alpha_s I - c T.
    double pivot = 0.0;
    double y = 0.0;
    for (Eigen::Index k = 0; k < sd.small; ++k) {
      const double w = sd.q[k] - ratio * sd.r[k];
      const double mkk = alpha_s - c * sd.diag[k];
      if (k == 0) {
        pivot = mkk;
        y = w;
      } else {
        const double off = -c * sd.sub[k - 1];
        const double mult = off / pivot;
        pivot = mkk - mult * off;
        y = w - mult * y;
      }
      if (!(pivot > 0.0)) {
        throw NotPositiveDefinite("S(sigma) is not positive definite");
      }
      logdet += std::log(pivot);
      quad += y * y / pivot;
    }
    return -0.5 * quad - 0.5 * logdet;
  }

  std::shared_ptr<const ObservationSet> obs_;
  DiffusionModel model_;
  LikelihoodMethod method_;
  OverlapMatrix overlap_;
  Eigen::VectorXd z_;
  std::optional<SchurData> schur_;
  Eigen::MatrixXd chol_;
  std::optional<Eigen::VectorXd> cached_sigma_;
  bool cached_pd_ = false;
  double cached_value_ = 0.0;
};

inline Derivatives QuasiLikelihood::grad_hess(const Eigen::VectorXd& sigma)
{
  return central_differences([this](const Eigen::VectorXd& s) { return loglik(s); }, sigma, model_.box());
}

inline Eigen::MatrixXd assemble_S(const QuasiLikelihood& ws, const Eigen::VectorXd& sigma)
{
  return ws.assemble_S(sigma);
}

inline double quasi_loglik(QuasiLikelihood& ws, const Eigen::VectorXd& sigma)
{
  return ws.loglik(sigma);
}

inline NeumannEvaluation quasi_loglik_neumann(const QuasiLikelihood& ws, const Eigen::VectorXd& sigma,
                                              double tol = 1e-10)
{
  return ws.loglik_neumann(sigma, tol);
}

inline Derivatives grad_hess(QuasiLikelihood& ws, const Eigen::VectorXd& sigma)
{
  return ws.grad_hess(sigma);
}

}  // namespace nsqla
