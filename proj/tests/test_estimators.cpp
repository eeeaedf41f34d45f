#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "nsqla/nsqla.hpp"
#include "test_support.hpp"

using Catch::Approx;
using nsqla::IntervalGrid;
using nsqla::QuasiLikelihood;

TEST_CASE("Gauss-Legendre rules", "[quadrature]")
{
  for (int n : {1, 2, 5, 15, 31}) {
    const auto rule = nsqla::gauss_legendre(n);
    const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
    CHECK(total == Approx(2.0).epsilon(1e-14));
    CHECK(std::is_sorted(rule.nodes.begin(), rule.nodes.end()));
    // exact for polynomials of degree 2n - 1
    const int deg = 2 * n - 2;
    double integral = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      integral += rule.weights[k] * std::pow(rule.nodes[k], deg);
    }
    CHECK(integral == Approx(2.0 / (deg + 1)).epsilon(1e-13));
  }
  const auto three = nsqla::gauss_legendre(3);
  CHECK(three.nodes[2] == Approx(std::sqrt(0.6)).epsilon(1e-15));
  CHECK(three.weights[1] == Approx(8.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("Nelder-Mead finds the minimum of a quadratic bowl", "[optimizer]")
{
  const Eigen::Vector3d target(0.3, -0.2, 0.5);
  const auto f = [&](const Eigen::VectorXd& x) { return (x - target).squaredNorm() + 0.5 * x[0] * x[1]; };
  const auto r = nsqla::nelder_mead(f, Eigen::Vector3d(0.0, 0.0, 0.0));
  CHECK(r.converged);
  Eigen::Matrix3d a;
  a << 2.0, 0.5, 0.0, 0.5, 2.0, 0.0, 0.0, 0.0, 2.0;
  const Eigen::Vector3d exact = a.ldlt().solve(2.0 * target);
  CHECK((r.x - exact).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("QMLE on synchronous grids is the realized covariance", "[qmle]")
{
  const auto model = nsqla::triangular_model();
  nsqla::Engine rng(31, 0);
  const IntervalGrid g = IntervalGrid::equispaced(200, 1.0);
  const auto obs = test_support::simulate_obs(model, Eigen::Vector3d(1.0, 1.0, 0.5), g, g, rng, 200);
  QuasiLikelihood ws(obs, model);
  const auto fit = nsqla::qmle(ws, Eigen::Vector3d(1.0, 1.0, 0.5), rng);
  CHECK(fit.converged);
  CHECK_FALSE(fit.on_boundary);
  const double rc11 = obs->incr1.squaredNorm();
  const double rc22 = obs->incr2.squaredNorm();
  const double rc12 = obs->incr1.dot(obs->incr2);
  const double s1 = std::sqrt(rc11);
  const double s3 = rc12 / s1;
  const double s2 = std::sqrt(rc22 - s3 * s3);
  CHECK(fit.sigma_hat[0] == Approx(s1).margin(1e-5));
  CHECK(fit.sigma_hat[1] == Approx(s2).margin(1e-5));
  CHECK(fit.sigma_hat[2] == Approx(s3).margin(1e-5));
}

TEST_CASE("QMLE start must be inside the box", "[qmle]")
{
  const auto model = nsqla::triangular_model();
  const IntervalGrid g = IntervalGrid::equispaced(5, 1.0);
  QuasiLikelihood ws(nsqla::ObservationSet(g, g, Eigen::VectorXd::Ones(5), Eigen::VectorXd::Ones(5)), model);
  nsqla::Engine rng(1, 1);
  CHECK_THROWS_AS(nsqla::qmle(ws, Eigen::Vector3d(0.0, 1.0, 0.0), rng), std::invalid_argument);
}

TEST_CASE("QMLE flags estimates on the boundary", "[qmle]")
{
  // Nearly independent coordinates with tiny variance push sigma_1 to its lower bound.
  const auto model = nsqla::triangular_model();
  nsqla::Engine rng(32, 0);
  const IntervalGrid g = IntervalGrid::equispaced(100, 1.0);
  const auto obs = test_support::simulate_obs(model, Eigen::Vector3d(1.0, 1.0, 0.5), g, g, rng, 100);
  QuasiLikelihood ws(nsqla::ObservationSet(g, g, 1e-3 * obs->incr1, obs->incr2), model);
  const auto fit = nsqla::qmle(ws, Eigen::Vector3d(1.0, 1.0, 0.5), rng);
  CHECK(fit.on_boundary);
  CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("H_n does not depend on the order of the intervals", "[qmle]")
{
  const auto model = nsqla::triangular_model();
  nsqla::Engine rng(33, 0);
  const auto [g1, g2] = test_support::poisson_pair(25.0, rng);
  const auto obs = test_support::simulate_obs(model, Eigen::Vector3d(1.0, 1.0, 0.5), g1, g2, rng);
  QuasiLikelihood ws(obs, model, nsqla::LikelihoodMethod::cholesky);
  const Eigen::Vector3d s(0.9, 1.2, 0.4);
  const Eigen::MatrixXd S = ws.assemble_S(s);
  const Eigen::VectorXd& z = ws.scaled_increments();
  const auto l = static_cast<int>(g1.size());
  std::vector<int> order(static_cast<std::size_t>(z.size()));
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.begin() + l);  // permute the I intervals
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(Eigen::Map<Eigen::VectorXi>(order.data(), z.size()));
  const Eigen::MatrixXd Sp = perm.transpose() * S * perm;
  const Eigen::VectorXd zp = perm.transpose() * z;
  Eigen::LLT<Eigen::MatrixXd> llt(Sp);
  const Eigen::VectorXd w = llt.matrixL().solve(zp);
  const double permuted = -0.5 * w.squaredNorm() - Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  CHECK(test_support::relative_error(permuted, ws.loglik(s)) < 1e-12);
}

TEST_CASE("Posterior mean of a symmetric density is its mode", "[bayes]")
{
  const Eigen::Vector3d mode(0.2, -0.1, 0.4);
  Eigen::Matrix3d prec;
  prec << 4.0, 1.0, 0.0, 1.0, 3.0, -0.5, 0.0, -0.5, 2.0;
  const auto logd = [&](const Eigen::VectorXd& x) { return -0.5 * (x - mode).dot(prec * (x - mode)); };
  const Eigen::Vector3d half(1.5, 2.0, 2.5);
  const Eigen::VectorXd mean = nsqla::posterior_mean(logd, mode - half, mode + half, 15);
  CHECK((mean - mode).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Posterior mass below resolution is an error", "[bayes]")
{
  const auto logd = [](const Eigen::VectorXd&) { return -std::numeric_limits<double>::infinity(); };
  CHECK_THROWS_WITH(nsqla::posterior_mean(logd, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 1.0), 5),
                    Catch::Matchers::ContainsSubstring("posterior mass below resolution"));
}

TEST_CASE("Bayes estimator is stable under quadrature refinement", "[bayes]")
{
  const auto model = nsqla::triangular_model();
  nsqla::Engine rng(34, 0);
  const auto [g1, g2] = test_support::poisson_pair(500.0, rng);
  const auto obs = test_support::simulate_obs(model, Eigen::Vector3d(1.0, 1.0, 0.5), g1, g2, rng, 4000);
  QuasiLikelihood ws(obs, model);
  const auto fit = nsqla::qmle(ws, Eigen::Vector3d(1.0, 1.0, 0.5), rng);
  nsqla::BayesOptions coarse;
  nsqla::BayesOptions fine;
  fine.nodes = 31;
  const Eigen::VectorXd a = nsqla::bayes(ws, fit.sigma_hat, coarse);
  const Eigen::VectorXd b = nsqla::bayes(ws, fit.sigma_hat, fine);
  CHECK((a - b).norm() < 1e-4);
  CHECK((a - fit.sigma_hat).norm() < 0.05);

  nsqla::BayesOptions wide;
  wide.window = 10.0;
  wide.nodes = 31;
  CHECK((nsqla::bayes(ws, fit.sigma_hat, wide) - b).norm() < 1e-4);

  nsqla::BayesOptions prior = fine;
  prior.log_prior = [](const Eigen::VectorXd& s) { return -s[2]; };  // tilts sigma_3 down
  CHECK(nsqla::bayes(ws, fit.sigma_hat, prior)[2] < b[2]);
}

TEST_CASE("Hayashi-Yoshida estimator", "[hy]")
{
  const auto model = nsqla::triangular_model();
  nsqla::Engine rng(35, 0);

  SECTION("synchronous grids give the realized covariance")
  {
    const IntervalGrid g = IntervalGrid::equispaced(50, 1.0);
    const auto obs = test_support::simulate_obs(model, Eigen::Vector3d(1.0, 1.0, 0.5), g, g, rng, 50);
    CHECK(nsqla::hayashi_yoshida(*obs) == Approx(obs->incr1.dot(obs->incr2)).epsilon(1e-14));
  }
  SECTION("single intervals give the product of the total changes")
  {
    const IntervalGrid g({0.0, 1.0});
    const nsqla::ObservationSet obs(g, g, Eigen::VectorXd::Constant(1, 0.7), Eigen::VectorXd::Constant(1, -0.3));
    CHECK(nsqla::hayashi_yoshida(obs) == Approx(-0.21).epsilon(1e-15));
  }
  SECTION("bilinear in the increments")
  {
    const auto [g1, g2] = test_support::poisson_pair(80.0, rng);
    const auto obs = test_support::simulate_obs(model, Eigen::Vector3d(1.0, 1.0, 0.5), g1, g2, rng);
    const nsqla::ObservationSet scaled(g1, g2, 4.0 * obs->incr1, obs->incr2);
    CHECK(nsqla::hayashi_yoshida(scaled) == 4.0 * nsqla::hayashi_yoshida(*obs));
  }
  SECTION("matches the overlap-indicator double sum")
  {
    const auto [g1, g2] = test_support::poisson_pair(40.0, rng);
    const auto obs = test_support::simulate_obs(model, Eigen::Vector3d(1.0, 1.0, 0.5), g1, g2, rng);
    const Eigen::MatrixXd G = nsqla::overlap_matrix(g1, g2).dense();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
      for (Eigen::Index j = 0; j < G.cols(); ++j) {
        sum += G(i, j) > 0.0 ? obs->incr1[i] * obs->incr2[j] : 0.0;
      }
    }
    CHECK(nsqla::hayashi_yoshida(*obs) == Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("Plug-in cross variation", "[plugin]")
{
  CHECK(nsqla::plugin_crosscov(Eigen::Vector3d(1.0, 1.0, 0.5), 1.0) == 0.5);
  CHECK(nsqla::plugin_crosscov(Eigen::Vector3d(0.5, 2.0, 1.0), 2.0) == 1.0);
  CHECK_THROWS(nsqla::plugin_crosscov(Eigen::Vector2d(1.0, 1.0), 1.0));
}

TEST_CASE("QMLE error shrinks with n", "[qmle][slow]")
{
  nsqla::ExperimentConfig cfg;
  cfg.n_values = {50.0, 500.0};
  cfg.replications = 500;
  cfg.hy = false;
  cfg.seed = 99;
  const auto rows = nsqla::run_table(cfg);
  Eigen::Vector3d err50 = Eigen::Vector3d::Zero();
  Eigen::Vector3d err500 = Eigen::Vector3d::Zero();
  for (const auto& r : rows) {
    (r.n == 50.0 ? err50 : err500) += (r.sigma_hat - cfg.sigma_star).cwiseAbs();
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(err500[i] < err50[i]);
  }
}
