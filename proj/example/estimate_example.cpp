// Simulates one nonsynchronously observed path of the two-factor model
//   dY1 = s1 dW1,  dY2 = s3 dW1 + s2 dW2
// under Poisson sampling and compares the quasi-MLE plug-in cross variation
// with the Hayashi–Yoshida estimator.

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "nsqla/nsqla.hpp"

int main()
{
  const Eigen::Vector3d truth(1.0, 1.0, 0.5);
  const double horizon = 1.0;
  const double n = 300.0;
  const nsqla::DiffusionModel model = nsqla::triangular_model();

  nsqla::Engine rng(2024, nsqla::stream_id(1, 0));
  const auto scheme = nsqla::SamplingScheme::poisson(1.0, n, horizon);
  const nsqla::IntervalGrid g1 = nsqla::generate_grid(scheme, rng);
  const nsqla::IntervalGrid g2 = nsqla::generate_grid(scheme, rng);

  std::vector<double> knots(g1.endpoints().begin(), g1.endpoints().end());
  knots.insert(knots.end(), g2.endpoints().begin(), g2.endpoints().end());
  const nsqla::FinePath path = nsqla::simulate_path(model, truth, horizon, 16 * 300, rng, knots);
  auto obs = std::make_shared<const nsqla::ObservationSet>(nsqla::observe(path, g1, g2));

  nsqla::QuasiLikelihood ws(obs, model);
  const nsqla::QmleResult fit = nsqla::qmle(ws, truth, rng);
  const Eigen::VectorXd tilde = nsqla::bayes(ws, fit.sigma_hat);

  std::printf("observations: %zu and %zu intervals\n", obs->grid1.size(), obs->grid2.size());
  std::printf("QMLE        : %.4f %.4f %.4f (converged: %s)\n", fit.sigma_hat[0], fit.sigma_hat[1],
              fit.sigma_hat[2], fit.converged ? "yes" : "no");
  std::printf("Bayes       : %.4f %.4f %.4f\n", tilde[0], tilde[1], tilde[2]);
  std::printf("plug-in     : %.4f\n", nsqla::plugin_crosscov(fit.sigma_hat, horizon));
  std::printf("HY          : %.4f\n", nsqla::hayashi_yoshida(*obs));

  const auto coeffs = nsqla::estimate_coefficients(scheme, scheme, 40, 200, 7);
  const auto var = nsqla::variance_triangular(coeffs, truth, horizon);
  std::printf("asymptotic sd at n = %.0f: plug-in %.4f, HY %.4f\n", n, std::sqrt(var.v / n), std::sqrt(var.v0 / n));
  return 0;
}
