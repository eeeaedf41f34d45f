#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nsqla/error.hpp"
#include "nsqla/text_io.hpp"

namespace nsqla
{

/// Experiment description for the command-line front end.
///
/// Text form: one `key = value` per line, '#' comments; lists are
/// comma-separated. The same `key=value` syntax is accepted as an override.
struct ExperimentConfig
{
  Eigen::VectorXd sigma_star = Eigen::Vector3d(1.0, 1.0, 0.5);
  Eigen::VectorXd sigma_start;  ///< empty: start the optimizer at sigma_star
  Eigen::VectorXd box_lower = Eigen::Vector3d(0.1, 0.1, -3.0);
  Eigen::VectorXd box_upper = Eigen::Vector3d(3.0, 3.0, 3.0);
  double horizon = 1.0;
  std::string scheme = "poisson";  ///< poisson | equispaced
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::vector<double> n_values{50.0, 100.0, 500.0};
  std::size_t replications = 1000;
  std::uint64_t seed = 42;
  bool qmle = true;
  bool bayes = false;
  bool hy = true;
  int bayes_nodes = 15;
  double bayes_window = 6.0;
  unsigned workers = 0;
  double fine_steps_factor = 16.0;
  double coeff_bn = 400.0;
  std::size_t coeff_reps = 500;
  int coeff_order = 40;
  Eigen::Vector2d drift = Eigen::Vector2d::Zero();
  std::string csv;           ///< per-replication rows (table)
  std::string summary;       ///< summary table (table)
  std::string report;        ///< key-value report (estimate, asymptotics)
  std::string coefficients;  ///< coefficient table to reuse (asymptotics)
  std::string dataset;       ///< observations to load (estimate) or write (simulate)
  std::string path_dump;     ///< fine path dump (simulate, estimate)

  /// Applies one `key = value` assignment; throws Error naming the key.
  void set(std::string_view key, std::string_view value)
  {
    key = text::trim(key);
    value = text::trim(value);
    const std::string k(key);
    const auto bad = [&](const char* expected) {
      return Error("configuration key '" + k + "': expected " + expected + ", got '" + std::string(value) + "'");
    };
    const auto real = [&](double& out) {
      if (!text::parse_double(value, out) || !std::isfinite(out)) {
        throw bad("a number");
      }
    };
    const auto count = [&](std::size_t& out) {
      if (!text::parse_size(value, out)) {
        throw bad("a non-negative integer");
      }
    };
    const auto flag = [&](bool& out) {
      if (value == "true" || value == "1" || value == "on" || value == "yes") {
        out = true;
      } else if (value == "false" || value == "0" || value == "off" || value == "no") {
        out = false;
      } else {
        throw bad("true or false");
      }
    };
    const auto list = [&](std::vector<double>& out) {
      out.clear();
      for (auto token : text::split(value, ',')) {
        double v = 0.0;
        if (!text::parse_double(token, v) || !std::isfinite(v)) {
          throw bad("a comma-separated list of numbers");
        }
        out.push_back(v);
      }
    };
    const auto vector = [&](Eigen::VectorXd& out) {
      std::vector<double> v;
      list(v);
      out = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    };

    if (k == "sigma_star") {
      vector(sigma_star);
    } else if (k == "sigma_start") {
      vector(sigma_start);
    } else if (k == "box_lower") {
      vector(box_lower);
    } else if (k == "box_upper") {
      vector(box_upper);
    } else if (k == "T") {
      real(horizon);
    } else if (k == "scheme") {
      if (value != "poisson" && value != "equispaced") {
        throw bad("poisson or equispaced");
      }
      scheme = std::string(value);
    } else if (k == "lambda1") {
      real(lambda1);
    } else if (k == "lambda2") {
      real(lambda2);
    } else if (k == "n_values") {
      list(n_values);
    } else if (k == "replications") {
      count(replications);
    } else if (k == "seed") {
      std::size_t s = 0;
      count(s);
      seed = s;
    } else if (k == "qmle") {
      flag(qmle);
    } else if (k == "bayes") {
      flag(bayes);
    } else if (k == "hy") {
      flag(hy);
    } else if (k == "bayes_nodes") {
      std::size_t v = 0;
      count(v);
      bayes_nodes = static_cast<int>(v);
    } else if (k == "bayes_window") {
      real(bayes_window);
    } else if (k == "workers") {
      std::size_t v = 0;
      count(v);
      workers = static_cast<unsigned>(v);
    } else if (k == "fine_steps_factor") {
      real(fine_steps_factor);
    } else if (k == "coeff_bn") {
      real(coeff_bn);
    } else if (k == "coeff_reps") {
      count(coeff_reps);
    } else if (k == "coeff_P") {
      std::size_t v = 0;
      count(v);
      coeff_order = static_cast<int>(v);
    } else if (k == "drift") {
      Eigen::VectorXd d;
      vector(d);
      if (d.size() != 2) {
        throw bad("two numbers");
      }
      drift = d;
    } else if (k == "csv") {
      csv = std::string(value);
    } else if (k == "summary") {
      summary = std::string(value);
    } else if (k == "report") {
      report = std::string(value);
    } else if (k == "coefficients") {
      coefficients = std::string(value);
    } else if (k == "dataset") {
      dataset = std::string(value);
    } else if (k == "path_dump") {
      path_dump = std::string(value);
    } else {
      throw Error("unknown configuration key '" + k + "'");
    }
  }

  /// Applies a `key=value` override.
  void apply_override(std::string_view assignment)
  {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
      throw Error("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    set(assignment.substr(0, eq), assignment.substr(eq + 1));
  }

  /// Checks the cross-field invariants.
  void validate() const
  {
    const auto fail = [](const std::string& what) { throw Error("invalid configuration: " + what); };
    if (sigma_star.size() != 3 || box_lower.size() != 3 || box_upper.size() != 3) {
      fail("sigma_star, box_lower and box_upper need three entries");
    }
    if (!(box_lower.array() < box_upper.array()).all()) {
      fail("box_lower must be below box_upper");
    }
    if (!(box_lower[0] > 0.0) || !(box_lower[1] > 0.0)) {
      fail("box_lower for sigma_1 and sigma_2 must be positive");
    }
    if (!((sigma_star.array() > box_lower.array()).all() && (sigma_star.array() < box_upper.array()).all())) {
      fail("sigma_star must lie inside the parameter box");
    }
    if (sigma_start.size() != 0 &&
        (sigma_start.size() != 3 || !((sigma_start.array() > box_lower.array()).all() &&
                                      (sigma_start.array() < box_upper.array()).all()))) {
      fail("sigma_start must lie inside the parameter box");
    }
    if (!(horizon > 0.0)) {
      fail("T must be positive");
    }
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) {
      fail("lambda1 and lambda2 must be positive");
    }
    if (n_values.empty()) {
      fail("n_values must not be empty");
    }
    for (double n : n_values) {
      if (!(n >= 1.0)) {
        fail("n_values must be >= 1");
      }
    }
    if (std::set<double>(n_values.begin(), n_values.end()).size() != n_values.size()) {
      fail("n_values must be distinct");
    }
    if (replications < 1) {
      fail("replications must be >= 1");
    }
    if (bayes_nodes < 1) {
      fail("bayes_nodes must be >= 1");
    }
    if (!(fine_steps_factor >= 4.0)) {
      fail("fine_steps_factor must be >= 4");
    }
    if (!(coeff_bn >= 1.0) || coeff_order < 1) {
      fail("coeff_bn must be >= 1 and coeff_P >= 1");
    }
  }
};

inline ExperimentConfig read_config(std::istream& is, const std::string& source = "<config>")
{
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) {
      body = body.substr(0, hash);
    }
    body = text::trim(body);
    if (body.empty()) {
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(source, lineno, "expected 'key = value'");
    }
    try {
      cfg.set(body.substr(0, eq), body.substr(eq + 1));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return cfg;
}

inline void write_config(std::ostream& os, const ExperimentConfig& c)
{
  const auto vec = [](const Eigen::VectorXd& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      s += (i ? ", " : "") + text::format_double(v[i]);
    }
    return s;
  };
  std::string ns;
  for (std::size_t i = 0; i < c.n_values.size(); ++i) {
    ns += (i ? ", " : "") + text::format_double(c.n_values[i]);
  }
  os << "sigma_star = " << vec(c.sigma_star) << '\n'
     << "box_lower = " << vec(c.box_lower) << '\n'
     << "box_upper = " << vec(c.box_upper) << '\n'
     << "T = " << text::format_double(c.horizon) << '\n'
     << "scheme = " << c.scheme << '\n'
     << "lambda1 = " << text::format_double(c.lambda1) << '\n'
     << "lambda2 = " << text::format_double(c.lambda2) << '\n'
     << "n_values = " << ns << '\n'
     << "replications = " << c.replications << '\n'
     << "seed = " << c.seed << '\n'
     << "qmle = " << (c.qmle ? "true" : "false") << '\n'
     << "bayes = " << (c.bayes ? "true" : "false") << '\n'
     << "hy = " << (c.hy ? "true" : "false") << '\n'
     << "bayes_nodes = " << c.bayes_nodes << '\n'
     << "fine_steps_factor = " << text::format_double(c.fine_steps_factor) << '\n'
     << "coeff_bn = " << text::format_double(c.coeff_bn) << '\n'
     << "coeff_reps = " << c.coeff_reps << '\n'
     << "coeff_P = " << c.coeff_order << '\n'
     << "drift = " << vec(c.drift) << '\n';
  if (c.sigma_start.size() != 0) {
    os << "sigma_start = " << vec(c.sigma_start) << '\n';
  }
}

}  // namespace nsqla
