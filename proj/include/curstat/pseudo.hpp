#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "curstat/conditional.hpp"
#include "curstat/nonparam.hpp"
#include "curstat/tree.hpp"

namespace curstat {

// Y_i(t) = n theta(t) - (n - 1) theta_{-i}(t), one row per subject.
struct PseudoValueMatrix {
  std::vector<double> time_points;
  Eigen::MatrixXd values;          // n x r
  std::vector<double> full;        // theta(t) on all subjects
  std::vector<char> excluded;      // rows whose leave-one-out fit failed
  std::vector<std::string> warnings;

  std::size_t subjects() const { return static_cast<std::size_t>(values.rows()); }
  // Mean over included rows at each time point.
  std::vector<double> column_means() const;
};

// r interior points min + (max - min) k / (r + 1), k = 1..r.
std::vector<double> pseudo_time_points(std::span<const double> times, int r = 10);

// theta evaluated at the time points using the active subjects only.
using JackknifeFunctional = std::function<std::vector<double>(const std::vector<char>& active)>;

// Generic jackknife over n subjects. An EstimationError on a leave-one-out
// subset excludes that row and records a warning.
PseudoValueMatrix jackknife(std::size_t n, std::vector<double> time_points, const JackknifeFunctional& theta,
                            int threads = 0);

// Pseudo-values of Psi_{k|j}(t) or F_{k|j}(t). The bandwidth and grid are
// fixed at the full-data values for every leave-one-out fit.
PseudoValueMatrix jackknife_pseudovalues(const MultistateTree& tree, std::span<const CurrentStatusRecord> records,
                                         State j, State k, Method method, Target target,
                                         std::vector<double> time_points, const EstimationOptions& options = {},
                                         int threads = 0);

enum class Link { identity, cloglog, logit };
std::string to_string(Link link);
Link parse_link(const std::string& text);

struct GeeOptions {
  Link link = Link::identity;
  int max_iterations = 100;
  double tolerance = 1e-8;  // on max |delta beta|
};

// Coefficients are alpha_1..alpha_r (one intercept per time point) followed by
// zeta (one per covariate column).
struct GeeFit {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // robust sandwich B^-1 M B^-1
  Eigen::VectorXd std_errors;
  Eigen::VectorXd z;
  Eigen::VectorXd p_values;
  Link link = Link::identity;
  int iterations = 0;
  bool converged = false;
  double dispersion = 0.0;  // Pearson moment estimate of sigma^2
  // Joint Wald test of zeta = 0 (absent when there are no covariates).
  double wald_chi2 = 0.0;
  int wald_df = 0;
  double wald_p = 1.0;
  std::vector<std::string> warnings;
};

// Independence working correlation, gaussian variance. Rows flagged in
// pseudo.excluded are dropped. covariates is n x p (p may be 0).
GeeFit gee_fit(const PseudoValueMatrix& pseudo, const Eigen::MatrixXd& covariates,
               const std::vector<std::string>& covariate_names, const GeeOptions& options = {});

}  // namespace curstat
