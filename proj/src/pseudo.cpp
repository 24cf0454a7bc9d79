#include "curstat/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "curstat/parallel.hpp"

namespace curstat {

std::vector<double> PseudoValueMatrix::column_means() const {
  std::vector<double> out(time_points.size(), 0.0);
  std::size_t used = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (!excluded.empty() && excluded[static_cast<std::size_t>(i)]) continue;
    ++used;
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += values(i, static_cast<Eigen::Index>(t));
  }
  for (double& v : out) v /= static_cast<double>(std::max<std::size_t>(used, 1));
  return out;
}

std::vector<double> pseudo_time_points(std::span<const double> times, int r) {
  if (times.empty()) throw ArgumentError("no inspection times");
  if (r < 1) throw ArgumentError("need at least one pseudo-value time point");
  const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
  std::vector<double> out(static_cast<std::size_t>(r));
  for (int k = 1; k <= r; ++k) out[static_cast<std::size_t>(k - 1)] = *lo + (*hi - *lo) * k / (r + 1.0);
  return out;
}

PseudoValueMatrix jackknife(std::size_t n, std::vector<double> time_points, const JackknifeFunctional& theta,
                            int threads) {
  if (n < 2) throw ArgumentError("the jackknife needs at least two subjects");
  PseudoValueMatrix out;
  out.time_points = std::move(time_points);
  const auto r = static_cast<Eigen::Index>(out.time_points.size());
  out.full = theta(std::vector<char>(n, 1));
  if (static_cast<Eigen::Index>(out.full.size()) != r)
    throw ArgumentError("functional returned the wrong number of time points");
  out.values.resize(static_cast<Eigen::Index>(n), r);
  out.excluded.assign(n, 0);
  std::vector<std::string> messages(n);

  const double nn = static_cast<double>(n);
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<char> active(n, 1);
    active[i] = 0;
    std::vector<double> loo;
    try {
      loo = theta(active);
    } catch (const EstimationError& e) {
      out.excluded[i] = 1;
      messages[i] = "subject " + std::to_string(i + 1) + " excluded: " + e.what();
      out.values.row(static_cast<Eigen::Index>(i)).setConstant(std::nan(""));
      return;
    }
    for (Eigen::Index t = 0; t < r; ++t)
      out.values(static_cast<Eigen::Index>(i), t) =
          nn * out.full[static_cast<std::size_t>(t)] - (nn - 1.0) * loo[static_cast<std::size_t>(t)];
  });
  for (auto& m : messages)
    if (!m.empty()) out.warnings.push_back(std::move(m));
  return out;
}

PseudoValueMatrix jackknife_pseudovalues(const MultistateTree& tree, std::span<const CurrentStatusRecord> records,
                                         State j, State k, Method method, Target target,
                                         std::vector<double> time_points, const EstimationOptions& options,
                                         int threads) {
  // Fix bandwidth and grid from the full data.
  std::shared_ptr<const KernelMatrix> kernel = ConditionalEstimator(tree, records, options).kernel_matrix();
  const std::vector<double> points = time_points;
  auto theta = [&](const std::vector<char>& active) {
    ConditionalEstimator est(tree, records, kernel, active, options.initial);
    const CurveEstimate curve = est.target(j, k, method, target);
    std::vector<double> out(points.size());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = curve.at(points[t]);
    return out;
  };
  return jackknife(records.size(), std::move(time_points), theta, threads);
}

std::string to_string(Link link) {
  switch (link) {
    case Link::identity: return "identity";
    case Link::cloglog: return "cloglog";
    case Link::logit: return "logit";
  }
  return "identity";
}

Link parse_link(const std::string& text) {
  if (text == "identity") return Link::identity;
  if (text == "cloglog") return Link::cloglog;
  if (text == "logit") return Link::logit;
  throw ArgumentError("unknown link '" + text + "' (expected identity, cloglog or logit)");
}

namespace {

double link_fn(Link link, double mu) {
  switch (link) {
    case Link::identity: return mu;
    case Link::logit: return std::log(mu / (1.0 - mu));
    case Link::cloglog: return std::log(-std::log1p(-mu));
  }
  return mu;
}

// Mean and d mu / d eta.
std::pair<double, double> inverse_link(Link link, double eta) {
  switch (link) {
    case Link::identity: return {eta, 1.0};
    case Link::logit: {
      const double mu = 1.0 / (1.0 + std::exp(-eta));
      return {mu, mu * (1.0 - mu)};
    }
    case Link::cloglog: {
      const double e = std::exp(eta);
      return {-std::expm1(-e), e * std::exp(-e)};
    }
  }
  return {eta, 1.0};
}

void check_rank(const Eigen::MatrixXd& z, const std::vector<std::string>& names) {
  const Eigen::Index n = z.rows();
  Eigen::MatrixXd design(n, z.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(z.cols()) = z;
  std::vector<std::string> labels{"(intercept)"};
  labels.insert(labels.end(), names.begin(), names.end());

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> full(design);
  full.setThreshold(1e-10);
  if (full.rank() == design.cols()) return;

  std::vector<Eigen::Index> kept;
  std::vector<std::string> collinear;
  for (Eigen::Index c = 0; c < design.cols(); ++c) {
    Eigen::MatrixXd trial(n, static_cast<Eigen::Index>(kept.size()) + 1);
    for (std::size_t a = 0; a < kept.size(); ++a) trial.col(static_cast<Eigen::Index>(a)) = design.col(kept[a]);
    trial.rightCols(1) = design.col(c);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(1e-10);
    if (qr.rank() == trial.cols()) {
      kept.push_back(c);
    } else {
      collinear.push_back(labels[static_cast<std::size_t>(c)]);
    }
  }
  std::string msg = "covariate matrix is rank deficient; collinear column(s):";
  for (const auto& c : collinear) msg += " " + c;
  throw ArgumentError(msg);
}

}  // namespace

GeeFit gee_fit(const PseudoValueMatrix& pseudo, const Eigen::MatrixXd& covariates,
               const std::vector<std::string>& covariate_names, const GeeOptions& options) {
  const auto r = static_cast<Eigen::Index>(pseudo.time_points.size());
  const Eigen::Index p = covariates.cols();
  if (covariates.rows() != pseudo.values.rows()) throw ArgumentError("one covariate row per subject is required");
  if (static_cast<Eigen::Index>(covariate_names.size()) != p)
    throw ArgumentError("one name per covariate column is required");
  if (r < 1) throw ArgumentError("no pseudo-value time points");

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < pseudo.values.rows(); ++i)
    if (pseudo.excluded.empty() || !pseudo.excluded[static_cast<std::size_t>(i)]) rows.push_back(i);
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m < 2) throw ArgumentError("fewer than two usable subjects");

  Eigen::MatrixXd z(m, p);
  Eigen::MatrixXd y(m, r);
  for (Eigen::Index a = 0; a < m; ++a) {
    z.row(a) = covariates.row(rows[static_cast<std::size_t>(a)]);
    y.row(a) = pseudo.values.row(rows[static_cast<std::size_t>(a)]);
  }
  if (!z.allFinite() || !y.allFinite()) throw ArgumentError("non-finite pseudo-values or covariates");
  if (p > 0) check_rank(z, covariate_names);

  const Eigen::Index dim = r + p;
  GeeFit fit;
  fit.link = options.link;
  for (Eigen::Index t = 0; t < r; ++t) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "alpha(t=%.4g)", pseudo.time_points[static_cast<std::size_t>(t)]);
    fit.names.emplace_back(buf);
  }
  fit.names.insert(fit.names.end(), covariate_names.begin(), covariate_names.end());

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim);
  if (options.link != Link::identity) {
    for (Eigen::Index t = 0; t < r; ++t) beta(t) = link_fn(options.link, std::clamp(y.col(t).mean(), 0.01, 0.99));
  }

  // Scores, information and residual sum of squares at beta.
  auto evaluate = [&](const Eigen::VectorXd& b, Eigen::MatrixXd* info, Eigen::VectorXd* score,
                      Eigen::MatrixXd* meat) {
    double sse = 0.0;
    if (info) info->setZero(dim, dim);
    if (score) score->setZero(dim);
    if (meat) meat->setZero(dim, dim);
    Eigen::VectorXd x(dim), ui(dim);
    for (Eigen::Index a = 0; a < m; ++a) {
      ui.setZero();
      for (Eigen::Index t = 0; t < r; ++t) {
        x.setZero();
        x(t) = 1.0;
        if (p > 0) x.tail(p) = z.row(a).transpose();
        const auto [mu, d] = inverse_link(options.link, x.dot(b));
        const double e = y(a, t) - mu;
        sse += e * e;
        if (info) info->noalias() += (d * d) * x * x.transpose();
        ui.noalias() += (d * e) * x;
      }
      if (score) *score += ui;
      if (meat) meat->noalias() += ui * ui.transpose();
    }
    return sse;
  };

  Eigen::MatrixXd info;
  Eigen::VectorXd score;
  double sse = evaluate(beta, nullptr, nullptr, nullptr);
  for (fit.iterations = 1; fit.iterations <= options.max_iterations; ++fit.iterations) {
    evaluate(beta, &info, &score, nullptr);
    Eigen::LDLT<Eigen::MatrixXd> solver(info);
    if (solver.info() != Eigen::Success || solver.rcond() < 1e-14)
      throw EstimationError("GEE information matrix is singular");
    Eigen::VectorXd step = solver.solve(score);
    double scale = 1.0;
    Eigen::VectorXd next = beta + step;
    double next_sse = evaluate(next, nullptr, nullptr, nullptr);
    for (int halve = 0; halve < 20 && !(next_sse <= sse * (1.0 + 1e-12)); ++halve) {
      scale /= 2.0;
      next = beta + scale * step;
      next_sse = evaluate(next, nullptr, nullptr, nullptr);
    }
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    sse = next_sse;
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    fit.iterations = options.max_iterations;
    fit.warnings.push_back("GEE did not converge in " + std::to_string(options.max_iterations) +
                           " iterations; reporting the last iterate");
  }

  Eigen::MatrixXd meat;
  evaluate(beta, &info, nullptr, &meat);
  Eigen::LDLT<Eigen::MatrixXd> solver(info);
  const Eigen::MatrixXd bread = solver.solve(Eigen::MatrixXd::Identity(dim, dim));
  Eigen::MatrixXd cov = bread * meat * bread;
  cov = (0.5 * (cov + cov.transpose())).eval();

  fit.coefficients = beta;
  fit.covariance = cov;
  fit.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.z.resize(dim);
  fit.p_values.resize(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const double se = fit.std_errors(c);
    fit.z(c) = se > 0.0 ? beta(c) / se : 0.0;
    fit.p_values(c) = se > 0.0 ? std::clamp(std::erfc(std::abs(fit.z(c)) / std::sqrt(2.0)), 0.0, 1.0) : 1.0;
  }
  const double dof = static_cast<double>(m * r - dim);
  fit.dispersion = dof > 0.0 ? sse / dof : 0.0;

  if (p > 0) {
    const Eigen::VectorXd zeta = beta.tail(p);
    const Eigen::MatrixXd czz = cov.bottomRightCorner(p, p);
    Eigen::LDLT<Eigen::MatrixXd> wald(czz);
    if (wald.info() == Eigen::Success && wald.rcond() > 1e-14) {
      fit.wald_chi2 = zeta.dot(wald.solve(zeta));
      fit.wald_df = static_cast<int>(p);
      fit.wald_p = boost::math::gamma_q(0.5 * static_cast<double>(p), 0.5 * std::max(0.0, fit.wald_chi2));
    } else {
      fit.warnings.push_back("covariate block of the sandwich covariance is singular; joint Wald test skipped");
    }
  }
  for (const auto& w : pseudo.warnings) fit.warnings.push_back(w);
  return fit;
}

}  // namespace curstat
