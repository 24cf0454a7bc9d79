#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "curstat/errors.hpp"
#include "curstat/nonparam.hpp"

namespace curstat {

namespace {

// Sample quantile, R type 7.
double quantile7(std::vector<double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Kernel estimate of psi_r = E f^(r)(X) with a normal kernel of bandwidth g:
// n^-2 sum_i sum_j g^-(r+1) phi^(r)((x_i - x_j) / g), r in {4, 6}.
double psi_functional(const std::vector<double>& x, int r, double g) {
  const std::size_t n = x.size();
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto hermite = [r](double z) {
    const double z2 = z * z;
    if (r == 4) return (z2 - 6.0) * z2 + 3.0;
    return ((z2 - 15.0) * z2 + 45.0) * z2 - 15.0;
  };
  // Diagonal terms all equal phi^(r)(0).
  double total = static_cast<double>(n) * hermite(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double z = (x[i] - x[j]) / g;
      row += hermite(z) * std::exp(-0.5 * z * z);
    }
    total += 2.0 * row;
  }
  const double nn = static_cast<double>(n);
  return total * inv_sqrt_2pi / (nn * nn * std::pow(g, r + 1));
}

}  // namespace

double select_bandwidth(std::span<const double> times) {
  std::vector<double> x(times.begin(), times.end());
  for (double v : x)
    if (!std::isfinite(v)) throw ArgumentError("select_bandwidth: non-finite inspection time");
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 5)
    throw EstimationError("bandwidth selection needs at least 5 distinct inspection times; "
                          "supply a bandwidth manually");

  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = (quantile7(sorted, 0.75) - quantile7(sorted, 0.25)) / 1.349;
  double scale = std::min(sd, iqr);
  if (!(scale > 0.0)) scale = sd;
  if (!(scale > 0.0)) throw EstimationError("bandwidth selection: zero scale estimate");

  for (double& v : x) v = (v - mean) / scale;

  const double pi = std::numbers::pi;
  // Stage 0: normal-scale value for psi_8.
  const double psi8 = 105.0 / (32.0 * std::sqrt(pi));
  // Stage 1: pilot for psi_6, g = [-2 K^(6)(0) / (mu_2 psi_8 n)]^(1/9), K^(6)(0) = -15/sqrt(2 pi).
  const double g6 = std::pow(30.0 / (std::sqrt(2.0 * pi) * psi8 * n), 1.0 / 9.0);
  const double psi6 = psi_functional(x, 6, g6);
  if (!(psi6 < 0.0)) throw EstimationError("bandwidth selection: degenerate psi_6 estimate");
  // Stage 2: pilot for psi_4, K^(4)(0) = 3/sqrt(2 pi).
  const double g4 = std::pow(-6.0 / (std::sqrt(2.0 * pi) * psi6 * n), 1.0 / 7.0);
  const double psi4 = psi_functional(x, 4, g4);
  if (!(psi4 > 0.0)) throw EstimationError("bandwidth selection: degenerate psi_4 estimate");
  // AMISE-optimal normal-kernel bandwidth: [R(K) / (mu_2^2 psi_4 n)]^(1/5), R(K) = 1/(2 sqrt(pi)).
  return scale * std::pow(1.0 / (2.0 * std::sqrt(pi) * psi4 * n), 0.2);
}

}  // namespace curstat
