#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "curstat/conditional.hpp"
#include "curstat/curve.hpp"
#include "curstat/errors.hpp"
#include "curstat/nonparam.hpp"
#include "curstat/tree.hpp"

namespace curstat {

// Which quantile of the absolute deviations sets the half-width.
// one_minus_half_alpha: (1 - alpha/2) quantile (default). The deviations are
// already absolute, so this is a nominal 1 - alpha/2 two-sided interval.
// one_minus_alpha: (1 - alpha) quantile, nominal 1 - alpha.
enum class DeviationQuantile { one_minus_alpha, one_minus_half_alpha };

std::string to_string(DeviationQuantile q);
DeviationQuantile parse_deviation_quantile(const std::string& text);

struct BootstrapConfig {
  int replicates = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 20240601;
  int threads = 0;  // 0: CURSTAT_THREADS or hardware concurrency
  DeviationQuantile quantile = DeviationQuantile::one_minus_half_alpha;

  // 0.8 when h <= 1, 1.2 when h > 1.
  static double omega(double h);
  // h~ = h^omega
  static double inflated_bandwidth(double h);
  void validate() const;
};

// Kernel-weighted categorical distribution of the state at each original
// inspection time: P(S* = s | C* = C_i) proportional to
// sum_l I(S_l = s) K(C_l - C_i). Precomputed once per dataset.
class StateSampler {
 public:
  StateSampler(std::span<const CurrentStatusRecord> records, int num_states, const KernelSpec& kernel);

  State draw(std::size_t source, std::mt19937_64& rng) const;
  std::span<const double> probabilities(std::size_t source) const;
  // Subjects whose kernel mass degenerated; their draw is the state of the
  // nearest inspection time (lowest label on ties).
  int fallbacks() const { return fallbacks_; }

 private:
  int num_states_;
  std::vector<double> probs_;  // subjects x states
  std::vector<State> nearest_;
  std::vector<char> degenerate_;
  int fallbacks_ = 0;
};

struct Resample {
  std::vector<std::size_t> source;  // C*_i = C_{source[i]}
  std::vector<CurrentStatusRecord> records;
};

Resample smoothed_resample(std::span<const CurrentStatusRecord> records, const StateSampler& sampler,
                           std::mt19937_64& rng);
std::vector<CurrentStatusRecord> smoothed_resample(std::span<const CurrentStatusRecord> records, int num_states,
                                                   const KernelSpec& kernel, std::mt19937_64& rng,
                                                   Diagnostics* diag = nullptr);

// g(x) = asin(sqrt(x))
double arcsine(double x);
// Empirical quantile, "higher" rule: sorted[ceil(p (B - 1))].
double upper_quantile(std::vector<double> values, double p);

// Interval around point.values from per-time deviation samples
// (deviations[g] holds the B deviations at point.grid[g]). No minimum B.
CurveEstimate ci_from_deviations(const CurveEstimate& point, const std::vector<std::vector<double>>& deviations,
                                 double alpha,
                                 DeviationQuantile rule = DeviationQuantile::one_minus_half_alpha);

// Smoothed-bootstrap pointwise intervals. Each replicate reruns the whole
// estimator with the original bandwidth h on a resample drawn with h~; the
// deviations are centred on the original-data estimate at h~. When
// eval_times is non-empty the result is reported at those times instead of
// the grid. Requires B * alpha / 2 >= 1.
CurveEstimate pointwise_ci(const MultistateTree& tree, std::span<const CurrentStatusRecord> records, State j,
                           State k, Method method, Target target, const BootstrapConfig& config,
                           const EstimationOptions& options = {}, Diagnostics* diag = nullptr,
                           std::span<const double> eval_times = {});

}  // namespace curstat
