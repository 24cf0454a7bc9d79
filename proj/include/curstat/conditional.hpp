#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curstat/curve.hpp"
#include "curstat/errors.hpp"
#include "curstat/nonparam.hpp"
#include "curstat/occupation.hpp"
#include "curstat/tree.hpp"

namespace curstat {

// fre: fractional at-risk sets, chained along the path.
// ple: ratio of marginal occupation probabilities from the product-limit fit.
enum class Method { fre, ple };
// psi: Psi_{k|j}(t); entry: F_{k|j}(t) = Psi_{k|j}(t) / Psi_{k|j}.
enum class Target { psi, entry };

std::string to_string(Method m);
std::string to_string(Target t);
Method parse_method(const std::string& text);
Target parse_target(const std::string& text);

struct EstimationOptions {
  std::optional<double> bandwidth;  // plug-in selection when unset
  int grid_points = 200;            // <= 0 uses the sorted unique inspection times
  std::vector<double> grid;         // explicit grid, overrides grid_points
  InitialDistribution initial = InitialDistribution::root;
};

// Estimation context for one dataset. Kernel weights, smoothed processes and
// the per-stage competing-risk quantities are computed lazily and cached, so
// several estimands on the same data share the work. Not thread-safe; build
// one per thread.
class ConditionalEstimator {
 public:
  ConditionalEstimator(const MultistateTree& tree, std::span<const CurrentStatusRecord> records,
                       const EstimationOptions& options = {});
  // Reuses an existing kernel matrix (bootstrap and jackknife); `active`
  // restricts estimation to a subset of subjects.
  ConditionalEstimator(const MultistateTree& tree, std::span<const CurrentStatusRecord> records,
                       std::shared_ptr<const KernelMatrix> kernel, std::vector<char> active = {},
                       InitialDistribution initial = InitialDistribution::root);

  double bandwidth() const { return kernel_->kernel().bandwidth; }
  const std::vector<double>& grid() const { return kernel_->grid(); }
  double horizon() const { return kernel_->grid().back(); }
  std::shared_ptr<const KernelMatrix> kernel_matrix() const { return kernel_; }
  const MultistateTree& tree() const { return tree_; }
  const Diagnostics& diagnostics() const { return diag_; }

  // Psi_{k|j}(t) with the limiting value at the horizon in `scalar`.
  // j == k is rejected; j off the path to k yields the zero curve.
  CurveEstimate psi(State j, State k, Method method);
  CurveEstimate entry(State j, State k, Method method);
  CurveEstimate target(State j, State k, Method method, Target target);

  // phi_{i k~}: each subject's estimated probability of ever reaching k~.
  const std::vector<double>& fractional_weights(State k_tilde);
  // One-step factor Psi^[1]_{child|parent}(t) from the pooled competing-risk fit.
  CurveEstimate fre_factor(State parent, State child);
  const OccupationCurves& occupation();

 private:
  // Competing-risk quantities for exits out of the pooled state 0*|parent.
  struct Stage {
    std::vector<State> children;
    std::vector<double> at_risk;
    std::vector<std::vector<double>> hazard;     // per child, per grid point
    std::vector<std::vector<double>> incidence;  // cumulative incidence from time 0
    std::vector<std::vector<double>> from_here;  // probability of exiting to child after grid[g-1]
  };

  const Stage& stage(State parent);
  // Probability of exiting 0*|parent to `child` strictly after time s.
  double exit_after(const Stage& st, std::size_t child_index, double s) const;
  void validate_pair(State j, State k) const;

  const MultistateTree& tree_;
  std::span<const CurrentStatusRecord> records_;
  std::shared_ptr<const KernelMatrix> kernel_;
  Smoother smoother_;
  InitialDistribution initial_;
  Diagnostics diag_;
  std::map<State, Stage> stages_;
  std::map<State, std::vector<double>> weights_;
  std::optional<OccupationCurves> occupation_;
};

// Free-function forms for a single estimand.
double fractional_weight(std::span<const CurrentStatusRecord> records, const MultistateTree& tree,
                         State k_tilde, const KernelSpec& kernel, std::size_t subject,
                         const EstimationOptions& options = {});
CurveEstimate fre_conditional(std::span<const CurrentStatusRecord> records, const MultistateTree& tree,
                              State j, State k, const KernelSpec& kernel,
                              const EstimationOptions& options = {}, Diagnostics* diag = nullptr);
CurveEstimate ple_conditional(std::span<const CurrentStatusRecord> records, const MultistateTree& tree,
                              State j, State k, const KernelSpec& kernel,
                              const EstimationOptions& options = {}, Diagnostics* diag = nullptr);

// F(t) = Psi(t) / scalar. Throws EstimationError when the scalar is not positive.
CurveEstimate entry_distribution(const CurveEstimate& psi, double scalar);

}  // namespace curstat
