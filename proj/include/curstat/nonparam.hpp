#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "curstat/tree.hpp"

namespace curstat {

// One subject inspected once: the pair {C_i, S_i(C_i)} plus optional covariates.
struct CurrentStatusRecord {
  std::string id;
  double inspection_time = 0.0;
  State observed_state = 0;
  std::vector<double> covariates;
};

// Throws ArgumentError / StructureError on the first invalid record.
void validate_records(std::span<const CurrentStatusRecord> records, const MultistateTree& tree);
std::vector<double> inspection_times(std::span<const CurrentStatusRecord> records);

// Right-continuous step function on strictly increasing knots.
struct StepFunction {
  std::vector<double> knots;
  std::vector<double> values;
  double left_value = 0.0;

  double operator()(double t) const;
};

// Isotonic least-squares fit. Observations sharing a time are pooled into one
// weighted point before the pooled-adjacent-violators sweep. Optional weights
// must be positive.
StepFunction pav_fit(std::span<const double> times, std::span<const double> responses,
                     std::span<const double> weights = {});
StepFunction pav_fit(std::span<const std::pair<double, double>> pairs);

// Normal kernel with bandwidth h, in time units.
struct KernelSpec {
  double bandwidth = 1.0;

  // K_h(u) = h^-1 phi(u / h)
  double operator()(double u) const;
  void validate() const;
};

// Two-stage direct plug-in bandwidth for a normal-kernel density estimate of
// the inspection times (scale estimate: min of SD and IQR/1.349). Needs at
// least five distinct times.
double select_bandwidth(std::span<const double> times);

// A process tabulated on a time grid.
struct SmoothedProcess {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<std::size_t> flagged;  // grid indices where the kernel mass vanished

  double at(double t) const;  // linear interpolation, clamped at the ends
};

// Equispaced grid of `points` values over [min, max] of the times, or the sorted
// unique times when points <= 0.
std::vector<double> make_grid(std::span<const double> times, int points);

// Nadaraya-Watson smoothing of step(C_i) against the inspection times.
SmoothedProcess nw_smooth(const StepFunction& step, std::span<const double> times,
                          const KernelSpec& kernel, std::span<const double> grid);

// Kernel weights K_h(C_i - t_g) for every grid time g (rows) and subject i
// (columns). Built once per dataset and shared by every smoothed process.
class KernelMatrix {
 public:
  KernelMatrix(std::span<const double> times, const KernelSpec& kernel, std::vector<double> grid);

  // Columns re-indexed, used for bootstrap resamples drawn from the same times.
  KernelMatrix gather(std::span<const std::size_t> columns) const;

  const Eigen::MatrixXd& weights() const { return weights_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& times() const { return times_; }
  const KernelSpec& kernel() const { return kernel_; }
  std::size_t subjects() const { return times_.size(); }

 private:
  KernelMatrix() = default;

  KernelSpec kernel_;
  std::vector<double> grid_;
  std::vector<double> times_;
  Eigen::MatrixXd weights_;
};

// Counting-process and at-risk estimators over one dataset, optionally
// restricted to an active subset of subjects (used by the jackknife).
class Smoother {
 public:
  Smoother(std::span<const CurrentStatusRecord> records, std::shared_ptr<const KernelMatrix> kernel,
           std::vector<char> active = {});

  std::size_t active_count() const { return active_count_; }
  const std::vector<double>& grid() const { return kernel_->grid(); }
  const KernelMatrix& kernel_matrix() const { return *kernel_; }
  std::span<const CurrentStatusRecord> records() const { return records_; }
  bool active(std::size_t i) const { return active_[i] != 0; }

  // Nadaraya-Watson average of per-subject values (inactive subjects ignored).
  SmoothedProcess average(std::span<const double> per_subject) const;

  // n * NW(PAV fit of I(S_i in subtree(to)) against C_i); (from, to) must be an edge.
  SmoothedProcess counting(const MultistateTree& tree, State from, State to) const;
  // Same smoother for an arbitrary 0/1 indicator, e.g. "entered subtree(k)".
  SmoothedProcess counting_indicator(std::span<const double> indicator) const;

  // n * NW(w_i * I(S_i in members)). Weights default to 1 and must lie in [0,1].
  SmoothedProcess at_risk(std::span<const State> members, std::span<const double> weights = {}) const;

 private:
  std::span<const CurrentStatusRecord> records_;
  std::shared_ptr<const KernelMatrix> kernel_;
  std::vector<char> active_;
  std::size_t active_count_ = 0;
  std::vector<std::size_t> order_;  // active subjects sorted by inspection time
  Eigen::VectorXd mass_;
  std::vector<std::size_t> flagged_;
};

// Free-function forms; each builds its own kernel matrix.
SmoothedProcess estimate_counting(std::span<const CurrentStatusRecord> records, const MultistateTree& tree,
                                  State from, State to, const KernelSpec& kernel,
                                  std::span<const double> grid);
SmoothedProcess estimate_at_risk(std::span<const CurrentStatusRecord> records, const MultistateTree& tree,
                                 State state, const KernelSpec& kernel, std::span<const double> grid,
                                 std::span<const double> weights = {});
SmoothedProcess estimate_at_risk(std::span<const CurrentStatusRecord> records, const MultistateTree& tree,
                                 const PooledState& pooled, const KernelSpec& kernel,
                                 std::span<const double> grid, std::span<const double> weights = {});

}  // namespace curstat
