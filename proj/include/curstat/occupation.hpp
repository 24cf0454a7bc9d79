#pragma once

#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "curstat/curve.hpp"
#include "curstat/errors.hpp"
#include "curstat/nonparam.hpp"
#include "curstat/tree.hpp"

namespace curstat {

// Cumulative transition intensities A(t) on a grid. increments[g] holds dA at
// grid[g]; cumulative[g] the running sum. Diagonals are minus the row sums.
struct IntensityMatrixPath {
  std::vector<double> grid;
  std::vector<Eigen::MatrixXd> increments;
  std::vector<Eigen::MatrixXd> cumulative;
};

// P(0, t) at every grid time.
struct TransitionMatrixPath {
  std::vector<double> grid;
  std::vector<Eigen::MatrixXd> matrices;
};

struct OccupationCurves {
  std::vector<double> grid;
  std::vector<Eigen::VectorXd> probs;  // one vector (pi_0..pi_Q) per grid time
  Eigen::VectorXd initial;

  double prob(State s, std::size_t g) const { return probs[g][s]; }
};

struct NelsonAalenOptions {
  // Subject count n; increments where the at-risk estimate is below 1e-10 n are zeroed.
  double subjects = 1.0;
  // Counting processes start from 0 at the time origin, so the first grid point
  // carries the increment N(t_1) - 0. When false the first increment is zero,
  // which pairs with an initial distribution estimated at t_1.
  bool from_origin = true;
};

IntensityMatrixPath nelson_aalen(const std::map<Edge, SmoothedProcess>& counting,
                                 const std::map<State, SmoothedProcess>& at_risk,
                                 std::span<const double> grid, int num_states,
                                 const NelsonAalenOptions& options = {}, Diagnostics* diag = nullptr);

// Product integral prod (I + dA). Increments that would push a diagonal entry
// below zero are scaled back so the row stays stochastic.
TransitionMatrixPath aalen_johansen(const IntensityMatrixPath& intensities, Diagnostics* diag = nullptr);

OccupationCurves occupation_probs(const TransitionMatrixPath& trans, std::span<const double> initial);

// Sum of pi_l(t) over the given states.
CurveEstimate pooled_occupation(const OccupationCurves& curves, std::span<const State> states);

enum class InitialDistribution { root, estimated };

// Initial distribution from the at-risk estimates at the first grid point.
std::vector<double> initial_from_at_risk(const std::map<State, SmoothedProcess>& at_risk, int num_states);

// Full marginal pipeline: counting and at-risk processes for every edge and
// state, Nelson-Aalen, Aalen-Johansen and occupation probabilities.
OccupationCurves estimate_occupation(const Smoother& smoother, const MultistateTree& tree,
                                     InitialDistribution initial = InitialDistribution::root,
                                     Diagnostics* diag = nullptr);

}  // namespace curstat
