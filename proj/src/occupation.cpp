#include "curstat/occupation.hpp"

#include <algorithm>
#include <cmath>

namespace curstat {

double interpolate(const std::vector<double>& grid, const std::vector<double>& values, double t) {
  if (grid.empty() || grid.size() != values.size()) throw ArgumentError("interpolate: malformed curve");
  if (t <= grid.front()) return values.front();
  if (t >= grid.back()) return values.back();
  auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const auto hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  const double frac = (t - grid[lo]) / (grid[hi] - grid[lo]);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double CurveEstimate::at(double t) const { return interpolate(grid, values, t); }

namespace {

void require_grid(const SmoothedProcess& p, std::span<const double> grid, const char* what) {
  if (p.grid.size() != grid.size() || !std::equal(grid.begin(), grid.end(), p.grid.begin()))
    throw ArgumentError(std::string("nelson_aalen: ") + what + " process is on a different grid");
}

}  // namespace

IntensityMatrixPath nelson_aalen(const std::map<Edge, SmoothedProcess>& counting,
                                 const std::map<State, SmoothedProcess>& at_risk,
                                 std::span<const double> grid, int num_states,
                                 const NelsonAalenOptions& options, Diagnostics* diag) {
  if (grid.empty()) throw ArgumentError("nelson_aalen: empty grid");
  for (const auto& [edge, proc] : counting) {
    if (edge.first < 0 || edge.first >= num_states || edge.second < 0 || edge.second >= num_states)
      throw ArgumentError("nelson_aalen: edge outside the state space");
    require_grid(proc, grid, "counting");
    if (!at_risk.count(edge.first))
      throw ArgumentError("nelson_aalen: no at-risk process for state " + std::to_string(edge.first));
  }
  for (const auto& [state, proc] : at_risk) {
    (void)state;
    require_grid(proc, grid, "at-risk");
  }

  const double guard = 1e-10 * options.subjects;
  const auto q = static_cast<Eigen::Index>(num_states);
  IntensityMatrixPath out;
  out.grid.assign(grid.begin(), grid.end());
  out.increments.reserve(grid.size());
  out.cumulative.reserve(grid.size());
  Eigen::MatrixXd running = Eigen::MatrixXd::Zero(q, q);

  for (std::size_t g = 0; g < grid.size(); ++g) {
    Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(q, q);
    for (const auto& [edge, proc] : counting) {
      double dn = 0.0;
      if (g > 0) {
        dn = proc.values[g] - proc.values[g - 1];
      } else if (options.from_origin) {
        dn = proc.values[0];
      }
      if (dn <= 0.0) continue;
      const double y = at_risk.at(edge.first).values[g];
      if (!(y >= guard) || y <= 0.0) {
        if (diag) ++diag->guarded_increments;
        continue;
      }
      inc(edge.first, edge.second) += dn / y;
    }
    for (Eigen::Index j = 0; j < q; ++j) inc(j, j) = -(inc.row(j).sum() - inc(j, j));
    running += inc;
    out.increments.push_back(std::move(inc));
    out.cumulative.push_back(running);
  }
  return out;
}

TransitionMatrixPath aalen_johansen(const IntensityMatrixPath& intensities, Diagnostics* diag) {
  TransitionMatrixPath out;
  out.grid = intensities.grid;
  if (intensities.increments.empty()) return out;
  const Eigen::Index q = intensities.increments.front().rows();
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(q, q);
  out.matrices.reserve(intensities.increments.size());
  for (const auto& inc : intensities.increments) {
    Eigen::MatrixXd factor = Eigen::MatrixXd::Identity(q, q);
    for (Eigen::Index j = 0; j < q; ++j) {
      double exits = 0.0;
      for (Eigen::Index l = 0; l < q; ++l)
        if (l != j) exits += std::max(0.0, inc(j, l));
      const double scale = exits > 1.0 ? 1.0 / exits : 1.0;
      if (exits > 1.0 && diag) ++diag->capped_increments;
      double off = 0.0;
      for (Eigen::Index l = 0; l < q; ++l) {
        if (l == j) continue;
        factor(j, l) = std::max(0.0, inc(j, l)) * scale;
        off += factor(j, l);
      }
      factor(j, j) = 1.0 - off;
    }
    p = p * factor;
    for (Eigen::Index a = 0; a < q; ++a) {
      for (Eigen::Index b = 0; b < q; ++b) {
        double& v = p(a, b);
        if (v < 0.0 || v > 1.0) {
          if (diag && (v < -1e-12 || v > 1.0 + 1e-12)) ++diag->clipped_values;
          v = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    out.matrices.push_back(p);
  }
  return out;
}

OccupationCurves occupation_probs(const TransitionMatrixPath& trans, std::span<const double> initial) {
  if (trans.matrices.empty()) throw ArgumentError("occupation_probs: empty transition path");
  const Eigen::Index q = trans.matrices.front().rows();
  if (static_cast<Eigen::Index>(initial.size()) != q)
    throw ArgumentError("occupation_probs: initial distribution has the wrong length");
  double total = 0.0;
  for (double v : initial) {
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("occupation_probs: initial entries must lie in [0,1]");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-8) throw ArgumentError("occupation_probs: initial distribution must sum to 1");

  OccupationCurves out;
  out.grid = trans.grid;
  out.initial = Eigen::Map<const Eigen::VectorXd>(initial.data(), q);
  out.probs.reserve(trans.matrices.size());
  for (const auto& p : trans.matrices) {
    Eigen::VectorXd pi = p.transpose() * out.initial;
    for (Eigen::Index s = 0; s < q; ++s) pi[s] = std::clamp(pi[s], 0.0, 1.0);
    out.probs.push_back(std::move(pi));
  }
  return out;
}

CurveEstimate pooled_occupation(const OccupationCurves& curves, std::span<const State> states) {
  CurveEstimate out;
  out.grid = curves.grid;
  out.values.assign(curves.grid.size(), 0.0);
  for (std::size_t g = 0; g < curves.grid.size(); ++g) {
    double sum = 0.0;
    for (State s : states) {
      if (s < 0 || s >= curves.probs[g].size()) throw StructureError("pooled_occupation: unknown state");
      sum += curves.probs[g][s];
    }
    out.values[g] = std::clamp(sum, 0.0, 1.0);
  }
  out.scalar = out.values.back();
  return out;
}

std::vector<double> initial_from_at_risk(const std::map<State, SmoothedProcess>& at_risk, int num_states) {
  std::vector<double> init(static_cast<std::size_t>(num_states), 0.0);
  double total = 0.0;
  for (const auto& [state, proc] : at_risk) {
    if (state < 0 || state >= num_states) throw ArgumentError("initial_from_at_risk: unknown state");
    init[static_cast<std::size_t>(state)] = std::max(0.0, proc.values.front());
    total += init[static_cast<std::size_t>(state)];
  }
  if (!(total > 0.0)) throw EstimationError("no subjects at risk at the first grid point");
  for (double& v : init) v /= total;
  return init;
}

OccupationCurves estimate_occupation(const Smoother& smoother, const MultistateTree& tree,
                                     InitialDistribution initial, Diagnostics* diag) {
  std::map<Edge, SmoothedProcess> counting;
  std::map<State, SmoothedProcess> at_risk;
  for (const Edge& e : tree.edges()) counting.emplace(e, smoother.counting(tree, e.first, e.second));
  for (State s : tree.states()) {
    if (tree.is_leaf(s) && initial == InitialDistribution::root) continue;
    const State single[] = {s};
    at_risk.emplace(s, smoother.at_risk(single));
  }

  NelsonAalenOptions options;
  options.subjects = static_cast<double>(smoother.active_count());
  options.from_origin = initial == InitialDistribution::root;
  const auto& grid = smoother.grid();
  const IntensityMatrixPath a = nelson_aalen(counting, at_risk, grid, tree.num_states(), options, diag);
  const TransitionMatrixPath p = aalen_johansen(a, diag);

  std::vector<double> init(static_cast<std::size_t>(tree.num_states()), 0.0);
  if (initial == InitialDistribution::root) {
    init[0] = 1.0;
  } else {
    init = initial_from_at_risk(at_risk, tree.num_states());
  }
  return occupation_probs(p, init);
}

}  // namespace curstat
