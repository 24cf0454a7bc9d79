#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "curstat/errors.hpp"
#include "curstat/nonparam.hpp"

namespace curstat {

void validate_records(std::span<const CurrentStatusRecord> records, const MultistateTree& tree) {
  for (const auto& r : records) {
    if (!std::isfinite(r.inspection_time) || r.inspection_time < 0.0)
      throw ArgumentError("record '" + r.id + "': inspection time must be finite and >= 0");
    if (!tree.contains(r.observed_state))
      throw StructureError("record '" + r.id + "': state " + std::to_string(r.observed_state) +
                           " is not in the tree");
  }
}

std::vector<double> inspection_times(std::span<const CurrentStatusRecord> records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.inspection_time);
  return out;
}

double KernelSpec::operator()(double u) const {
  const double z = u / bandwidth;
  return std::exp(-0.5 * z * z) / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
}

void KernelSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw ArgumentError("kernel bandwidth must be a positive finite number");
}

double SmoothedProcess::at(double t) const {
  if (grid.empty()) throw ArgumentError("empty process");
  if (t <= grid.front()) return values.front();
  if (t >= grid.back()) return values.back();
  auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const auto hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  const double frac = (t - grid[lo]) / (grid[hi] - grid[lo]);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> make_grid(std::span<const double> times, int points) {
  if (times.empty()) throw ArgumentError("make_grid: no inspection times");
  const auto [lo_it, hi_it] = std::minmax_element(times.begin(), times.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> grid;
  if (points <= 0 || hi == lo) {
    grid.assign(times.begin(), times.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
  }
  if (points < 2) throw ArgumentError("make_grid: need at least 2 grid points");
  grid.resize(static_cast<std::size_t>(points));
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (int g = 0; g < points; ++g) grid[static_cast<std::size_t>(g)] = lo + step * g;
  grid.back() = hi;
  return grid;
}

namespace {

// Replace values at zero-mass grid points by the nearest valid neighbour.
void carry_flagged(std::vector<double>& values, const std::vector<std::size_t>& flagged) {
  if (flagged.empty()) return;
  std::vector<char> bad(values.size(), 0);
  for (std::size_t g : flagged) bad[g] = 1;
  if (static_cast<std::size_t>(std::count(bad.begin(), bad.end(), 1)) == values.size())
    throw EstimationError("kernel mass vanishes at every grid point; bandwidth too small");
  for (std::size_t g : flagged) {
    std::size_t best = values.size();
    for (std::size_t d = 1; d < values.size(); ++d) {
      if (g >= d && !bad[g - d]) { best = g - d; break; }
      if (g + d < values.size() && !bad[g + d]) { best = g + d; break; }
    }
    values[g] = values[best];
  }
}

}  // namespace

SmoothedProcess nw_smooth(const StepFunction& step, std::span<const double> times,
                          const KernelSpec& kernel, std::span<const double> grid) {
  kernel.validate();
  if (grid.empty()) throw ArgumentError("nw_smooth: empty grid");
  if (times.empty()) throw ArgumentError("nw_smooth: no inspection times");
  SmoothedProcess out;
  out.grid.assign(grid.begin(), grid.end());
  out.values.assign(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double num = 0.0;
    double den = 0.0;
    for (double c : times) {
      const double w = kernel(c - grid[g]);
      num += w * step(c);
      den += w;
    }
    if (den > 0.0) {
      out.values[g] = num / den;
    } else {
      out.flagged.push_back(g);
    }
  }
  carry_flagged(out.values, out.flagged);
  return out;
}

KernelMatrix::KernelMatrix(std::span<const double> times, const KernelSpec& kernel, std::vector<double> grid)
    : kernel_(kernel), grid_(std::move(grid)), times_(times.begin(), times.end()) {
  kernel_.validate();
  if (grid_.empty()) throw ArgumentError("kernel matrix: empty grid");
  for (std::size_t g = 1; g < grid_.size(); ++g)
    if (!(grid_[g] > grid_[g - 1])) throw ArgumentError("kernel matrix: grid must be strictly increasing");
  const auto rows = static_cast<Eigen::Index>(grid_.size());
  const auto cols = static_cast<Eigen::Index>(times_.size());
  weights_.resize(rows, cols);
  const double inv_h = 1.0 / kernel_.bandwidth;
  const double norm = inv_h / std::sqrt(2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < cols; ++i) {
    const double c = times_[static_cast<std::size_t>(i)];
    for (Eigen::Index g = 0; g < rows; ++g) {
      const double z = (c - grid_[static_cast<std::size_t>(g)]) * inv_h;
      weights_(g, i) = norm * std::exp(-0.5 * z * z);
    }
  }
}

KernelMatrix KernelMatrix::gather(std::span<const std::size_t> columns) const {
  KernelMatrix out;
  out.kernel_ = kernel_;
  out.grid_ = grid_;
  out.times_.reserve(columns.size());
  out.weights_.resize(weights_.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] >= times_.size()) throw ArgumentError("kernel matrix gather: column out of range");
    out.times_.push_back(times_[columns[i]]);
    out.weights_.col(static_cast<Eigen::Index>(i)) = weights_.col(static_cast<Eigen::Index>(columns[i]));
  }
  return out;
}

Smoother::Smoother(std::span<const CurrentStatusRecord> records, std::shared_ptr<const KernelMatrix> kernel,
                   std::vector<char> active)
    : records_(records), kernel_(std::move(kernel)), active_(std::move(active)) {
  if (!kernel_) throw ArgumentError("smoother: missing kernel matrix");
  if (kernel_->subjects() != records_.size())
    throw ArgumentError("smoother: kernel matrix and records differ in size");
  if (active_.empty()) active_.assign(records_.size(), 1);
  if (active_.size() != records_.size()) throw ArgumentError("smoother: active mask has the wrong length");
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (active_[i]) order_.push_back(i);
  active_count_ = order_.size();
  if (active_count_ == 0) throw ArgumentError("smoother: no active subjects");
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    return records_[a].inspection_time < records_[b].inspection_time;
  });

  Eigen::VectorXd mask(static_cast<Eigen::Index>(records_.size()));
  for (std::size_t i = 0; i < records_.size(); ++i) mask[static_cast<Eigen::Index>(i)] = active_[i] ? 1.0 : 0.0;
  mass_ = kernel_->weights() * mask;
  for (Eigen::Index g = 0; g < mass_.size(); ++g)
    if (!(mass_[g] > 0.0)) flagged_.push_back(static_cast<std::size_t>(g));
}

SmoothedProcess Smoother::average(std::span<const double> per_subject) const {
  if (per_subject.size() != records_.size()) throw ArgumentError("smoother: value vector has the wrong length");
  Eigen::VectorXd v(static_cast<Eigen::Index>(records_.size()));
  for (std::size_t i = 0; i < records_.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = active_[i] ? per_subject[i] : 0.0;
  const Eigen::VectorXd num = kernel_->weights() * v;
  SmoothedProcess out;
  out.grid = kernel_->grid();
  out.values.resize(out.grid.size());
  for (std::size_t g = 0; g < out.grid.size(); ++g) {
    const auto gi = static_cast<Eigen::Index>(g);
    out.values[g] = mass_[gi] > 0.0 ? num[gi] / mass_[gi] : 0.0;
  }
  out.flagged = flagged_;
  carry_flagged(out.values, out.flagged);
  return out;
}

SmoothedProcess Smoother::counting_indicator(std::span<const double> indicator) const {
  if (indicator.size() != records_.size()) throw ArgumentError("smoother: indicator has the wrong length");
  std::vector<double> t;
  std::vector<double> y;
  t.reserve(active_count_);
  y.reserve(active_count_);
  for (std::size_t i : order_) {
    t.push_back(records_[i].inspection_time);
    y.push_back(indicator[i]);
  }
  const StepFunction fit = pav_fit(t, y);
  std::vector<double> fitted(records_.size(), 0.0);
  for (std::size_t i : order_) fitted[i] = fit(records_[i].inspection_time);
  SmoothedProcess out = average(fitted);
  const double n = static_cast<double>(active_count_);
  for (double& v : out.values) v *= n;
  return out;
}

SmoothedProcess Smoother::counting(const MultistateTree& tree, State from, State to) const {
  if (!tree.has_edge(from, to))
    throw StructureError("(" + std::to_string(from) + "," + std::to_string(to) + ") is not an edge of the tree");
  std::vector<double> indicator(records_.size(), 0.0);
  for (std::size_t i = 0; i < records_.size(); ++i)
    indicator[i] = tree.in_subtree(records_[i].observed_state, to) ? 1.0 : 0.0;
  return counting_indicator(indicator);
}

SmoothedProcess Smoother::at_risk(std::span<const State> members, std::span<const double> weights) const {
  if (!weights.empty() && weights.size() != records_.size())
    throw ArgumentError("at-risk weights must have one entry per subject");
  int top = 0;
  for (State s : members) top = std::max(top, s + 1);
  std::vector<char> in_set(static_cast<std::size_t>(top), 0);
  for (State s : members) {
    if (s < 0) throw StructureError("negative state label in at-risk set");
    in_set[static_cast<std::size_t>(s)] = 1;
  }
  std::vector<double> v(records_.size(), 0.0);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    double w = 1.0;
    if (!weights.empty()) {
      w = weights[i];
      if (!(w >= 0.0 && w <= 1.0)) throw ArgumentError("at-risk weight outside [0,1] for subject " + records_[i].id);
    }
    const State s = records_[i].observed_state;
    if (s >= 0 && s < top && in_set[static_cast<std::size_t>(s)]) v[i] = w;
  }
  SmoothedProcess out = average(v);
  const double n = static_cast<double>(active_count_);
  for (double& x : out.values) x *= n;
  return out;
}

SmoothedProcess estimate_counting(std::span<const CurrentStatusRecord> records, const MultistateTree& tree,
                                  State from, State to, const KernelSpec& kernel, std::span<const double> grid) {
  validate_records(records, tree);
  if (!tree.has_edge(from, to))
    throw StructureError("(" + std::to_string(from) + "," + std::to_string(to) + ") is not an edge of the tree");
  auto km = std::make_shared<KernelMatrix>(inspection_times(records), kernel,
                                           std::vector<double>(grid.begin(), grid.end()));
  return Smoother(records, km).counting(tree, from, to);
}

SmoothedProcess estimate_at_risk(std::span<const CurrentStatusRecord> records, const MultistateTree& tree,
                                 State state, const KernelSpec& kernel, std::span<const double> grid,
                                 std::span<const double> weights) {
  if (!tree.contains(state)) throw StructureError("unknown state label " + std::to_string(state));
  PooledState single{{state}, std::to_string(state)};
  return estimate_at_risk(records, tree, single, kernel, grid, weights);
}

SmoothedProcess estimate_at_risk(std::span<const CurrentStatusRecord> records, const MultistateTree& tree,
                                 const PooledState& pooled, const KernelSpec& kernel,
                                 std::span<const double> grid, std::span<const double> weights) {
  validate_records(records, tree);
  for (State s : pooled.members)
    if (!tree.contains(s)) throw StructureError("pooled state contains unknown label " + std::to_string(s));
  auto km = std::make_shared<KernelMatrix>(inspection_times(records), kernel,
                                           std::vector<double>(grid.begin(), grid.end()));
  return Smoother(records, km).at_risk(pooled.members, weights);
}

}  // namespace curstat
