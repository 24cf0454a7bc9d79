#include "curstat/conditional.hpp"

#include <algorithm>
#include <cmath>

namespace curstat {

std::string to_string(Method m) { return m == Method::fre ? "fre" : "ple"; }
std::string to_string(Target t) { return t == Target::psi ? "psi" : "f"; }

Method parse_method(const std::string& text) {
  if (text == "fre") return Method::fre;
  if (text == "ple") return Method::ple;
  throw ArgumentError("unknown method '" + text + "' (expected fre or ple)");
}

Target parse_target(const std::string& text) {
  if (text == "psi") return Target::psi;
  if (text == "f" || text == "entry") return Target::entry;
  throw ArgumentError("unknown target '" + text + "' (expected psi or f)");
}

namespace {

std::shared_ptr<const KernelMatrix> build_kernel(std::span<const CurrentStatusRecord> records,
                                                 const EstimationOptions& options) {
  if (records.empty()) throw ArgumentError("no records to estimate from");
  const std::vector<double> times = inspection_times(records);
  const double h = options.bandwidth ? *options.bandwidth : select_bandwidth(times);
  std::vector<double> grid = options.grid.empty() ? make_grid(times, options.grid_points) : options.grid;
  return std::make_shared<KernelMatrix>(times, KernelSpec{h}, std::move(grid));
}

double clip_unit(double v, Diagnostics& diag) {
  if (v < 0.0 || v > 1.0) {
    if (v < -1e-12 || v > 1.0 + 1e-12) ++diag.clipped_values;
    return std::clamp(v, 0.0, 1.0);
  }
  return v;
}

}  // namespace

ConditionalEstimator::ConditionalEstimator(const MultistateTree& tree, std::span<const CurrentStatusRecord> records,
                                           const EstimationOptions& options)
    : ConditionalEstimator(tree, records, build_kernel(records, options), {}, options.initial) {}

ConditionalEstimator::ConditionalEstimator(const MultistateTree& tree, std::span<const CurrentStatusRecord> records,
                                           std::shared_ptr<const KernelMatrix> kernel, std::vector<char> active,
                                           InitialDistribution initial)
    : tree_(tree),
      records_(records),
      kernel_(std::move(kernel)),
      smoother_(records, kernel_, std::move(active)),
      initial_(initial) {
  validate_records(records_, tree_);
}

void ConditionalEstimator::validate_pair(State j, State k) const {
  if (!tree_.contains(j) || !tree_.contains(k))
    throw StructureError("unknown state in estimand (" + std::to_string(j) + "," + std::to_string(k) + ")");
  if (j == k) throw ArgumentError("estimand requires j != k (j must lie strictly before k on its path)");
}

const std::vector<double>& ConditionalEstimator::fractional_weights(State k_tilde) {
  if (!tree_.contains(k_tilde)) throw StructureError("unknown state " + std::to_string(k_tilde));
  if (auto it = weights_.find(k_tilde); it != weights_.end()) return it->second;

  std::vector<double> phi(records_.size(), 0.0);
  if (k_tilde == 0) {
    std::fill(phi.begin(), phi.end(), 1.0);
  } else {
    const State up = tree_.parent(k_tilde);
    // Copy: the recursive calls below may rehash weights_.
    const std::vector<double> phi_up = fractional_weights(up);
    const Stage& st = stage(up);
    const auto pos = std::find(st.children.begin(), st.children.end(), k_tilde) - st.children.begin();
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const State s = records_[i].observed_state;
      if (tree_.in_subtree(s, k_tilde)) {
        phi[i] = 1.0;
      } else if (tree_.is_on_path(s, k_tilde)) {
        phi[i] = std::clamp(phi_up[i] * exit_after(st, static_cast<std::size_t>(pos), records_[i].inspection_time),
                            0.0, 1.0);
      }
    }
  }
  return weights_.emplace(k_tilde, std::move(phi)).first->second;
}

double ConditionalEstimator::exit_after(const Stage& st, std::size_t child_index, double s) const {
  const auto& grid = kernel_->grid();
  const auto idx = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), s) - grid.begin());
  if (idx >= grid.size()) return 0.0;
  return st.from_here[child_index][idx];
}

const ConditionalEstimator::Stage& ConditionalEstimator::stage(State parent) {
  if (auto it = stages_.find(parent); it != stages_.end()) return it->second;
  if (tree_.is_leaf(parent)) throw StructureError("state " + std::to_string(parent) + " has no exits");

  const std::vector<double> phi = fractional_weights(parent);
  Stage st;
  st.children = tree_.children(parent);
  const PooledState pooled = tree_.pool_preceding(parent);
  st.at_risk = smoother_.at_risk(pooled.members, phi).values;

  const std::size_t grid_size = kernel_->grid().size();
  const std::size_t nc = st.children.size();
  std::vector<std::vector<double>> counts;
  counts.reserve(nc);
  for (State c : st.children) counts.push_back(smoother_.counting(tree_, parent, c).values);

  const double guard = 1e-10 * static_cast<double>(smoother_.active_count());
  st.hazard.assign(nc, std::vector<double>(grid_size, 0.0));
  std::vector<double> total(grid_size, 0.0);
  for (std::size_t g = 0; g < grid_size; ++g) {
    const double y = st.at_risk[g];
    double sum = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      const double dn = g == 0 ? counts[c][0] : counts[c][g] - counts[c][g - 1];
      if (dn <= 0.0) continue;
      if (!(y >= guard) || y <= 0.0) {
        ++diag_.guarded_increments;
        continue;
      }
      st.hazard[c][g] = dn / y;
      sum += st.hazard[c][g];
    }
    if (sum > 1.0) {
      ++diag_.capped_increments;
      for (std::size_t c = 0; c < nc; ++c) st.hazard[c][g] /= sum;
      sum = 1.0;
    }
    total[g] = sum;
  }

  // Cumulative incidence with the left-limit survival factor S(s-).
  st.incidence.assign(nc, std::vector<double>(grid_size, 0.0));
  double surv = 1.0;
  std::vector<double> acc(nc, 0.0);
  for (std::size_t g = 0; g < grid_size; ++g) {
    for (std::size_t c = 0; c < nc; ++c) {
      acc[c] += surv * st.hazard[c][g];
      st.incidence[c][g] = clip_unit(acc[c], diag_);
    }
    surv *= 1.0 - total[g];
  }

  // from_here[c][g] = sum_{g' >= g} prod_{g <= g'' < g'} (1 - total) * hazard_c(g')
  st.from_here.assign(nc, std::vector<double>(grid_size + 1, 0.0));
  for (std::size_t c = 0; c < nc; ++c) {
    auto& r = st.from_here[c];
    for (std::size_t g = grid_size; g-- > 0;) r[g] = st.hazard[c][g] + (1.0 - total[g]) * r[g + 1];
  }
  return stages_.emplace(parent, std::move(st)).first->second;
}

CurveEstimate ConditionalEstimator::fre_factor(State parent, State child) {
  if (!tree_.has_edge(parent, child))
    throw StructureError("(" + std::to_string(parent) + "," + std::to_string(child) + ") is not an edge");
  const Stage& st = stage(parent);
  const auto pos = static_cast<std::size_t>(std::find(st.children.begin(), st.children.end(), child) -
                                            st.children.begin());
  CurveEstimate out;
  out.grid = kernel_->grid();
  out.values = st.incidence[pos];
  out.scalar = out.values.back();
  return out;
}

const OccupationCurves& ConditionalEstimator::occupation() {
  if (!occupation_) occupation_ = estimate_occupation(smoother_, tree_, initial_, &diag_);
  return *occupation_;
}

CurveEstimate ConditionalEstimator::psi(State j, State k, Method method) {
  validate_pair(j, k);
  CurveEstimate out;
  out.grid = kernel_->grid();
  if (!tree_.is_on_path(j, k)) {
    out.values.assign(out.grid.size(), 0.0);
    out.scalar = 0.0;
    diag_.advisories.push_back("state " + std::to_string(j) + " is not on the path to " + std::to_string(k) +
                               "; the conditional probability is 0");
    return out;
  }

  if (method == Method::fre) {
    const std::vector<State> path = tree_.path_to(k);
    const auto start = static_cast<std::size_t>(std::find(path.begin(), path.end(), j) - path.begin());
    out.values.assign(out.grid.size(), 1.0);
    for (std::size_t b = start; b + 1 < path.size(); ++b) {
      const CurveEstimate factor = fre_factor(path[b], path[b + 1]);
      for (std::size_t g = 0; g < out.values.size(); ++g) out.values[g] *= factor.values[g];
    }
  } else {
    const OccupationCurves& occ = occupation();
    const std::vector<State> num_states = tree_.descendant_set(k);
    const std::vector<State> den_states = tree_.descendant_set(j);
    const CurveEstimate num = pooled_occupation(occ, num_states);
    const CurveEstimate den = pooled_occupation(occ, den_states);
    const double denominator = den.values.back();
    if (!(denominator > 1e-10))
      throw EstimationError("insufficient information about state " + std::to_string(j) +
                            ": estimated probability of ever entering it is zero");
    out.values.resize(out.grid.size());
    for (std::size_t g = 0; g < out.values.size(); ++g) out.values[g] = clip_unit(num.values[g] / denominator, diag_);
  }
  out.scalar = out.values.back();
  return out;
}

CurveEstimate ConditionalEstimator::entry(State j, State k, Method method) {
  const CurveEstimate p = psi(j, k, method);
  return entry_distribution(p, *p.scalar);
}

CurveEstimate ConditionalEstimator::target(State j, State k, Method method, Target target) {
  return target == Target::psi ? psi(j, k, method) : entry(j, k, method);
}

CurveEstimate entry_distribution(const CurveEstimate& psi, double scalar) {
  if (!(scalar > 1e-12))
    throw EstimationError("entry distribution undefined: no probability mass ever reaches the target state");
  CurveEstimate out;
  out.grid = psi.grid;
  out.values.resize(psi.values.size());
  for (std::size_t g = 0; g < psi.values.size(); ++g) out.values[g] = std::clamp(psi.values[g] / scalar, 0.0, 1.0);
  out.scalar = 1.0;
  return out;
}

double fractional_weight(std::span<const CurrentStatusRecord> records, const MultistateTree& tree, State k_tilde,
                         const KernelSpec& kernel, std::size_t subject, const EstimationOptions& options) {
  if (subject >= records.size()) throw ArgumentError("fractional_weight: subject index out of range");
  EstimationOptions opts = options;
  opts.bandwidth = kernel.bandwidth;
  ConditionalEstimator est(tree, records, opts);
  return est.fractional_weights(k_tilde)[subject];
}

CurveEstimate fre_conditional(std::span<const CurrentStatusRecord> records, const MultistateTree& tree, State j,
                              State k, const KernelSpec& kernel, const EstimationOptions& options,
                              Diagnostics* diag) {
  EstimationOptions opts = options;
  opts.bandwidth = kernel.bandwidth;
  ConditionalEstimator est(tree, records, opts);
  CurveEstimate out = est.psi(j, k, Method::fre);
  if (diag) diag->merge(est.diagnostics());
  return out;
}

CurveEstimate ple_conditional(std::span<const CurrentStatusRecord> records, const MultistateTree& tree, State j,
                              State k, const KernelSpec& kernel, const EstimationOptions& options,
                              Diagnostics* diag) {
  EstimationOptions opts = options;
  opts.bandwidth = kernel.bandwidth;
  ConditionalEstimator est(tree, records, opts);
  CurveEstimate out = est.psi(j, k, Method::ple);
  if (diag) diag->merge(est.diagnostics());
  return out;
}

}  // namespace curstat
