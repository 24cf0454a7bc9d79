#include "curstat/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "curstat/parallel.hpp"
#include "curstat/rng.hpp"

namespace curstat {

std::string to_string(DeviationQuantile q) {
  return q == DeviationQuantile::one_minus_alpha ? "1-alpha" : "1-alpha/2";
}

DeviationQuantile parse_deviation_quantile(const std::string& text) {
  if (text == "1-alpha") return DeviationQuantile::one_minus_alpha;
  if (text == "1-alpha/2") return DeviationQuantile::one_minus_half_alpha;
  throw ArgumentError("unknown deviation quantile '" + text + "' (expected 1-alpha or 1-alpha/2)");
}

double BootstrapConfig::omega(double h) {
  if (!(h > 0.0)) throw ArgumentError("bandwidth must be positive");
  return h <= 1.0 ? 0.8 : 1.2;
}

double BootstrapConfig::inflated_bandwidth(double h) { return std::pow(h, omega(h)); }

void BootstrapConfig::validate() const {
  if (replicates < 1) throw ArgumentError("bootstrap needs at least one replicate");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0,1)");
}

StateSampler::StateSampler(std::span<const CurrentStatusRecord> records, int num_states, const KernelSpec& kernel)
    : num_states_(num_states) {
  if (records.empty()) throw ArgumentError("cannot resample an empty dataset");
  if (!(kernel.bandwidth > 0.0)) throw ArgumentError("resampling bandwidth must be positive");
  const std::size_t n = records.size();
  const auto q = static_cast<std::size_t>(num_states);
  probs_.assign(n * q, 0.0);
  nearest_.assign(n, 0);
  degenerate_.assign(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    const double c = records[i].inspection_time;
    double* row = &probs_[i * q];
    double total = 0.0;
    double best = std::numeric_limits<double>::infinity();
    State best_state = 0;
    for (std::size_t l = 0; l < n; ++l) {
      const double u = records[l].inspection_time - c;
      const State s = records[l].observed_state;
      const double w = kernel(u);
      row[s] += w;
      total += w;
      const double d = std::abs(u);
      if (d < best || (d == best && s < best_state)) {
        best = d;
        best_state = s;
      }
    }
    nearest_[i] = best_state;
    if (!(total > 0.0) || !std::isfinite(total)) {
      degenerate_[i] = 1;
      ++fallbacks_;
      std::fill(row, row + q, 0.0);
      row[best_state] = 1.0;
      continue;
    }
    for (std::size_t s = 0; s < q; ++s) row[s] /= total;
  }
}

std::span<const double> StateSampler::probabilities(std::size_t source) const {
  const auto q = static_cast<std::size_t>(num_states_);
  return {probs_.data() + source * q, q};
}

State StateSampler::draw(std::size_t source, std::mt19937_64& rng) const {
  if (degenerate_[source]) return nearest_[source];
  const auto p = probabilities(source);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  State last = 0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s] <= 0.0) continue;
    last = static_cast<State>(s);
    acc += p[s];
    if (u < acc) return last;
  }
  return last;  // rounding left u above the final cumulative sum
}

Resample smoothed_resample(std::span<const CurrentStatusRecord> records, const StateSampler& sampler,
                           std::mt19937_64& rng) {
  const std::size_t n = records.size();
  Resample out;
  out.source.resize(n);
  out.records.resize(n);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t i = 0; i < n; ++i) out.source[i] = pick(rng);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = out.records[i];
    const auto& src = records[out.source[i]];
    r.id = std::to_string(i + 1);
    r.inspection_time = src.inspection_time;
    r.observed_state = sampler.draw(out.source[i], rng);
    r.covariates = src.covariates;
  }
  return out;
}

std::vector<CurrentStatusRecord> smoothed_resample(std::span<const CurrentStatusRecord> records, int num_states,
                                                   const KernelSpec& kernel, std::mt19937_64& rng,
                                                   Diagnostics* diag) {
  StateSampler sampler(records, num_states, kernel);
  if (diag && sampler.fallbacks() > 0) {
    diag->kernel_fallbacks += sampler.fallbacks();
    diag->advisories.push_back("kernel mass degenerate for " + std::to_string(sampler.fallbacks()) +
                               " subjects; nearest-neighbour state used");
  }
  return smoothed_resample(records, sampler, rng).records;
}

double arcsine(double x) { return std::asin(std::sqrt(std::clamp(x, 0.0, 1.0))); }

double upper_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ArgumentError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  auto idx = static_cast<std::size_t>(std::ceil(pos - 1e-12));
  return values[std::min(idx, values.size() - 1)];
}

CurveEstimate ci_from_deviations(const CurveEstimate& point, const std::vector<std::vector<double>>& deviations,
                                 double alpha, DeviationQuantile rule) {
  if (deviations.size() != point.values.size())
    throw ArgumentError("one deviation sample per evaluation time is required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0,1)");
  CurveEstimate out = point;
  out.ci_lower.resize(point.values.size());
  out.ci_upper.resize(point.values.size());
  const double half_pi = std::numbers::pi / 2.0;
  const double level = rule == DeviationQuantile::one_minus_alpha ? 1.0 - alpha : 1.0 - alpha / 2.0;
  for (std::size_t g = 0; g < point.values.size(); ++g) {
    const double delta = upper_quantile(deviations[g], level);
    const double centre = arcsine(point.values[g]);
    const double lo = std::sin(std::max(0.0, centre - delta));
    const double hi = std::sin(std::min(half_pi, centre + delta));
    out.ci_lower[g] = std::clamp(lo * lo, 0.0, 1.0);
    out.ci_upper[g] = std::clamp(hi * hi, 0.0, 1.0);
  }
  return out;
}

namespace {

std::vector<double> evaluate(const CurveEstimate& curve, std::span<const double> times) {
  if (times.empty()) return curve.values;
  std::vector<double> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = curve.at(times[i]);
  return out;
}

}  // namespace

CurveEstimate pointwise_ci(const MultistateTree& tree, std::span<const CurrentStatusRecord> records, State j,
                           State k, Method method, Target target, const BootstrapConfig& config,
                           const EstimationOptions& options, Diagnostics* diag,
                           std::span<const double> eval_times) {
  config.validate();
  if (static_cast<double>(config.replicates) * config.alpha / 2.0 < 1.0)
    throw ArgumentError("B = " + std::to_string(config.replicates) + " is too small for alpha = " +
                        std::to_string(config.alpha) + " (need B * alpha / 2 >= 1)");

  ConditionalEstimator base(tree, records, options);
  const CurveEstimate point = base.target(j, k, method, target);
  const double h = base.bandwidth();
  const double h_tilde = BootstrapConfig::inflated_bandwidth(h);

  EstimationOptions inflated_opts = options;
  inflated_opts.bandwidth = h_tilde;
  inflated_opts.grid = base.grid();
  ConditionalEstimator inflated(tree, records, inflated_opts);
  const std::vector<double> centre = evaluate(inflated.target(j, k, method, target), eval_times);

  const StateSampler sampler(records, tree.num_states(), KernelSpec{h_tilde});
  const auto kernel = base.kernel_matrix();
  const std::size_t points = eval_times.empty() ? point.values.size() : eval_times.size();

  const auto b_count = static_cast<std::size_t>(config.replicates);
  std::vector<std::vector<double>> replicate_values(b_count);
  std::vector<char> failed(b_count, 0);
  parallel_for(b_count, config.threads, [&](std::size_t b) {
    auto rng = make_stream(config.seed, b);
    const Resample rs = smoothed_resample(records, sampler, rng);
    auto gathered = std::make_shared<const KernelMatrix>(kernel->gather(rs.source));
    ConditionalEstimator est(tree, rs.records, gathered);
    try {
      replicate_values[b] = evaluate(est.target(j, k, method, target), eval_times);
    } catch (const EstimationError&) {
      failed[b] = 1;
    }
  });

  std::vector<std::vector<double>> deviations(points);
  std::size_t ok = 0;
  for (std::size_t b = 0; b < b_count; ++b) {
    if (failed[b]) continue;
    ++ok;
    for (std::size_t g = 0; g < points; ++g)
      deviations[g].push_back(std::abs(arcsine(replicate_values[b][g]) - arcsine(centre[g])));
  }
  if (ok == 0) throw EstimationError("every bootstrap replicate failed to produce an estimate");

  CurveEstimate reported = point;
  if (!eval_times.empty()) {
    reported.grid.assign(eval_times.begin(), eval_times.end());
    reported.values = evaluate(point, eval_times);
  }
  CurveEstimate out = ci_from_deviations(reported, deviations, config.alpha, config.quantile);
  if (diag) {
    diag->merge(base.diagnostics());
    diag->kernel_fallbacks += sampler.fallbacks();
    if (ok < b_count)
      diag->advisories.push_back(std::to_string(b_count - ok) + " of " + std::to_string(b_count) +
                                 " bootstrap replicates failed and were dropped");
  }
  return out;
}

}  // namespace curstat
