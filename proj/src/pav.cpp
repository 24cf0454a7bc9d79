#include <algorithm>
#include <cmath>
#include <numeric>

#include "curstat/errors.hpp"
#include "curstat/nonparam.hpp"

namespace curstat {

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return left_value;
  return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

namespace {

struct Block {
  double weighted_sum;
  double weight;
  std::size_t first;  // first distinct-time index covered
};

}  // namespace

StepFunction pav_fit(std::span<const double> times, std::span<const double> responses,
                     std::span<const double> weights) {
  const std::size_t n = times.size();
  if (n == 0) throw ArgumentError("pav_fit: no observations");
  if (responses.size() != n) throw ArgumentError("pav_fit: times and responses differ in length");
  if (!weights.empty() && weights.size() != n) throw ArgumentError("pav_fit: weights differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(times[i]) || std::isnan(responses[i])) throw ArgumentError("pav_fit: NaN input");
    if (!weights.empty() && !(weights[i] > 0.0)) throw ArgumentError("pav_fit: weights must be positive");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  // Collapse ties into one weighted point each.
  StepFunction fit;
  std::vector<double> sums;
  std::vector<double> mass;
  for (std::size_t idx : order) {
    const double w = weights.empty() ? 1.0 : weights[idx];
    if (fit.knots.empty() || times[idx] != fit.knots.back()) {
      fit.knots.push_back(times[idx]);
      sums.push_back(0.0);
      mass.push_back(0.0);
    }
    sums.back() += w * responses[idx];
    mass.back() += w;
  }

  std::vector<Block> stack;
  stack.reserve(fit.knots.size());
  for (std::size_t k = 0; k < fit.knots.size(); ++k) {
    stack.push_back({sums[k], mass[k], k});
    while (stack.size() > 1) {
      const Block& top = stack.back();
      const Block& below = stack[stack.size() - 2];
      if (below.weighted_sum / below.weight <= top.weighted_sum / top.weight) break;
      Block merged{below.weighted_sum + top.weighted_sum, below.weight + top.weight, below.first};
      stack.pop_back();
      stack.back() = merged;
    }
  }

  fit.values.assign(fit.knots.size(), 0.0);
  for (std::size_t b = 0; b < stack.size(); ++b) {
    const std::size_t end = (b + 1 < stack.size()) ? stack[b + 1].first : fit.knots.size();
    const double level = stack[b].weighted_sum / stack[b].weight;
    std::fill(fit.values.begin() + static_cast<std::ptrdiff_t>(stack[b].first),
              fit.values.begin() + static_cast<std::ptrdiff_t>(end), level);
  }
  fit.left_value = 0.0;
  return fit;
}

StepFunction pav_fit(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> t;
  std::vector<double> y;
  t.reserve(pairs.size());
  y.reserve(pairs.size());
  for (const auto& [time, response] : pairs) {
    t.push_back(time);
    y.push_back(response);
  }
  return pav_fit(t, y);
}

}  // namespace curstat
