#pragma once

#include <optional>
#include <vector>

namespace curstat {

// Probability curve on a time grid, optionally with a limiting value and
// pointwise confidence bounds.
struct CurveEstimate {
  std::vector<double> grid;
  std::vector<double> values;
  std::optional<double> scalar;
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;

  // Linear interpolation between grid points, clamped to the end values.
  double at(double t) const;
  double horizon() const { return grid.back(); }
  bool has_bounds() const { return !ci_lower.empty(); }
};

double interpolate(const std::vector<double>& grid, const std::vector<double>& values, double t);

}  // namespace curstat
