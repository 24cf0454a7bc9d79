#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "curstat/nonparam.hpp"
#include "curstat/rng.hpp"
#include "curstat/simulate.hpp"

namespace fixtures {

struct SimData {
  std::vector<curstat::LatentTrajectory> paths;
  std::vector<curstat::CurrentStatusRecord> records;
};

inline SimData simulate(const curstat::SimProtocol& protocol, int n, std::uint64_t seed) {
  curstat::SimProtocol p = protocol;
  p.n = n;
  auto rng = curstat::make_stream(seed, 0);
  SimData out;
  out.paths = curstat::generate_trajectories(p, rng);
  out.records = curstat::inspect(out.paths, p.inspection, rng);
  return out;
}

inline SimData five(int n, std::uint64_t seed) { return simulate(curstat::SimProtocol::five_state(), n, seed); }
inline SimData seven(int n, std::uint64_t seed) { return simulate(curstat::SimProtocol::seven_state(), n, seed); }

inline bool nondecreasing(const std::vector<double>& v, double tol = 1e-8) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::round(v[i] / tol) < std::round(v[i - 1] / tol)) return false;
  return true;
}

inline bool within_unit(const std::vector<double>& v) {
  for (double x : v)
    if (!(x >= 0.0 && x <= 1.0)) return false;
  return true;
}

}  // namespace fixtures
