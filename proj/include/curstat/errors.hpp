#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace curstat {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad values, mismatched sizes, invalid configuration.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A state label or edge that does not fit the multistate tree.
class StructureError : public Error {
 public:
  using Error::Error;
};

// The data do not carry enough information for the requested estimate.
class EstimationError : public Error {
 public:
  using Error::Error;
};

// Counters for numerical safeguards applied during estimation. Nothing here is
// fatal; the counts are echoed into output metadata.
struct Diagnostics {
  int clipped_values = 0;        // probabilities pulled back into [0,1]
  int capped_increments = 0;     // hazard increments reduced to keep survival >= 0
  int guarded_increments = 0;    // increments zeroed because the at-risk set was empty
  int flagged_grid_points = 0;   // grid points with zero kernel mass
  int kernel_fallbacks = 0;      // nearest-neighbour draws in the smoothed bootstrap
  std::vector<std::string> advisories;

  void merge(const Diagnostics& other) {
    clipped_values += other.clipped_values;
    capped_increments += other.capped_increments;
    guarded_increments += other.guarded_increments;
    flagged_grid_points += other.flagged_grid_points;
    kernel_fallbacks += other.kernel_fallbacks;
    advisories.insert(advisories.end(), other.advisories.begin(), other.advisories.end());
  }
};

}  // namespace curstat
