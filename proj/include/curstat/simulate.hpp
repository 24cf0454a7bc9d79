#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "curstat/bootstrap.hpp"
#include "curstat/conditional.hpp"
#include "curstat/curve.hpp"
#include "curstat/nonparam.hpp"
#include "curstat/tree.hpp"

namespace curstat {

// log(V) ~ Normal(mu, sigma)
struct LogNormal {
  double mu = 0.0;
  double sigma = 0.5;
};

enum class InspectionLaw { uniform, weibull };

// How the upper limit of uniform inspections is derived from a sample.
enum class UniformBound {
  total_sojourn,  // largest entry time into the final state over all subjects
  max_waiting,    // largest single waiting time over all subjects
  fixed           // `upper` as given
};

struct InspectionSpec {
  InspectionLaw law = InspectionLaw::uniform;
  UniformBound bound = UniformBound::total_sojourn;
  double upper = 0.0;  // used with UniformBound::fixed
  double shape = 3.0;  // Weibull eta
  double scale = 2.5;  // Weibull tau
};

struct SimProtocol {
  std::string name;
  MultistateTree tree = MultistateTree::five_state();
  std::map<State, std::map<State, double>> branch;  // parent -> child -> probability
  std::map<State, LogNormal> waiting;               // one entry per non-leaf state
  InspectionSpec inspection;
  int n = 100;
  std::uint64_t seed = 1;

  void validate() const;
  // Probability of ever reaching k starting from j (product of branch probabilities).
  double true_psi(State j, State k) const;

  static SimProtocol five_state(InspectionLaw law = InspectionLaw::uniform);
  static SimProtocol seven_state(InspectionLaw law = InspectionLaw::uniform);
};

SimProtocol protocol_from_json(const std::string& text);
std::string protocol_to_json(const SimProtocol& protocol);

struct LatentTrajectory {
  std::vector<State> path;            // 0, ..., final state
  std::vector<double> entry_times;    // entry_times[0] = 0
  std::vector<int> branch_draws;      // chosen child index at each decision

  State state_at(double t) const;
  bool reaches(State s) const;
  double entry_time(State s) const;   // +inf when never entered
};

std::vector<LatentTrajectory> generate_trajectories(const SimProtocol& protocol, std::mt19937_64& rng);

// Draws C_i independently of the trajectories and records S_i(C_i).
std::vector<CurrentStatusRecord> inspect(std::span<const LatentTrajectory> trajectories,
                                         const InspectionSpec& spec, std::mt19937_64& rng);

// Right-censored follow-up of one subject: states entered at the given times,
// observed until `censor_time`.
struct EventHistory {
  std::string id;
  std::vector<State> states;
  std::vector<double> entry_times;
  double censor_time = 0.0;
};

// Uniform inspection on [0, horizon]. Subjects censored before their
// inspection keep the last state seen.
std::vector<CurrentStatusRecord> mask_to_current_status(std::span<const EventHistory> histories,
                                                        const MultistateTree& tree, double horizon,
                                                        std::mt19937_64& rng);

// Complete-data benchmark: share of subjects that ever reach j who have also
// reached k by time t.
struct EmpiricalBenchmark {
  StepFunction psi;
  double scalar = 0.0;

  double psi_at(double t) const { return psi(t); }
  double entry_at(double t) const { return scalar > 0.0 ? psi(t) / scalar : 0.0; }
  CurveEstimate psi_curve(std::span<const double> grid) const;
  CurveEstimate entry_curve(std::span<const double> grid) const;
};

EmpiricalBenchmark empirical_benchmark(std::span<const LatentTrajectory> trajectories,
                                       const MultistateTree& tree, State j, State k);

// Population Psi_{k|j}(t) under the protocol, by numerical convolution of the
// waiting-time laws along the path.
double true_psi_at(const SimProtocol& protocol, State j, State k, double t);

// Mean over the inspection times of |benchmark(C_i) - estimate(C_i)|.
double mad(const CurveEstimate& estimate, const CurveEstimate& benchmark, std::span<const double> times);
double mad(const CurveEstimate& estimate, const StepFunction& benchmark, std::span<const double> times,
           double benchmark_scale = 1.0);

struct Estimand {
  State j = 1;
  State k = 3;
  std::string label() const;  // "psi_3|1"
};

struct StudyConfig {
  SimProtocol protocol;
  std::vector<int> sizes{100};
  std::vector<Estimand> estimands{{1, 3}};
  std::vector<Method> methods{Method::fre, Method::ple};
  int replicates = 200;
  std::uint64_t seed = 1;
  int threads = 0;
  EstimationOptions estimation;
  // Coverage of pointwise bootstrap intervals for Psi(t) at fixed times.
  std::vector<double> coverage_times;
  int bootstrap_replicates = 0;  // 0 disables coverage
  double alpha = 0.05;
  std::vector<Method> coverage_methods{Method::fre};
  DeviationQuantile coverage_quantile = DeviationQuantile::one_minus_half_alpha;
};

StudyConfig study_from_json(const std::string& text);
std::string study_to_json(const StudyConfig& config);

struct StudyRow {
  std::string protocol;
  int n = 0;
  std::string method;
  std::string estimand;
  std::string metric;
  double value = 0.0;
  int replicates = 0;  // replicates that contributed
};

struct StudyResult {
  std::vector<StudyRow> rows;

  // NaN when absent.
  double value(int n, Method method, const std::string& estimand, const std::string& metric) const;
  std::string long_csv() const;
  // One line per n, one column per estimand x metric x method.
  std::string pivot_table() const;
};

// Metrics per (n, estimand, method):
//   bias        mean |Psi_hat - Psi| against the protocol value
//   bias_latent mean |Psi_hat - Psi_emp| against each replicate's latent paths
//   mad_psi     MAD of Psi_hat(t) against the complete-data curve
//   mad_f       MAD of F_hat(t) against the complete-data entry distribution
//   error       mean signed Psi_hat - Psi
//   coverage@t  share of intervals covering the population Psi(t)
//   failures    replicates where estimation failed
StudyResult run_mc_study(const StudyConfig& config);

}  // namespace curstat
