// Type-I error of the joint Wald test when the covariate is pure noise.
#include <cstdio>
#include <random>

#include <Eigen/Core>

#include "curstat/pseudo.hpp"
#include "curstat/rng.hpp"
#include "curstat/simulate.hpp"

using namespace curstat;

int main() {
  const int reps = 500;
  const int n = 500;
  const double alpha = 0.05;
  SimProtocol protocol = SimProtocol::five_state();
  protocol.n = n;
  EstimationOptions opt;
  opt.grid_points = 100;

  int rejected = 0, used = 0;
  for (int r = 0; r < reps; ++r) {
    auto rng = make_stream(8080, static_cast<std::uint64_t>(r));
    const auto traj = generate_trajectories(protocol, rng);
    const auto records = inspect(traj, protocol.inspection, rng);
    Eigen::MatrixXd z(n, 1);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < n; ++i) z(i, 0) = coin(rng) ? 1.0 : 0.0;
    try {
      const auto tp = pseudo_time_points(inspection_times(records), 10);
      const auto pv = jackknife_pseudovalues(protocol.tree, records, 1, 3, Method::fre, Target::psi, tp, opt, 0);
      const auto fit = gee_fit(pv, z, {"z"});
      ++used;
      rejected += fit.wald_p < alpha;
    } catch (const Error& e) {
      std::printf("replicate %d skipped: %s\n", r, e.what());
    }
  }
  const double rate = static_cast<double>(rejected) / used;
  const bool pass = rate >= 0.03 && rate <= 0.08 && used >= reps * 0.95;
  std::printf("%s null rejection rate %.4f over %d replicates (accept [0.03, 0.08])\n", pass ? "PASS" : "FAIL", rate,
              used);
  return pass ? 0 : 1;
}
