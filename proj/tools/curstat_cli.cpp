// curstat command-line front end.
//
// Exit codes: 0 success, 2 invalid input, 3 estimation failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "curstat/bootstrap.hpp"
#include "curstat/conditional.hpp"
#include "curstat/io.hpp"
#include "curstat/pseudo.hpp"
#include "curstat/rng.hpp"
#include "curstat/simulate.hpp"
#include "curstat/version.hpp"

using json = nlohmann::ordered_json;
using namespace curstat;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240601;

struct EstimateArgs {
  std::string tree = "five";
  std::string data;
  std::string from = "1";
  std::string to = "3";
  std::string method = "fre";
  std::string target = "psi";
  std::string initial = "root";
  double bandwidth = 0.0;
  int grid_points = 200;
  std::string out;
};

void add_estimate_options(CLI::App* cmd, EstimateArgs& a) {
  cmd->add_option("--tree", a.tree, "tree JSON file, or five / seven")->capture_default_str();
  cmd->add_option("--data", a.data, "current status CSV (id,time,state)")->required();
  cmd->add_option("--from", a.from, "conditioning state j")->capture_default_str();
  cmd->add_option("--to", a.to, "target state k")->capture_default_str();
  cmd->add_option("--method", a.method, "fre or ple")->capture_default_str();
  cmd->add_option("--bandwidth", a.bandwidth, "kernel bandwidth (default: plug-in)");
  cmd->add_option("--grid-points", a.grid_points, "grid size, <= 0 for the unique inspection times")
      ->capture_default_str();
  cmd->add_option("--initial", a.initial, "root or estimated (PLE initial distribution)")->capture_default_str();
  cmd->add_option("--out", a.out, "output prefix; writes <prefix>.json and <prefix>.csv");
}

EstimationOptions estimation_options(const EstimateArgs& a) {
  EstimationOptions o;
  if (a.bandwidth > 0.0) o.bandwidth = a.bandwidth;
  o.grid_points = a.grid_points;
  if (a.initial == "estimated") {
    o.initial = InitialDistribution::estimated;
  } else if (a.initial != "root") {
    throw ArgumentError("--initial must be root or estimated");
  }
  return o;
}

json diagnostics_json(const Diagnostics& d) {
  return {{"clipped_values", d.clipped_values},         {"capped_increments", d.capped_increments},
          {"guarded_increments", d.guarded_increments}, {"flagged_grid_points", d.flagged_grid_points},
          {"kernel_fallbacks", d.kernel_fallbacks},     {"advisories", d.advisories}};
}

json base_metadata(const std::vector<std::string>& argv) {
  return {{"version", kVersion}, {"argv", argv}};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << text;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_estimate(const EstimateArgs& a, const std::vector<std::string>& argv) {
  const MultistateTree tree = read_tree(a.tree);
  const Dataset data = read_records_csv(a.data, tree);
  const State j = tree.parse_state(a.from);
  const State k = tree.parse_state(a.to);
  const Method method = parse_method(a.method);

  ConditionalEstimator est(tree, data.records, estimation_options(a));
  const CurveEstimate psi = est.psi(j, k, method);
  std::optional<CurveEstimate> f;
  Diagnostics diag = est.diagnostics();
  if (*psi.scalar > 1e-12) {
    f = entry_distribution(psi, *psi.scalar);
  } else {
    diag.advisories.push_back("F(t) undefined: the estimated Psi is 0");
  }

  json meta = base_metadata(argv);
  meta["tree"] = json::parse(tree_to_json(tree));
  meta["estimand"] = {{"from", j}, {"to", k}};
  meta["method"] = to_string(method);
  meta["bandwidth"] = est.bandwidth();
  meta["grid_points"] = est.grid().size();
  meta["horizon"] = est.horizon();
  meta["subjects"] = data.records.size();
  meta["diagnostics"] = diagnostics_json(diag);

  json out;
  out["grid"] = psi.grid;
  out["psi_t"] = psi.values;
  out["psi"] = *psi.scalar;
  out["f_t"] = f ? json(f->values) : json(nullptr);
  out["metadata"] = meta;

  std::ostringstream csv;
  csv << "t,psi,f\n";
  for (std::size_t g = 0; g < psi.grid.size(); ++g)
    csv << fmt(psi.grid[g]) << ',' << fmt(psi.values[g]) << ',' << (f ? fmt(f->values[g]) : "NA") << '\n';

  if (a.out.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    write_file(a.out + ".json", out.dump(2) + "\n");
    write_file(a.out + ".csv", csv.str());
    std::cerr << "psi_" << k << "|" << j << " = " << *psi.scalar << " (h = " << est.bandwidth() << ")\n";
  }
  for (const auto& adv : diag.advisories) std::cerr << "advisory: " << adv << '\n';
  return 0;
}

int cmd_bootstrap(const EstimateArgs& a, const BootstrapConfig& cfg, const std::string& quantile,
                  const std::vector<std::string>& argv) {
  const MultistateTree tree = read_tree(a.tree);
  const Dataset data = read_records_csv(a.data, tree);
  const State j = tree.parse_state(a.from);
  const State k = tree.parse_state(a.to);
  const Method method = parse_method(a.method);
  const Target target = parse_target(a.target);
  BootstrapConfig config = cfg;
  config.quantile = parse_deviation_quantile(quantile);

  Diagnostics diag;
  const EstimationOptions opts = estimation_options(a);
  const CurveEstimate ci = pointwise_ci(tree, data.records, j, k, method, target, config, opts, &diag);

  json meta = base_metadata(argv);
  meta["estimand"] = {{"from", j}, {"to", k}, {"target", to_string(target)}};
  meta["method"] = to_string(method);
  meta["bootstrap"] = {{"B", config.replicates},
                       {"alpha", config.alpha},
                       {"seed", config.seed},
                       {"quantile", to_string(config.quantile)}};
  meta["horizon"] = ci.horizon();
  meta["diagnostics"] = diagnostics_json(diag);

  std::ostringstream csv;
  csv << "t," << to_string(target) << ",ci_lower,ci_upper\n";
  for (std::size_t g = 0; g < ci.grid.size(); ++g)
    csv << fmt(ci.grid[g]) << ',' << fmt(ci.values[g]) << ',' << fmt(ci.ci_lower[g]) << ','
        << fmt(ci.ci_upper[g]) << '\n';
  json out{{"grid", ci.grid},
           {"estimate", ci.values},
           {"ci_lower", ci.ci_lower},
           {"ci_upper", ci.ci_upper},
           {"metadata", meta}};
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    write_file(a.out + ".json", out.dump(2) + "\n");
    write_file(a.out + ".csv", csv.str());
  }
  for (const auto& adv : diag.advisories) std::cerr << "advisory: " << adv << '\n';
  return 0;
}

int cmd_pseudo(const EstimateArgs& a, const std::string& covariates, const std::string& link, int points,
               int threads) {
  const MultistateTree tree = read_tree(a.tree);
  const auto names = split_list(covariates);
  const Dataset data = read_records_csv(a.data, tree, names);
  const State j = tree.parse_state(a.from);
  const State k = tree.parse_state(a.to);

  const auto tp = pseudo_time_points(inspection_times(data.records), points);
  const PseudoValueMatrix pv = jackknife_pseudovalues(tree, data.records, j, k, parse_method(a.method),
                                                      parse_target(a.target), tp, estimation_options(a), threads);
  Eigen::MatrixXd z(static_cast<Eigen::Index>(data.records.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < data.records.size(); ++i)
    for (std::size_t c = 0; c < names.size(); ++c)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = data.records[i].covariates[c];
  GeeOptions go;
  go.link = parse_link(link);
  const GeeFit fit = gee_fit(pv, z, names, go);

  std::ostringstream table;
  table << "term,estimate,robust_se,z,p\n";
  for (Eigen::Index c = 0; c < fit.coefficients.size(); ++c)
    table << fit.names[static_cast<std::size_t>(c)] << ',' << fmt(fit.coefficients(c)) << ','
          << fmt(fit.std_errors(c)) << ',' << fmt(fit.z(c)) << ',' << fmt(fit.p_values(c)) << '\n';
  if (fit.wald_df > 0)
    table << "# joint Wald chi2 = " << fmt(fit.wald_chi2) << " on " << fit.wald_df << " df, p = " << fmt(fit.wald_p)
          << '\n';
  table << "# link " << to_string(fit.link) << ", iterations " << fit.iterations
        << (fit.converged ? "" : " (not converged)") << ", dispersion " << fmt(fit.dispersion) << '\n';
  if (a.out.empty()) {
    std::cout << table.str();
  } else {
    write_file(a.out, table.str());
  }
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int cmd_simulate(const std::string& protocol, int n, const std::string& inspection, std::uint64_t seed,
                 const std::string& out) {
  SimProtocol p;
  if (protocol == "five" || protocol == "seven") {
    p = protocol == "five" ? SimProtocol::five_state() : SimProtocol::seven_state();
  } else {
    p = protocol_from_json(read_text_file(protocol));
  }
  if (!inspection.empty()) {
    const InspectionLaw law = inspection == "weibull" ? InspectionLaw::weibull
                              : inspection == "uniform" ? InspectionLaw::uniform
                                                        : throw ArgumentError("--inspection must be uniform or weibull");
    if (protocol == "five") p = SimProtocol::five_state(law);
    else if (protocol == "seven") p = SimProtocol::seven_state(law);
    else p.inspection.law = law;
  }
  if (n > 0) p.n = n;
  p.seed = seed;
  auto rng = make_stream(seed, 0);
  const auto traj = generate_trajectories(p, rng);
  Dataset data;
  data.records = inspect(traj, p.inspection, rng);
  if (out.empty()) {
    write_records_csv(std::cout, data);
  } else {
    std::ofstream f(out);
    if (!f) throw ArgumentError("cannot write '" + out + "'");
    write_records_csv(f, data);
  }
  return 0;
}

int cmd_mc_study(const std::string& config_path, int threads, int replicates, long long seed, const std::string& out,
                 const std::string& table_path, const std::vector<std::string>& argv) {
  StudyConfig cfg = study_from_json(read_text_file(config_path));
  if (threads > 0) cfg.threads = threads;
  if (replicates > 0) cfg.replicates = replicates;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  const StudyResult result = run_mc_study(cfg);
  const std::string table = result.pivot_table();
  if (out.empty()) {
    std::cout << result.long_csv();
  } else {
    write_file(out, result.long_csv());
    json meta = base_metadata(argv);
    meta["config"] = json::parse(study_to_json(cfg));
    write_file(out + ".meta.json", meta.dump(2) + "\n");
  }
  if (!table_path.empty()) write_file(table_path, table);
  std::cerr << table;
  return 0;
}

int cmd_mask(const std::string& tree_path, const std::string& histories, double horizon, std::uint64_t seed,
             const std::string& out) {
  const MultistateTree tree = read_tree(tree_path);
  const auto h = read_event_histories(histories, tree);
  auto rng = make_stream(seed, 0);
  Dataset data;
  data.records = mask_to_current_status(h, tree, horizon, rng);
  if (out.empty()) {
    write_records_csv(std::cout, data);
  } else {
    std::ofstream f(out);
    if (!f) throw ArgumentError("cannot write '" + out + "'");
    write_records_csv(f, data);
  }
  return 0;
}

void report(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Conditional state occupation and entry-time estimation for multistate current status data"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: CURSTAT_THREADS or all cores)");

  EstimateArgs est_args;
  auto* estimate = app.add_subcommand("estimate", "estimate Psi_{k|j}(t) and F_{k|j}(t)");
  add_estimate_options(estimate, est_args);

  EstimateArgs boot_args;
  BootstrapConfig boot_cfg;
  boot_cfg.seed = kDefaultSeed;
  std::string quantile = "1-alpha/2";
  auto* boot = app.add_subcommand("bootstrap-ci", "smoothed-bootstrap pointwise confidence intervals");
  add_estimate_options(boot, boot_args);
  boot->add_option("--target", boot_args.target, "psi or f")->capture_default_str();
  boot->add_option("--B", boot_cfg.replicates, "bootstrap replicates")->capture_default_str();
  boot->add_option("--alpha", boot_cfg.alpha, "significance level")->capture_default_str();
  boot->add_option("--seed", boot_cfg.seed, "random seed")->capture_default_str();
  boot->add_option("--quantile", quantile, "deviation quantile: 1-alpha or 1-alpha/2")->capture_default_str();
  boot->add_option("--threads", threads, "worker threads");

  EstimateArgs ps_args;
  std::string covariates, link = "identity";
  int points = 10;
  auto* pseudo = app.add_subcommand("pseudo-reg", "pseudo-value regression of covariate effects");
  add_estimate_options(pseudo, ps_args);
  pseudo->add_option("--target", ps_args.target, "psi or f")->capture_default_str();
  pseudo->add_option("--covariates", covariates, "comma-separated covariate columns");
  pseudo->add_option("--link", link, "identity, cloglog or logit")->capture_default_str();
  pseudo->add_option("--points", points, "number of pseudo-value time points")->capture_default_str();
  pseudo->add_option("--threads", threads, "worker threads");

  std::string protocol = "five", inspection, sim_out;
  int sim_n = 0;
  std::uint64_t sim_seed = kDefaultSeed;
  auto* simulate = app.add_subcommand("simulate", "simulate current status data");
  simulate->add_option("--protocol", protocol, "five, seven or a protocol JSON file")->capture_default_str();
  simulate->add_option("--n", sim_n, "sample size");
  simulate->add_option("--inspection", inspection, "uniform or weibull");
  simulate->add_option("--seed", sim_seed, "random seed")->capture_default_str();
  simulate->add_option("--out", sim_out, "output CSV (default stdout)");

  std::string study_config, study_out, study_table;
  int study_reps = 0;
  long long study_seed = -1;
  auto* mc = app.add_subcommand("mc-study", "Monte Carlo study of bias, MAD and coverage");
  mc->add_option("--config", study_config, "study JSON")->required();
  mc->add_option("--out", study_out, "long-form results CSV (default stdout)");
  mc->add_option("--table", study_table, "write the pivoted table here");
  mc->add_option("--replicates", study_reps, "override the replicate count");
  mc->add_option("--seed", study_seed, "override the seed");
  mc->add_option("--threads", threads, "worker threads");

  std::string mask_tree = "five", mask_hist, mask_out;
  double horizon = 0.0;
  std::uint64_t mask_seed = kDefaultSeed;
  auto* mask = app.add_subcommand("mask", "turn right-censored histories into current status data");
  mask->add_option("--tree", mask_tree, "tree JSON file, or five / seven")->capture_default_str();
  mask->add_option("--histories", mask_hist, "CSV id,time,state with 'cens' rows")->required();
  mask->add_option("--horizon", horizon, "inspection times are uniform on [0, horizon]")->required();
  mask->add_option("--seed", mask_seed, "random seed")->capture_default_str();
  mask->add_option("--out", mask_out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*estimate) return cmd_estimate(est_args, args);
    if (*boot) {
      boot_cfg.threads = threads;
      return cmd_bootstrap(boot_args, boot_cfg, quantile, args);
    }
    if (*pseudo) return cmd_pseudo(ps_args, covariates, link, points, threads);
    if (*simulate) return cmd_simulate(protocol, sim_n, inspection, sim_seed, sim_out);
    if (*mc) return cmd_mc_study(study_config, threads, study_reps, study_seed, study_out, study_table, args);
    if (*mask) return cmd_mask(mask_tree, mask_hist, horizon, mask_seed, mask_out);
  } catch (const EstimationError& e) {
    report("estimation", e.what());
    return 3;
  } catch (const Error& e) {
    report("validation", e.what());
    return 2;
  } catch (const std::exception& e) {
    report("internal", e.what());
    return 1;
  }
  return 0;
}
