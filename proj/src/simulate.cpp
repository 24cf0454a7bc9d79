#include "curstat/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "curstat/bootstrap.hpp"
#include "curstat/parallel.hpp"
#include "curstat/rng.hpp"
#include "json_tree.hpp"

namespace curstat {

using nlohmann::json;

void SimProtocol::validate() const {
  if (n < 1) throw ArgumentError("protocol needs n >= 1");
  for (State s : tree.states()) {
    if (tree.is_leaf(s)) continue;
    const auto& kids = tree.children(s);
    auto it = branch.find(s);
    if (it == branch.end()) {
      if (kids.size() != 1)
        throw ArgumentError("state " + std::to_string(s) + " branches but has no branch probabilities");
    } else {
      double total = 0.0;
      for (const auto& [child, p] : it->second) {
        if (!tree.has_edge(s, child))
          throw StructureError("branch " + std::to_string(s) + "->" + std::to_string(child) + " is not an edge");
        if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("branch probabilities must lie in [0,1]");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw ArgumentError("branch probabilities out of state " + std::to_string(s) + " must sum to 1");
    }
    auto w = waiting.find(s);
    if (w == waiting.end()) throw ArgumentError("no waiting-time law for state " + std::to_string(s));
    if (!(w->second.sigma > 0.0)) throw ArgumentError("lognormal sigma must be positive");
  }
  if (inspection.law == InspectionLaw::weibull && !(inspection.shape > 0.0 && inspection.scale > 0.0))
    throw ArgumentError("Weibull shape and scale must be positive");
  if (inspection.law == InspectionLaw::uniform && inspection.bound == UniformBound::fixed &&
      !(inspection.upper > 0.0))
    throw ArgumentError("fixed uniform inspection bound must be positive");
}

double SimProtocol::true_psi(State j, State k) const {
  if (j == k) throw ArgumentError("estimand requires j != k");
  if (!tree.is_on_path(j, k)) return 0.0;
  const auto path = tree.path_to(k);
  double p = 1.0;
  auto start = std::find(path.begin(), path.end(), j) - path.begin();
  for (auto b = static_cast<std::size_t>(start); b + 1 < path.size(); ++b) {
    auto it = branch.find(path[b]);
    if (it == branch.end()) continue;  // single exit
    auto c = it->second.find(path[b + 1]);
    p *= c == it->second.end() ? 0.0 : c->second;
  }
  return p;
}

SimProtocol SimProtocol::five_state(InspectionLaw law) {
  SimProtocol p;
  p.name = "five_state";
  p.tree = MultistateTree::five_state();
  p.branch = {{0, {{1, 0.6}, {2, 0.4}}}, {1, {{3, 0.6}, {4, 0.4}}}};
  p.waiting = {{0, {0.0, 0.5}}, {1, {0.0, 0.5}}};
  p.inspection.law = law;
  p.inspection.shape = 3.0;
  p.inspection.scale = 2.5;
  return p;
}

SimProtocol SimProtocol::seven_state(InspectionLaw law) {
  SimProtocol p;
  p.name = "seven_state";
  p.tree = MultistateTree::seven_state();
  p.branch = {{0, {{1, 0.8}, {2, 0.2}}}, {1, {{3, 0.7}, {4, 0.3}}}, {3, {{5, 0.6}, {6, 0.4}}}};
  p.waiting = {{0, {0.0, 0.5}}, {1, {0.0, 0.5}}, {3, {0.0, 0.7}}};
  p.inspection.law = law;
  p.inspection.shape = 2.5;
  p.inspection.scale = 4.5;
  return p;
}

namespace {

InspectionLaw parse_law(const std::string& s) {
  if (s == "uniform") return InspectionLaw::uniform;
  if (s == "weibull") return InspectionLaw::weibull;
  throw ArgumentError("unknown inspection law '" + s + "' (expected uniform or weibull)");
}

UniformBound parse_bound(const std::string& s) {
  if (s == "total_sojourn") return UniformBound::total_sojourn;
  if (s == "max_waiting") return UniformBound::max_waiting;
  if (s == "fixed") return UniformBound::fixed;
  throw ArgumentError("unknown uniform bound '" + s + "'");
}

std::string bound_name(UniformBound b) {
  switch (b) {
    case UniformBound::total_sojourn: return "total_sojourn";
    case UniformBound::max_waiting: return "max_waiting";
    case UniformBound::fixed: return "fixed";
  }
  return "total_sojourn";
}

void apply_inspection(const json& j, InspectionSpec& spec) {
  if (j.is_string()) {
    spec.law = parse_law(j.get<std::string>());
    return;
  }
  if (j.contains("law")) spec.law = parse_law(j.at("law").get<std::string>());
  if (j.contains("bound")) spec.bound = parse_bound(j.at("bound").get<std::string>());
  if (j.contains("upper")) spec.upper = j.at("upper").get<double>();
  if (j.contains("shape")) spec.shape = j.at("shape").get<double>();
  if (j.contains("scale")) spec.scale = j.at("scale").get<double>();
}

SimProtocol protocol_from(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "five" || name == "five_state") return SimProtocol::five_state();
    if (name == "seven" || name == "seven_state") return SimProtocol::seven_state();
    throw ArgumentError("unknown built-in protocol '" + name + "' (expected five or seven)");
  }
  SimProtocol p;
  if (j.contains("base")) {
    p = protocol_from(j.at("base"));
    if (j.contains("inspection")) {
      // A law switch on a built-in also switches to that protocol's Weibull parameters.
      const auto& insp = j.at("inspection");
      const std::string law = insp.is_string() ? insp.get<std::string>() : insp.value("law", "");
      if (!law.empty())
        p = p.name == "seven_state" ? SimProtocol::seven_state(parse_law(law)) : SimProtocol::five_state(parse_law(law));
    }
  }
  if (j.contains("name")) p.name = j.at("name").get<std::string>();
  if (j.contains("tree")) p.tree = detail::tree_from_json(j.at("tree"));
  if (j.contains("branch")) {
    p.branch.clear();
    for (auto it = j.at("branch").begin(); it != j.at("branch").end(); ++it) {
      auto& row = p.branch[std::stoi(it.key())];
      for (auto c = it.value().begin(); c != it.value().end(); ++c) row[std::stoi(c.key())] = c.value().get<double>();
    }
  }
  if (j.contains("waiting")) {
    p.waiting.clear();
    for (auto it = j.at("waiting").begin(); it != j.at("waiting").end(); ++it)
      p.waiting[std::stoi(it.key())] = LogNormal{it.value().value("mu", 0.0), it.value().value("sigma", 0.5)};
  }
  if (j.contains("inspection")) apply_inspection(j.at("inspection"), p.inspection);
  if (j.contains("n")) p.n = j.at("n").get<int>();
  if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

json protocol_json(const SimProtocol& p) {
  json j;
  j["name"] = p.name;
  j["tree"] = detail::tree_to_json(p.tree);
  json branch = json::object();
  for (const auto& [s, row] : p.branch) {
    json r = json::object();
    for (const auto& [c, prob] : row) r[std::to_string(c)] = prob;
    branch[std::to_string(s)] = r;
  }
  j["branch"] = branch;
  json waiting = json::object();
  for (const auto& [s, w] : p.waiting) waiting[std::to_string(s)] = {{"mu", w.mu}, {"sigma", w.sigma}};
  j["waiting"] = waiting;
  j["inspection"] = {{"law", p.inspection.law == InspectionLaw::uniform ? "uniform" : "weibull"},
                     {"bound", bound_name(p.inspection.bound)},
                     {"upper", p.inspection.upper},
                     {"shape", p.inspection.shape},
                     {"scale", p.inspection.scale}};
  j["n"] = p.n;
  j["seed"] = p.seed;
  return j;
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

SimProtocol protocol_from_json(const std::string& text) {
  try {
    SimProtocol p = protocol_from(parse_text(text));
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed protocol: ") + e.what());
  }
}

std::string protocol_to_json(const SimProtocol& protocol) { return protocol_json(protocol).dump(2); }

State LatentTrajectory::state_at(double t) const {
  auto it = std::upper_bound(entry_times.begin(), entry_times.end(), t);
  if (it == entry_times.begin()) return path.front();
  return path[static_cast<std::size_t>(it - entry_times.begin()) - 1];
}

bool LatentTrajectory::reaches(State s) const { return std::find(path.begin(), path.end(), s) != path.end(); }

double LatentTrajectory::entry_time(State s) const {
  auto it = std::find(path.begin(), path.end(), s);
  if (it == path.end()) return std::numeric_limits<double>::infinity();
  return entry_times[static_cast<std::size_t>(it - path.begin())];
}

std::vector<LatentTrajectory> generate_trajectories(const SimProtocol& protocol, std::mt19937_64& rng) {
  protocol.validate();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LatentTrajectory> out(static_cast<std::size_t>(protocol.n));
  for (auto& traj : out) {
    State s = 0;
    double t = 0.0;
    traj.path.push_back(0);
    traj.entry_times.push_back(0.0);
    while (!protocol.tree.is_leaf(s)) {
      const auto& kids = protocol.tree.children(s);
      State next = kids.front();
      int chosen = 0;
      if (auto it = protocol.branch.find(s); it != protocol.branch.end()) {
        const double u = unif(rng);
        double acc = 0.0;
        for (std::size_t c = 0; c < kids.size(); ++c) {
          auto p = it->second.find(kids[c]);
          acc += p == it->second.end() ? 0.0 : p->second;
          next = kids[c];
          chosen = static_cast<int>(c);
          if (u < acc) break;
        }
      }
      const LogNormal& w = protocol.waiting.at(s);
      t += std::exp(w.mu + w.sigma * normal(rng));
      traj.branch_draws.push_back(chosen);
      traj.path.push_back(next);
      traj.entry_times.push_back(t);
      s = next;
    }
  }
  return out;
}

std::vector<CurrentStatusRecord> inspect(std::span<const LatentTrajectory> trajectories, const InspectionSpec& spec,
                                         std::mt19937_64& rng) {
  if (trajectories.empty()) throw ArgumentError("no trajectories to inspect");
  double upper = spec.upper;
  if (spec.law == InspectionLaw::uniform && spec.bound != UniformBound::fixed) {
    upper = 0.0;
    for (const auto& tr : trajectories) {
      if (spec.bound == UniformBound::total_sojourn) {
        upper = std::max(upper, tr.entry_times.back());
      } else {
        for (std::size_t i = 1; i < tr.entry_times.size(); ++i)
          upper = std::max(upper, tr.entry_times[i] - tr.entry_times[i - 1]);
      }
    }
  }
  std::vector<CurrentStatusRecord> out(trajectories.size());
  std::uniform_real_distribution<double> unif(0.0, upper);
  std::weibull_distribution<double> weib(spec.shape, spec.scale);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const double c = spec.law == InspectionLaw::uniform ? unif(rng) : weib(rng);
    out[i].id = std::to_string(i + 1);
    out[i].inspection_time = c;
    out[i].observed_state = trajectories[i].state_at(c);
  }
  return out;
}

std::vector<CurrentStatusRecord> mask_to_current_status(std::span<const EventHistory> histories,
                                                        const MultistateTree& tree, double horizon,
                                                        std::mt19937_64& rng) {
  if (!(horizon > 0.0)) throw ArgumentError("mask horizon must be positive");
  for (const auto& h : histories) {
    const std::string who = "subject '" + h.id + "': ";
    if (h.states.empty() || h.states.size() != h.entry_times.size())
      throw ArgumentError(who + "timeline needs one entry time per state");
    if (h.states.front() != 0 || h.entry_times.front() != 0.0)
      throw ArgumentError(who + "timeline must start in state 0 at time 0");
    for (std::size_t i = 1; i < h.states.size(); ++i) {
      if (!(h.entry_times[i] > h.entry_times[i - 1])) throw ArgumentError(who + "entry times must increase");
      if (!tree.has_edge(h.states[i - 1], h.states[i]))
        throw StructureError(who + "transition " + std::to_string(h.states[i - 1]) + "->" +
                             std::to_string(h.states[i]) + " is not in the tree");
    }
    if (!(h.censor_time >= h.entry_times.back()) && !std::isinf(h.censor_time))
      throw ArgumentError(who + "censoring precedes the last recorded transition");
  }
  std::uniform_real_distribution<double> unif(0.0, horizon);
  std::vector<CurrentStatusRecord> out(histories.size());
  for (std::size_t i = 0; i < histories.size(); ++i) {
    const auto& h = histories[i];
    const double c = unif(rng);
    const double seen_until = std::min(c, h.censor_time);
    auto it = std::upper_bound(h.entry_times.begin(), h.entry_times.end(), seen_until);
    out[i].id = h.id;
    out[i].inspection_time = c;
    out[i].observed_state = h.states[static_cast<std::size_t>(it - h.entry_times.begin()) - 1];
  }
  return out;
}

CurveEstimate EmpiricalBenchmark::psi_curve(std::span<const double> grid) const {
  CurveEstimate out;
  out.grid.assign(grid.begin(), grid.end());
  out.values.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) out.values[g] = psi(grid[g]);
  out.scalar = scalar;
  return out;
}

CurveEstimate EmpiricalBenchmark::entry_curve(std::span<const double> grid) const {
  CurveEstimate out;
  out.grid.assign(grid.begin(), grid.end());
  out.values.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) out.values[g] = entry_at(grid[g]);
  out.scalar = 1.0;
  return out;
}

EmpiricalBenchmark empirical_benchmark(std::span<const LatentTrajectory> trajectories, const MultistateTree& tree,
                                       State j, State k) {
  if (!tree.contains(j) || !tree.contains(k)) throw StructureError("unknown state in benchmark estimand");
  if (j == k) throw ArgumentError("estimand requires j != k");
  EmpiricalBenchmark out;
  std::size_t reached_j = 0;
  std::vector<double> entries;
  for (const auto& tr : trajectories) {
    if (!tr.reaches(j)) continue;
    ++reached_j;
    if (tr.reaches(k) && tree.is_on_path(j, k)) entries.push_back(tr.entry_time(k));
  }
  if (reached_j == 0) throw EstimationError("no subject ever reaches state " + std::to_string(j));
  std::sort(entries.begin(), entries.end());
  const double denom = static_cast<double>(reached_j);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!out.psi.knots.empty() && out.psi.knots.back() == entries[i]) {
      out.psi.values.back() = static_cast<double>(i + 1) / denom;
    } else {
      out.psi.knots.push_back(entries[i]);
      out.psi.values.push_back(static_cast<double>(i + 1) / denom);
    }
  }
  out.scalar = static_cast<double>(entries.size()) / denom;
  return out;
}

namespace {

double lognormal_cdf(const LogNormal& d, double x) {
  if (x <= 0.0) return 0.0;
  return 0.5 * std::erfc(-(std::log(x) - d.mu) / (d.sigma * std::numbers::sqrt2));
}

double lognormal_pdf(const LogNormal& d, double x) {
  if (x <= 0.0) return 0.0;
  const double z = (std::log(x) - d.mu) / d.sigma;
  return std::exp(-0.5 * z * z) / (x * d.sigma * std::sqrt(2.0 * std::numbers::pi));
}

// P(V_1 + ... + V_m <= t)
double sum_cdf(std::span<const LogNormal> laws, double t) {
  if (t <= 0.0) return 0.0;
  if (laws.size() == 1) return lognormal_cdf(laws[0], t);
  const auto rest = laws.subspan(1);
  auto f = [&](double v) { return lognormal_pdf(laws[0], v) * sum_cdf(rest, t - v); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, t, 10, 1e-10);
}

}  // namespace

double true_psi_at(const SimProtocol& protocol, State j, State k, double t) {
  const double total = protocol.true_psi(j, k);
  if (total == 0.0) return 0.0;
  const auto path = protocol.tree.path_to(k);
  std::vector<LogNormal> laws;
  for (std::size_t b = 0; b + 1 < path.size(); ++b) laws.push_back(protocol.waiting.at(path[b]));
  return total * std::clamp(sum_cdf(laws, t), 0.0, 1.0);
}

double mad(const CurveEstimate& estimate, const CurveEstimate& benchmark, std::span<const double> times) {
  if (times.empty()) throw ArgumentError("MAD needs at least one inspection time");
  double sum = 0.0;
  for (double c : times) sum += std::abs(benchmark.at(c) - estimate.at(c));
  return sum / static_cast<double>(times.size());
}

double mad(const CurveEstimate& estimate, const StepFunction& benchmark, std::span<const double> times,
           double benchmark_scale) {
  if (times.empty()) throw ArgumentError("MAD needs at least one inspection time");
  if (!(benchmark_scale > 0.0)) throw ArgumentError("benchmark scale must be positive");
  double sum = 0.0;
  for (double c : times) sum += std::abs(benchmark(c) / benchmark_scale - estimate.at(c));
  return sum / static_cast<double>(times.size());
}

std::string Estimand::label() const { return "psi_" + std::to_string(k) + "|" + std::to_string(j); }

namespace {

Estimand parse_estimand(const json& e) {
  if (e.is_array() && e.size() == 2) return Estimand{e[0].get<State>(), e[1].get<State>()};
  if (e.is_object()) return Estimand{e.at("from").get<State>(), e.at("to").get<State>()};
  if (e.is_string()) {
    // "3|1" means Psi_{3|1}
    const auto s = e.get<std::string>();
    const auto bar = s.find('|');
    if (bar == std::string::npos) throw ArgumentError("estimand '" + s + "' should look like 'k|j'");
    return Estimand{std::stoi(s.substr(bar + 1)), std::stoi(s.substr(0, bar))};
  }
  throw ArgumentError("malformed estimand in study config");
}

std::string format_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

}  // namespace

StudyConfig study_from_json(const std::string& text) {
  const json j = parse_text(text);
  try {
    StudyConfig cfg;
    if (j.contains("protocol")) {
      json pj = j.at("protocol");
      if (pj.is_string() && j.contains("inspection")) pj = json{{"base", pj}, {"inspection", j.at("inspection")}};
      cfg.protocol = protocol_from(pj);
    } else {
      cfg.protocol = SimProtocol::five_state();
    }
    if (j.contains("sizes")) cfg.sizes = j.at("sizes").get<std::vector<int>>();
    if (j.contains("estimands")) {
      cfg.estimands.clear();
      for (const auto& e : j.at("estimands")) cfg.estimands.push_back(parse_estimand(e));
    }
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("grid_points")) cfg.estimation.grid_points = j.at("grid_points").get<int>();
    if (j.contains("bandwidth")) cfg.estimation.bandwidth = j.at("bandwidth").get<double>();
    if (j.contains("coverage")) {
      const auto& c = j.at("coverage");
      cfg.coverage_times = c.at("times").get<std::vector<double>>();
      cfg.bootstrap_replicates = c.value("bootstrap", 200);
      cfg.alpha = c.value("alpha", 0.05);
      if (c.contains("quantile")) cfg.coverage_quantile = parse_deviation_quantile(c.at("quantile").get<std::string>());
      if (c.contains("methods")) {
        cfg.coverage_methods.clear();
        for (const auto& m : c.at("methods")) cfg.coverage_methods.push_back(parse_method(m.get<std::string>()));
      }
    }
    cfg.protocol.validate();
    if (cfg.replicates < 1) throw ArgumentError("study needs at least one replicate");
    if (cfg.sizes.empty()) throw ArgumentError("study needs at least one sample size");
    for (int n : cfg.sizes)
      if (n < 2) throw ArgumentError("sample sizes must be at least 2");
    for (const auto& e : cfg.estimands) {
      if (!cfg.protocol.tree.contains(e.j) || !cfg.protocol.tree.contains(e.k))
        throw StructureError("estimand " + e.label() + " uses a state outside the tree");
      if (e.j == e.k) throw ArgumentError("estimand requires j != k");
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed study config: ") + e.what());
  }
}

std::string study_to_json(const StudyConfig& cfg) {
  json j;
  j["protocol"] = protocol_json(cfg.protocol);
  j["sizes"] = cfg.sizes;
  json est = json::array();
  for (const auto& e : cfg.estimands) est.push_back({e.j, e.k});
  j["estimands"] = est;
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["replicates"] = cfg.replicates;
  j["seed"] = cfg.seed;
  j["grid_points"] = cfg.estimation.grid_points;
  if (cfg.estimation.bandwidth) j["bandwidth"] = *cfg.estimation.bandwidth;
  if (cfg.bootstrap_replicates > 0) {
    json cm = json::array();
    for (Method m : cfg.coverage_methods) cm.push_back(to_string(m));
    j["coverage"] = {{"times", cfg.coverage_times},
                     {"bootstrap", cfg.bootstrap_replicates},
                     {"alpha", cfg.alpha},
                     {"quantile", to_string(cfg.coverage_quantile)},
                     {"methods", cm}};
  }
  return j.dump(2);
}

double StudyResult::value(int n, Method method, const std::string& estimand, const std::string& metric) const {
  const std::string m = to_string(method);
  for (const auto& r : rows)
    if (r.n == n && r.method == m && r.estimand == estimand && r.metric == metric) return r.value;
  return std::numeric_limits<double>::quiet_NaN();
}

std::string StudyResult::long_csv() const {
  std::ostringstream os;
  os << "protocol,n,method,estimand,metric,value,replicates\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    os << r.protocol << ',' << r.n << ',' << r.method << ',' << r.estimand << ',' << r.metric << ',' << buf << ','
       << r.replicates << '\n';
  }
  return os.str();
}

std::string StudyResult::pivot_table() const {
  // columns in first-seen order
  std::vector<std::string> columns;
  std::set<std::string> seen;
  std::vector<int> sizes;
  for (const auto& r : rows) {
    if (r.metric == "failures") continue;
    const std::string col = r.estimand + ":" + r.metric + ":" + r.method;
    if (seen.insert(col).second) columns.push_back(col);
    if (std::find(sizes.begin(), sizes.end(), r.n) == sizes.end()) sizes.push_back(r.n);
  }
  std::ostringstream os;
  os << "n";
  for (const auto& c : columns) os << '\t' << c;
  os << '\n';
  char buf[32];
  for (int n : sizes) {
    os << n;
    for (const auto& c : columns) {
      double v = std::numeric_limits<double>::quiet_NaN();
      for (const auto& r : rows)
        if (r.n == n && r.estimand + ":" + r.metric + ":" + r.method == c) v = r.value;
      std::snprintf(buf, sizeof buf, "%.6g", v);
      os << '\t' << buf;
    }
    os << '\n';
  }
  return os.str();
}

StudyResult run_mc_study(const StudyConfig& config) {
  config.protocol.validate();
  if (config.replicates < 1) throw ArgumentError("study needs at least one replicate");

  const std::vector<std::string> base_metrics{"bias", "bias_latent", "mad_psi", "mad_f", "error"};
  std::vector<std::string> cov_metrics;
  for (double t : config.coverage_times) cov_metrics.push_back("coverage@" + format_time(t));
  const bool coverage = config.bootstrap_replicates > 0 && !config.coverage_times.empty();

  // Population curve at the coverage times, per estimand.
  std::vector<std::vector<double>> truth(config.estimands.size());
  if (coverage)
    for (std::size_t e = 0; e < config.estimands.size(); ++e)
      for (double t : config.coverage_times)
        truth[e].push_back(true_psi_at(config.protocol, config.estimands[e].j, config.estimands[e].k, t));

  const std::size_t ne = config.estimands.size();
  const std::size_t nm = config.methods.size();
  const std::size_t ncm = config.coverage_methods.size();
  const std::size_t slots = ne * nm * base_metrics.size() + (coverage ? ne * ncm * cov_metrics.size() : 0);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  StudyResult result;
  for (std::size_t a = 0; a < config.sizes.size(); ++a) {
    const int n = config.sizes[a];
    const auto reps = static_cast<std::size_t>(config.replicates);
    std::vector<std::vector<double>> values(reps, std::vector<double>(slots, nan));

    parallel_for(reps, config.threads, [&](std::size_t r) {
      auto rng = make_stream(config.seed, (static_cast<std::uint64_t>(a) << 32) | r);
      SimProtocol protocol = config.protocol;
      protocol.n = n;
      const auto traj = generate_trajectories(protocol, rng);
      const auto records = inspect(traj, protocol.inspection, rng);
      const std::uint64_t boot_seed = child_seed(rng);
      const std::vector<double> times = inspection_times(records);
      auto& slot = values[r];

      std::optional<ConditionalEstimator> est;
      try {
        est.emplace(protocol.tree, records, config.estimation);
      } catch (const EstimationError&) {
        return;  // every slot stays NaN and counts as a failure
      }
      for (std::size_t e = 0; e < ne; ++e) {
        const auto& target = config.estimands[e];
        std::optional<EmpiricalBenchmark> bench;
        try {
          bench = empirical_benchmark(traj, protocol.tree, target.j, target.k);
        } catch (const EstimationError&) {
        }
        const double truth_scalar = protocol.true_psi(target.j, target.k);
        for (std::size_t m = 0; m < nm; ++m) {
          double* out = &slot[(e * nm + m) * base_metrics.size()];
          try {
            const CurveEstimate psi = est->psi(target.j, target.k, config.methods[m]);
            out[0] = std::abs(*psi.scalar - truth_scalar);
            out[4] = *psi.scalar - truth_scalar;
            if (bench) {
              out[1] = std::abs(*psi.scalar - bench->scalar);
              out[2] = mad(psi, bench->psi, times);
              if (bench->scalar > 0.0) {
                const CurveEstimate f = entry_distribution(psi, *psi.scalar);
                out[3] = mad(f, bench->psi, times, bench->scalar);
              }
            }
          } catch (const EstimationError&) {
          }
        }
        if (!coverage) continue;
        for (std::size_t m = 0; m < ncm; ++m) {
          double* out = &slot[ne * nm * base_metrics.size() + (e * ncm + m) * cov_metrics.size()];
          BootstrapConfig bc;
          bc.replicates = config.bootstrap_replicates;
          bc.alpha = config.alpha;
          bc.seed = boot_seed;
          bc.threads = 1;
          bc.quantile = config.coverage_quantile;
          try {
            const CurveEstimate ci = pointwise_ci(protocol.tree, records, target.j, target.k,
                                                  config.coverage_methods[m], Target::psi, bc, config.estimation,
                                                  nullptr, config.coverage_times);
            for (std::size_t t = 0; t < cov_metrics.size(); ++t)
              out[t] = (ci.ci_lower[t] <= truth[e][t] && truth[e][t] <= ci.ci_upper[t]) ? 1.0 : 0.0;
          } catch (const EstimationError&) {
          }
        }
      }
    });

    auto reduce = [&](std::size_t index, const std::string& method, const std::string& estimand,
                      const std::string& metric) {
      double sum = 0.0;
      int count = 0;
      for (const auto& v : values)
        if (!std::isnan(v[index])) {
          sum += v[index];
          ++count;
        }
      result.rows.push_back({config.protocol.name, n, method, estimand, metric, count ? sum / count : nan, count});
    };
    for (std::size_t e = 0; e < ne; ++e) {
      const std::string label = config.estimands[e].label();
      for (std::size_t m = 0; m < nm; ++m) {
        const std::size_t base = (e * nm + m) * base_metrics.size();
        for (std::size_t k = 0; k < base_metrics.size(); ++k)
          reduce(base + k, to_string(config.methods[m]), label, base_metrics[k]);
        int failures = 0;
        for (const auto& v : values)
          if (std::isnan(v[base])) ++failures;
        result.rows.push_back({config.protocol.name, n, to_string(config.methods[m]), label, "failures",
                               static_cast<double>(failures), config.replicates});
      }
      if (!coverage) continue;
      for (std::size_t m = 0; m < ncm; ++m) {
        const std::size_t base = ne * nm * base_metrics.size() + (e * ncm + m) * cov_metrics.size();
        for (std::size_t t = 0; t < cov_metrics.size(); ++t)
          reduce(base + t, to_string(config.coverage_methods[m]), label, cov_metrics[t]);
      }
    }
  }
  return result;
}

}  // namespace curstat
