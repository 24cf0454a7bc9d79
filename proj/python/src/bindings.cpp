#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "curstat/bootstrap.hpp"
#include "curstat/conditional.hpp"
#include "curstat/io.hpp"
#include "curstat/pseudo.hpp"
#include "curstat/rng.hpp"
#include "curstat/simulate.hpp"
#include "curstat/version.hpp"

namespace py = pybind11;
using namespace curstat;

namespace {

std::vector<CurrentStatusRecord> make_records(const std::vector<double>& times, const std::vector<int>& states,
                                              const MultistateTree& tree) {
  if (times.size() != states.size())
    throw ArgumentError("times and states differ in length (" + std::to_string(times.size()) + " vs " +
                        std::to_string(states.size()) + ")");
  std::vector<CurrentStatusRecord> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = {std::to_string(i), times[i], states[i], {}};
  validate_records(out, tree);
  return out;
}

EstimationOptions make_options(std::optional<double> bandwidth, int grid_points) {
  EstimationOptions o;
  o.bandwidth = bandwidth;
  o.grid_points = grid_points;
  return o;
}

py::dict curve_dict(const CurveEstimate& c) {
  py::dict d;
  d["grid"] = c.grid;
  d["values"] = c.values;
  d["scalar"] = c.scalar ? py::cast(*c.scalar) : py::none();
  if (c.has_bounds()) {
    d["lower"] = c.ci_lower;
    d["upper"] = c.ci_upper;
  }
  return d;
}

SimProtocol protocol_named(const std::string& name, const std::string& law) {
  const InspectionLaw l = law == "weibull" ? InspectionLaw::weibull : InspectionLaw::uniform;
  if (law != "uniform" && law != "weibull") throw ArgumentError("unknown inspection law '" + law + "'");
  if (name == "five") return SimProtocol::five_state(l);
  if (name == "seven") return SimProtocol::seven_state(l);
  throw ArgumentError("unknown protocol '" + name + "' (expected five or seven)");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conditional state-entry probabilities from multistate current status data";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<StructureError>(m, "StructureError", base.ptr());
  py::register_exception<EstimationError>(m, "EstimationError", base.ptr());

  py::class_<MultistateTree>(m, "Tree")
      .def(py::init<std::vector<State>, std::vector<Edge>, std::map<State, std::string>>(), py::arg("states"),
           py::arg("edges"), py::arg("names") = std::map<State, std::string>{})
      .def_static("five_state", &MultistateTree::five_state)
      .def_static("seven_state", &MultistateTree::seven_state)
      .def_static("from_json", &tree_from_json)
      .def("to_json", &tree_to_json)
      .def_property_readonly("num_states", &MultistateTree::num_states)
      .def_property_readonly("states", &MultistateTree::states)
      .def_property_readonly("edges", &MultistateTree::edges)
      .def_property_readonly("names", &MultistateTree::names)
      .def("children", &MultistateTree::children)
      .def("parent", &MultistateTree::parent)
      .def("path_to", &MultistateTree::path_to)
      .def("is_on_path", &MultistateTree::is_on_path)
      .def("descendant_set", &MultistateTree::descendant_set)
      .def("parse_state", [](const MultistateTree& t, const std::string& s) { return t.parse_state(s); })
      .def("__repr__", [](const MultistateTree& t) {
        return "<curstat.Tree with " + std::to_string(t.num_states()) + " states>";
      });

  m.def(
      "pav_fit",
      [](const std::vector<double>& times, const std::vector<double>& responses, const std::vector<double>& weights) {
        const auto f = pav_fit(times, responses, weights);
        return py::make_tuple(f.knots, f.values);
      },
      py::arg("times"), py::arg("responses"), py::arg("weights") = std::vector<double>{},
      "Isotonic least-squares fit; returns (knots, values) of the right-continuous step function.");

  m.def(
      "select_bandwidth", [](const std::vector<double>& times) { return select_bandwidth(times); },
      py::arg("times"));

  m.def(
      "estimate",
      [](const MultistateTree& tree, const std::vector<double>& times, const std::vector<int>& states, State j,
         State k, const std::string& method, const std::string& target, std::optional<double> bandwidth,
         int grid_points) {
        const auto recs = make_records(times, states, tree);
        ConditionalEstimator est(tree, recs, make_options(bandwidth, grid_points));
        auto d = curve_dict(est.target(j, k, parse_method(method), parse_target(target)));
        d["bandwidth"] = est.bandwidth();
        d["advisories"] = est.diagnostics().advisories;
        return d;
      },
      py::arg("tree"), py::arg("times"), py::arg("states"), py::arg("j"), py::arg("k"), py::arg("method") = "fre",
      py::arg("target") = "psi", py::arg("bandwidth") = py::none(), py::arg("grid_points") = 200);

  m.def(
      "occupation",
      [](const MultistateTree& tree, const std::vector<double>& times, const std::vector<int>& states,
         int grid_points) {
        const auto recs = make_records(times, states, tree);
        ConditionalEstimator est(tree, recs, make_options(std::nullopt, grid_points));
        const auto& occ = est.occupation();
        Eigen::MatrixXd p(static_cast<Eigen::Index>(occ.grid.size()), tree.num_states());
        for (std::size_t g = 0; g < occ.grid.size(); ++g) p.row(static_cast<Eigen::Index>(g)) = occ.probs[g].transpose();
        return py::make_tuple(occ.grid, p);
      },
      py::arg("tree"), py::arg("times"), py::arg("states"), py::arg("grid_points") = 200,
      "Returns (grid, probabilities) with one column per state.");

  m.def(
      "bootstrap_ci",
      [](const MultistateTree& tree, const std::vector<double>& times, const std::vector<int>& states, State j,
         State k, const std::string& method, const std::string& target, int replicates, double alpha,
         std::uint64_t seed, const std::string& quantile, int threads, int grid_points,
         const std::vector<double>& eval_times) {
        const auto recs = make_records(times, states, tree);
        BootstrapConfig cfg;
        cfg.replicates = replicates;
        cfg.alpha = alpha;
        cfg.seed = seed;
        cfg.threads = threads;
        cfg.quantile = parse_deviation_quantile(quantile);
        CurveEstimate c;
        {
          py::gil_scoped_release release;
          c = pointwise_ci(tree, recs, j, k, parse_method(method), parse_target(target), cfg,
                           make_options(std::nullopt, grid_points), nullptr, eval_times);
        }
        return curve_dict(c);
      },
      py::arg("tree"), py::arg("times"), py::arg("states"), py::arg("j"), py::arg("k"), py::arg("method") = "fre",
      py::arg("target") = "psi", py::arg("replicates") = 1000, py::arg("alpha") = 0.05, py::arg("seed") = 1,
      py::arg("quantile") = "1-alpha/2", py::arg("threads") = 0, py::arg("grid_points") = 200,
      py::arg("eval_times") = std::vector<double>{});

  m.def(
      "pseudo_values",
      [](const MultistateTree& tree, const std::vector<double>& times, const std::vector<int>& states, State j,
         State k, const std::string& method, const std::string& target, int points, int threads, int grid_points) {
        const auto recs = make_records(times, states, tree);
        auto tp = pseudo_time_points(times, points);
        PseudoValueMatrix pv;
        {
          py::gil_scoped_release release;
          pv = jackknife_pseudovalues(tree, recs, j, k, parse_method(method), parse_target(target), std::move(tp),
                                      make_options(std::nullopt, grid_points), threads);
        }
        return py::make_tuple(pv.time_points, pv.values);
      },
      py::arg("tree"), py::arg("times"), py::arg("states"), py::arg("j"), py::arg("k"), py::arg("method") = "fre",
      py::arg("target") = "psi", py::arg("points") = 10, py::arg("threads") = 0, py::arg("grid_points") = 200,
      "Returns (time_points, n x r matrix of jackknife pseudo-values).");

  m.def(
      "gee",
      [](const Eigen::MatrixXd& pseudo, const std::vector<double>& time_points, const Eigen::MatrixXd& covariates,
         const std::vector<std::string>& names, const std::string& link) {
        PseudoValueMatrix pv;
        pv.time_points = time_points;
        pv.values = pseudo;
        GeeOptions o;
        o.link = parse_link(link);
        const auto f = gee_fit(pv, covariates, names, o);
        py::dict d;
        d["names"] = f.names;
        d["coef"] = f.coefficients;
        d["se"] = f.std_errors;
        d["z"] = f.z;
        d["p"] = f.p_values;
        d["cov"] = f.covariance;
        d["wald_chi2"] = f.wald_chi2;
        d["wald_df"] = f.wald_df;
        d["wald_p"] = f.wald_p;
        d["converged"] = f.converged;
        d["warnings"] = f.warnings;
        return d;
      },
      py::arg("pseudo"), py::arg("time_points"), py::arg("covariates"), py::arg("names"),
      py::arg("link") = "identity");

  m.def(
      "simulate",
      [](const std::string& protocol, int n, std::uint64_t seed, const std::string& law) {
        SimProtocol p = protocol_named(protocol, law);
        p.n = n;
        auto rng = make_stream(seed, 0);
        const auto paths = generate_trajectories(p, rng);
        const auto recs = inspect(paths, p.inspection, rng);
        std::vector<double> t;
        std::vector<int> s;
        for (const auto& r : recs) {
          t.push_back(r.inspection_time);
          s.push_back(r.observed_state);
        }
        return py::make_tuple(t, s);
      },
      py::arg("protocol") = "five", py::arg("n") = 200, py::arg("seed") = 1, py::arg("law") = "uniform",
      "Simulated current status sample; returns (times, states).");

  m.def("true_psi", [](const std::string& protocol, State j, State k, double t) {
    return true_psi_at(protocol_named(protocol, "uniform"), j, k, t);
  });

  m.def(
      "run_study",
      [](const std::string& config_json, std::optional<int> replicates, int threads) {
        StudyConfig cfg = study_from_json(config_json);
        if (replicates) cfg.replicates = *replicates;
        cfg.threads = threads;
        StudyResult r;
        {
          py::gil_scoped_release release;
          r = run_mc_study(cfg);
        }
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict d;
          d["protocol"] = row.protocol;
          d["n"] = row.n;
          d["method"] = row.method;
          d["estimand"] = row.estimand;
          d["metric"] = row.metric;
          d["value"] = row.value;
          d["replicates"] = row.replicates;
          rows.append(d);
        }
        return rows;
      },
      py::arg("config_json"), py::arg("replicates") = py::none(), py::arg("threads") = 0);
}
