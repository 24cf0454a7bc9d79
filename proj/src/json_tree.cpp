#include "json_tree.hpp"

#include "curstat/errors.hpp"

namespace curstat::detail {

MultistateTree tree_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "five" || name == "five_state") return MultistateTree::five_state();
    if (name == "seven" || name == "seven_state") return MultistateTree::seven_state();
    throw ArgumentError("unknown built-in tree '" + name + "'");
  }
  if (!j.is_object() || !j.contains("states") || !j.contains("edges"))
    throw ArgumentError("tree JSON needs 'states' and 'edges'");
  std::vector<State> states = j.at("states").get<std::vector<State>>();
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw ArgumentError("each edge must be a pair [from, to]");
    edges.emplace_back(e[0].get<State>(), e[1].get<State>());
  }
  std::map<State, std::string> names;
  if (j.contains("names")) {
    const auto& nm = j.at("names");
    if (nm.is_object()) {
      for (auto it = nm.begin(); it != nm.end(); ++it) names[std::stoi(it.key())] = it.value().get<std::string>();
    } else if (nm.is_array()) {
      for (std::size_t i = 0; i < nm.size(); ++i) names[static_cast<State>(i)] = nm[i].get<std::string>();
    }
  }
  return MultistateTree(std::move(states), std::move(edges), std::move(names));
}

nlohmann::json tree_to_json(const MultistateTree& tree) {
  nlohmann::json j;
  j["states"] = tree.states();
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : tree.edges()) edges.push_back({a, b});
  j["edges"] = edges;
  nlohmann::json names = nlohmann::json::object();
  for (const auto& [s, name] : tree.names()) names[std::to_string(s)] = name;
  j["names"] = names;
  return j;
}

}  // namespace curstat::detail
