#include "curstat/tree.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "curstat/errors.hpp"

namespace curstat {

bool PooledState::contains(State s) const {
  return std::binary_search(members.begin(), members.end(), s);
}

MultistateTree::MultistateTree(std::vector<State> states, std::vector<Edge> edges,
                               std::map<State, std::string> names)
    : edges_(std::move(edges)), names_(std::move(names)) {
  if (states.empty()) throw StructureError("tree has no states");
  std::sort(states.begin(), states.end());
  if (std::adjacent_find(states.begin(), states.end()) != states.end())
    throw StructureError("duplicate state label in tree definition");
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] != static_cast<State>(i))
      throw StructureError("state labels must be the contiguous integers 0..Q with root 0");
  }
  const int count = static_cast<int>(states.size());
  parent_.assign(count, -1);
  children_.assign(count, {});

  std::set<Edge> seen;
  for (const auto& [from, to] : edges_) {
    if (from < 0 || from >= count || to < 0 || to >= count)
      throw StructureError("edge (" + std::to_string(from) + "," + std::to_string(to) +
                           ") references an unknown state");
    if (from == to) throw StructureError("self-loop on state " + std::to_string(from));
    if (to == 0) throw StructureError("the root state 0 cannot have a parent");
    if (!seen.insert({from, to}).second)
      throw StructureError("duplicate edge (" + std::to_string(from) + "," + std::to_string(to) + ")");
    if (parent_[to] != -1)
      throw StructureError("state " + std::to_string(to) + " has more than one parent");
    parent_[to] = from;
    children_[from].push_back(to);
  }
  for (auto& c : children_) std::sort(c.begin(), c.end());

  // Every state must reach the root through parents without revisiting a node.
  depth_.assign(count, -1);
  depth_[0] = 0;
  for (State s = 1; s < count; ++s) {
    if (parent_[s] == -1)
      throw StructureError("state " + std::to_string(s) + " is not reachable from the root");
    int steps = 0;
    State cur = s;
    while (cur != 0) {
      cur = parent_[cur];
      if (++steps > count) throw StructureError("cycle detected through state " + std::to_string(s));
    }
    depth_[s] = steps;
  }
  for (const auto& [label, text] : names_) {
    if (label < 0 || label >= count)
      throw StructureError("name given for unknown state " + std::to_string(label));
    (void)text;
  }
}

MultistateTree MultistateTree::five_state() {
  return MultistateTree({0, 1, 2, 3, 4}, {{0, 1}, {0, 2}, {1, 3}, {1, 4}},
                        {{0, "disease-free"},
                         {1, "ill"},
                         {2, "death without illness"},
                         {3, "death due to illness"},
                         {4, "death from other causes"}});
}

MultistateTree MultistateTree::seven_state() {
  return MultistateTree({0, 1, 2, 3, 4, 5, 6}, {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {3, 5}, {3, 6}},
                        {{0, "healthy"},
                         {1, "mild"},
                         {2, "death without disease"},
                         {3, "moderate"},
                         {4, "death following mild"},
                         {5, "severe"},
                         {6, "death following moderate"}});
}

std::vector<State> MultistateTree::states() const {
  std::vector<State> out(parent_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<State>(i);
  return out;
}

void MultistateTree::require(State s) const {
  if (!contains(s)) throw StructureError("unknown state label " + std::to_string(s));
}

bool MultistateTree::has_edge(State from, State to) const {
  return contains(from) && contains(to) && parent_[to] == from;
}

State MultistateTree::parent(State s) const {
  require(s);
  return parent_[s];
}

const std::vector<State>& MultistateTree::children(State s) const {
  require(s);
  return children_[s];
}

int MultistateTree::depth(State s) const {
  require(s);
  return depth_[s];
}

std::vector<State> MultistateTree::path_to(State k) const {
  require(k);
  std::vector<State> path;
  for (State cur = k; cur != -1; cur = parent_[cur]) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

bool MultistateTree::is_on_path(State j, State k) const {
  require(j);
  require(k);
  if (j == k) return false;
  for (State cur = parent_[k]; cur != -1; cur = parent_[cur])
    if (cur == j) return true;
  return false;
}

bool MultistateTree::in_subtree(State s, State k) const {
  require(s);
  require(k);
  for (State cur = s; cur != -1; cur = parent_[cur]) {
    if (cur == k) return true;
    if (depth_[cur] <= depth_[k]) return false;
  }
  return false;
}

std::vector<State> MultistateTree::descendant_set(State k) const {
  require(k);
  std::vector<State> out;
  for (State s = 0; s < num_states(); ++s)
    if (in_subtree(s, k)) out.push_back(s);
  return out;
}

PooledState MultistateTree::pool_preceding(State k_tilde) const {
  require(k_tilde);
  PooledState pooled;
  for (State s = 0; s < num_states(); ++s)
    if (s == k_tilde || !in_subtree(s, k_tilde)) pooled.members.push_back(s);
  pooled.label = "0*|" + std::to_string(k_tilde);
  return pooled;
}

std::optional<std::string> MultistateTree::name(State s) const {
  require(s);
  if (auto it = names_.find(s); it != names_.end()) return it->second;
  return std::nullopt;
}

State MultistateTree::parse_state(std::string_view token) const {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
    token.remove_suffix(1);
  State value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec == std::errc() && ptr == token.data() + token.size()) {
    require(value);
    return value;
  }
  for (const auto& [label, text] : names_)
    if (text == token) return label;
  throw StructureError("unknown state '" + std::string(token) + "'");
}

}  // namespace curstat
