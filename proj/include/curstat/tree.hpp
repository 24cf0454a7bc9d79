#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace curstat {

using State = int;
using Edge = std::pair<State, State>;

// A set of states treated as one artificial state, e.g. the pre-k state 0*.
struct PooledState {
  std::vector<State> members;  // sorted
  std::string label;

  bool contains(State s) const;
};

// Progressive multistate system on a directed tree rooted at state 0.
//
// States are the contiguous labels 0..Q. Every non-root state has exactly one
// parent, so each state k has a unique path 0 -> ... -> k. The object is
// immutable after construction and safe to share between threads.
class MultistateTree {
 public:
  MultistateTree(std::vector<State> states, std::vector<Edge> edges,
                 std::map<State, std::string> names = {});

  // Illness-death tree with competing exits: 0->1, 0->2, 1->3, 1->4.
  static MultistateTree five_state();
  // Three-level tree: 0->1, 0->2, 1->3, 1->4, 3->5, 3->6.
  static MultistateTree seven_state();

  int num_states() const { return static_cast<int>(parent_.size()); }
  int q() const { return num_states() - 1; }
  std::vector<State> states() const;
  const std::vector<Edge>& edges() const { return edges_; }
  bool contains(State s) const { return s >= 0 && s < num_states(); }
  bool has_edge(State from, State to) const;

  State parent(State s) const;  // -1 for the root
  const std::vector<State>& children(State s) const;
  bool is_leaf(State s) const { return children(s).empty(); }
  int depth(State s) const;

  // Unique path (0, ..., k).
  std::vector<State> path_to(State k) const;
  // True iff j lies on the path to k and j != k.
  bool is_on_path(State j, State k) const;
  // k together with every state whose path passes through k.
  std::vector<State> descendant_set(State k) const;
  // Membership test for descendant_set(k) without materialising it.
  bool in_subtree(State s, State k) const;
  // Everything that is not a strict descendant of k_tilde.
  PooledState pool_preceding(State k_tilde) const;

  std::optional<std::string> name(State s) const;
  const std::map<State, std::string>& names() const { return names_; }
  // Accepts either an integer label or an alias from the names map.
  State parse_state(std::string_view token) const;

 private:
  void require(State s) const;

  std::vector<State> parent_;
  std::vector<std::vector<State>> children_;
  std::vector<Edge> edges_;
  std::vector<int> depth_;
  std::map<State, std::string> names_;
};

}  // namespace curstat
