#include <doctest.h>

#include <algorithm>
#include <set>

#include "curstat/errors.hpp"
#include "curstat/tree.hpp"

using namespace curstat;

namespace {

std::set<State> as_set(const std::vector<State>& v) { return {v.begin(), v.end()}; }

std::vector<MultistateTree> all_trees() {
  return {MultistateTree::five_state(), MultistateTree::seven_state(),
          MultistateTree({0, 1, 2, 3}, {{0, 1}, {1, 2}, {2, 3}}),
          MultistateTree({0, 1, 2, 3, 4, 5}, {{0, 1}, {0, 2}, {0, 3}, {3, 4}, {3, 5}})};
}

}  // namespace

TEST_CASE("paths in the bundled trees") {
  const auto five = MultistateTree::five_state();
  const auto seven = MultistateTree::seven_state();
  CHECK(five.path_to(3) == std::vector<State>{0, 1, 3});
  CHECK(five.path_to(0) == std::vector<State>{0});
  CHECK(seven.path_to(5) == std::vector<State>{0, 1, 3, 5});
  CHECK_THROWS_AS(five.path_to(9), StructureError);
}

TEST_CASE("is_on_path") {
  const auto five = MultistateTree::five_state();
  CHECK(five.is_on_path(1, 3));
  CHECK_FALSE(five.is_on_path(3, 3));
  CHECK_FALSE(five.is_on_path(2, 3));
  CHECK(five.is_on_path(0, 4));
  CHECK_THROWS_AS(five.is_on_path(1, 17), StructureError);
}

TEST_CASE("descendant sets") {
  const auto seven = MultistateTree::seven_state();
  CHECK(as_set(seven.descendant_set(3)) == std::set<State>{3, 5, 6});
  CHECK(as_set(seven.descendant_set(1)) == std::set<State>{1, 3, 4, 5, 6});
  CHECK(as_set(seven.descendant_set(6)) == std::set<State>{6});
  CHECK_THROWS_AS(seven.descendant_set(-1), StructureError);
}

TEST_CASE("pooled preceding states") {
  CHECK(MultistateTree::five_state().pool_preceding(1).members == std::vector<State>{0, 1, 2});
  CHECK(MultistateTree::seven_state().pool_preceding(3).members == std::vector<State>{0, 1, 2, 3, 4});
  CHECK(MultistateTree::seven_state().pool_preceding(0).members == std::vector<State>{0});
}

TEST_CASE("structural properties hold on every tree") {
  for (const auto& tree : all_trees()) {
    const auto states = tree.states();
    CHECK(as_set(tree.descendant_set(0)) == as_set(states));
    std::set<State> seen;
    for (State c : tree.children(0))
      for (State s : tree.descendant_set(c)) CHECK(seen.insert(s).second);

    for (State k : states) {
      const auto path = tree.path_to(k);
      CHECK(path.front() == 0);
      CHECK(path.back() == k);
      CHECK(as_set(path).size() == path.size());
      for (std::size_t i = 1; i < path.size(); ++i) CHECK(tree.has_edge(path[i - 1], path[i]));

      for (State j : states) {
        const bool listed = std::find(path.begin(), path.end(), j) != path.end();
        CHECK(tree.is_on_path(j, k) == (listed && j != k));
        CHECK(tree.in_subtree(j, k) == as_set(tree.descendant_set(k)).count(j) > 0);
      }

      auto pooled = as_set(tree.pool_preceding(k).members);
      auto strict = as_set(tree.descendant_set(k));
      strict.erase(k);
      for (State s : states) CHECK((pooled.count(s) + strict.count(s)) == 1);
    }
  }
}

TEST_CASE("invalid trees are rejected") {
  CHECK_THROWS_AS(MultistateTree({0, 1, 2}, {{0, 1}, {0, 2}, {1, 2}}), StructureError);
  CHECK_THROWS_AS(MultistateTree({0, 1, 2}, {{0, 1}}), StructureError);
  CHECK_THROWS_AS(MultistateTree({0, 1}, {{1, 0}}), StructureError);
  CHECK_THROWS_AS(MultistateTree({0, 2}, {{0, 2}}), StructureError);
}

TEST_CASE("state names are accepted as aliases") {
  const auto five = MultistateTree::five_state();
  CHECK(five.parse_state("3") == 3);
  CHECK(five.parse_state("ill") == 1);
  CHECK_THROWS_AS(five.parse_state("nowhere"), StructureError);
}
