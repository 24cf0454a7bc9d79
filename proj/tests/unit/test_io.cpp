#include <doctest.h>

#include <sstream>

#include "curstat/errors.hpp"
#include "curstat/io.hpp"
#include "fixtures.hpp"

using namespace curstat;

TEST_CASE("tree JSON round trip") {
  for (const auto& tree : {MultistateTree::five_state(), MultistateTree::seven_state()}) {
    const auto back = tree_from_json(tree_to_json(tree));
    CHECK(back.edges() == tree.edges());
    CHECK(back.names() == tree.names());
  }
  CHECK(tree_from_json(R"("seven")").num_states() == 7);
  const auto t = tree_from_json(R"({"states": [0, 1, 2], "edges": [[0, 1], [1, 2]], "names": ["a", "b", "c"]})");
  CHECK(t.parse_state("c") == 2);
  CHECK_THROWS_AS(tree_from_json(R"({"states": [0, 1]})"), ArgumentError);
  CHECK_THROWS_AS(tree_from_json(R"({"states": [0, 1, 2], "edges": [[0, 1], [2, 1]]})"), StructureError);
  CHECK_THROWS_AS(tree_from_json("[1, 2"), ArgumentError);
}

TEST_CASE("records CSV round trip at full precision") {
  const auto sim = fixtures::five(50, 3);
  Dataset d{sim.records, {"z"}};
  for (std::size_t i = 0; i < d.records.size(); ++i) d.records[i].covariates = {0.1 * static_cast<double>(i) / 3.0};
  std::stringstream ss;
  write_records_csv(ss, d);
  const auto back = read_records_csv(ss, MultistateTree::five_state(), {"z"});
  REQUIRE(back.records.size() == d.records.size());
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    CHECK(back.records[i].id == d.records[i].id);
    CHECK(back.records[i].inspection_time == d.records[i].inspection_time);
    CHECK(back.records[i].observed_state == d.records[i].observed_state);
    CHECK(back.records[i].covariates == d.records[i].covariates);
  }
}

TEST_CASE("records CSV validation") {
  const auto tree = MultistateTree::five_state();
  auto read = [&](const std::string& text, std::vector<std::string> cov = {}) {
    std::istringstream in(text);
    return read_records_csv(in, tree, cov);
  };
  try {
    read("id,time,status\n1,0.5,0\n");
    FAIL("expected a missing-column error");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("missing column 'state'") != std::string::npos);
  }
  CHECK_THROWS_AS(read("id,time,state\n1,0.5,0\n", {"age"}), ArgumentError);
  CHECK_THROWS_AS(read("id,time,state\n1,abc,0\n"), ArgumentError);
  CHECK_THROWS_AS(read("id,time,state\n1,0.5,8\n"), StructureError);
  CHECK_THROWS_AS(read("id,time,state\n1,-0.5,0\n"), ArgumentError);
  CHECK_THROWS_AS(read(""), ArgumentError);
  const auto ok = read("state,id,time\nill,a,1.5\n\n0,b,2\n");
  CHECK(ok.records.size() == 2);
  CHECK(ok.records[0].observed_state == 1);
  CHECK(ok.records[1].id == "b");
}

TEST_CASE("event histories") {
  std::istringstream in("id,time,state\na,0,0\na,1.5,1\na,3,cens\nb,0,0\nb,2,2\n");
  const auto h = read_event_histories(in, MultistateTree::five_state());
  REQUIRE(h.size() == 2);
  CHECK(h[0].states == std::vector<State>{0, 1});
  CHECK(h[0].censor_time == 3.0);
  CHECK(std::isinf(h[1].censor_time));
  CHECK(h[1].entry_times == std::vector<double>{0.0, 2.0});
}
