#include <algorithm>

#include "doctest.h"
#include "sepic/rng.hpp"
#include "sepic/topology.hpp"

using namespace sepic;

TEST_CASE("neighbors on the paper graphs") {
  const auto full = AgentGraph::fully_connected(3);
  CHECK(neighbors(full, 0) == std::set<int>{1, 2});
  CHECK(neighbors(full, 1) == std::set<int>{0, 2});

  const auto line = AgentGraph::from_edge_list(3, {{0, 1}, {1, 2}});
  CHECK(neighbors(line, 1) == std::set<int>{0, 2});
  CHECK(neighbors(line, 0) == std::set<int>{1});

  const auto single = AgentGraph::fully_connected(1);
  CHECK(neighbors(single, 0).empty());

  CHECK_THROWS_AS(neighbors(full, 3), std::out_of_range);
}

TEST_CASE("neighbor relation is symmetric and irreflexive") {
  const auto g = AgentGraph::from_edge_list(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
  for (int i = 0; i < g.n_agents; ++i) {
    const auto ni = neighbors(g, i);
    CHECK(ni.count(i) == 0);
    for (int j : ni) CHECK(neighbors(g, j).count(i) == 1);
  }
}

TEST_CASE("factorize produces one subsystem per agent, central first") {
  const auto full = AgentGraph::fully_connected(3);
  const auto subs = factorize(full, 4);
  REQUIRE(subs.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(subs[i].central == i);
    CHECK(subs[i].members.front() == i);
    CHECK(subs[i].members.size() == 3);
    CHECK(subs[i].joint_index_map == std::vector<int>{0, 4, 8});
  }

  const auto line = AgentGraph::from_edge_list(3, {{0, 1}, {1, 2}});
  const auto line_subs = factorize(line, 2);
  CHECK(line_subs[0].members == std::vector<int>{0, 1});
  CHECK(line_subs[1].members == std::vector<int>{1, 0, 2});
  CHECK(line_subs[2].members == std::vector<int>{2, 1});

  const auto single = factorize(AgentGraph::fully_connected(1), 4);
  CHECK(single[0].members == std::vector<int>{0});
}

TEST_CASE("member sets equal {i} union N_i and ignore edge input order") {
  const std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 3}, {0, 3}, {1, 3}};
  const auto g = AgentGraph::from_edge_list(4, edges);

  for (int trial = 0; trial < 20; ++trial) {
    auto shuffled = edges;
    for (std::size_t k = shuffled.size(); k > 1; --k) {
      const auto r = rng::combine(55, trial, k) % k;
      std::swap(shuffled[k - 1], shuffled[r]);
      if (rng::combine(56, trial, k) % 2) std::swap(shuffled[k - 1].first, shuffled[k - 1].second);
    }
    const auto g2 = AgentGraph::from_edge_list(4, shuffled);
    const auto subs = factorize(g2, 3);
    for (int i = 0; i < 4; ++i) {
      auto expected = neighbors(g, i);
      expected.insert(i);
      std::set<int> got(subs[i].members.begin(), subs[i].members.end());
      CHECK(got == expected);
      CHECK(subs[i].members.front() == i);
      CHECK(std::is_sorted(subs[i].members.begin() + 1, subs[i].members.end()));
      CHECK(subs[i].members.size() == neighbors(g, i).size() + 1);
    }
  }
}

TEST_CASE("disconnected and malformed graphs are rejected") {
  CHECK_THROWS_AS(AgentGraph::from_edge_list(4, {{0, 1}, {2, 3}}), std::invalid_argument);
  CHECK_THROWS_AS(AgentGraph::from_edge_list(3, {}), std::invalid_argument);
  CHECK_THROWS_AS(AgentGraph::from_edge_list(2, {{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(AgentGraph::from_edge_list(2, {{0, 5}}), std::invalid_argument);
  CHECK_NOTHROW(AgentGraph::from_edge_list(1, {}));
}
