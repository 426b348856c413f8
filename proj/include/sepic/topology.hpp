#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

namespace sepic {

// Undirected communication graph over agents 0..n_agents-1.
struct AgentGraph {
  int n_agents = 0;
  std::set<std::pair<int, int>> edges;  // stored with first < second

  static AgentGraph from_edge_list(int n_agents,
                                   const std::vector<std::pair<int, int>>& edge_list);
  static AgentGraph fully_connected(int n_agents);

  bool connected() const;
  void validate() const;  // throws std::invalid_argument
};

// One factorial subsystem: a central agent plus its neighbors.
// Members are ordered central-first, then neighbors ascending, which fixes
// the block layout of the joint state deterministically.
struct SubsystemSpec {
  int central = 0;
  std::vector<int> members;
  std::vector<int> joint_index_map;  // per member, block offset in the plain joint state

  int size() const { return static_cast<int>(members.size()); }
};

std::set<int> neighbors(const AgentGraph& g, int i);
std::vector<SubsystemSpec> factorize(const AgentGraph& g, int state_dim);

}  // namespace sepic
