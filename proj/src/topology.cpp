#include "sepic/topology.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sepic {

AgentGraph AgentGraph::from_edge_list(int n_agents,
                                      const std::vector<std::pair<int, int>>& edge_list) {
  AgentGraph g;
  g.n_agents = n_agents;
  for (auto [a, b] : edge_list) {
    if (a > b) std::swap(a, b);
    g.edges.insert({a, b});
  }
  g.validate();
  return g;
}

AgentGraph AgentGraph::fully_connected(int n_agents) {
  AgentGraph g;
  g.n_agents = n_agents;
  for (int a = 0; a < n_agents; ++a)
    for (int b = a + 1; b < n_agents; ++b) g.edges.insert({a, b});
  g.validate();
  return g;
}

bool AgentGraph::connected() const {
  if (n_agents <= 1) return true;
  std::vector<char> seen(n_agents, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (const auto& [a, b] : edges) {
      int other = -1;
      if (a == v) other = b;
      if (b == v) other = a;
      if (other >= 0 && !seen[other]) {
        seen[other] = 1;
        ++count;
        stack.push_back(other);
      }
    }
  }
  return count == n_agents;
}

void AgentGraph::validate() const {
  if (n_agents < 1) throw std::invalid_argument("graph: n_agents must be positive");
  for (const auto& [a, b] : edges) {
    if (a == b) throw std::invalid_argument("graph: self-loop at agent " + std::to_string(a));
    if (a < 0 || b < 0 || a >= n_agents || b >= n_agents)
      throw std::invalid_argument("graph: edge index out of range");
  }
  if (!connected()) throw std::invalid_argument("graph: must be connected");
}

std::set<int> neighbors(const AgentGraph& g, int i) {
  if (i < 0 || i >= g.n_agents) throw std::out_of_range("neighbors: agent index out of range");
  std::set<int> out;
  for (const auto& [a, b] : g.edges) {
    if (a == i) out.insert(b);
    if (b == i) out.insert(a);
  }
  return out;
}

std::vector<SubsystemSpec> factorize(const AgentGraph& g, int state_dim) {
  g.validate();
  std::vector<SubsystemSpec> out;
  out.reserve(g.n_agents);
  for (int i = 0; i < g.n_agents; ++i) {
    SubsystemSpec sub;
    sub.central = i;
    sub.members.push_back(i);
    for (int j : neighbors(g, i)) sub.members.push_back(j);  // set iteration is ascending
    sub.joint_index_map.resize(sub.members.size());
    for (std::size_t m = 0; m < sub.members.size(); ++m)
      sub.joint_index_map[m] = static_cast<int>(m) * state_dim;
    out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace sepic
