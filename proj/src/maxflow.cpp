#include "flowsum/maxflow.hpp"

#include <cmath>
#include <limits>
#include <queue>

#include "flowsum/errors.hpp"

namespace flowsum {

FlowUnits to_flow_units(double value) {
  if (!std::isfinite(value) || value < 0)
    throw UserError("capacities must be finite and non-negative");
  return static_cast<FlowUnits>(std::llround(value / kFlowGrid));
}

double from_flow_units(FlowUnits units) {
  return static_cast<double>(units) * kFlowGrid;
}

namespace {

struct Dinic {
  struct Edge {
    std::uint32_t to;
    FlowUnits cap;
    std::size_t rev;  // index of the reverse edge in adj[to]
  };

  explicit Dinic(std::uint32_t n) : adj(n), level(n), iter(n) {}

  std::size_t add_edge(std::uint32_t from, std::uint32_t to, FlowUnits cap) {
    const std::size_t idx = adj[from].size();
    adj[from].push_back({to, cap, adj[to].size() + (from == to ? 1 : 0)});
    adj[to].push_back({from, 0, idx});
    return idx;
  }

  bool bfs(std::uint32_t s, std::uint32_t t) {
    std::fill(level.begin(), level.end(), -1);
    std::queue<std::uint32_t> q;
    level[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const std::uint32_t u = q.front();
      q.pop();
      for (const Edge& e : adj[u])
        if (e.cap > 0 && level[e.to] < 0) {
          level[e.to] = level[u] + 1;
          q.push(e.to);
        }
    }
    return level[t] >= 0;
  }

  FlowUnits dfs(std::uint32_t u, std::uint32_t t, FlowUnits limit) {
    if (u == t) return limit;
    for (std::size_t& i = iter[u]; i < adj[u].size(); ++i) {
      Edge& e = adj[u][i];
      if (e.cap <= 0 || level[e.to] != level[u] + 1) continue;
      const FlowUnits d = dfs(e.to, t, std::min(limit, e.cap));
      if (d > 0) {
        e.cap -= d;
        adj[e.to][e.rev].cap += d;
        return d;
      }
    }
    return 0;
  }

  FlowUnits run(std::uint32_t s, std::uint32_t t) {
    FlowUnits total = 0;
    while (bfs(s, t)) {
      std::fill(iter.begin(), iter.end(), 0);
      FlowUnits f;
      while ((f = dfs(s, t, std::numeric_limits<FlowUnits>::max())) > 0) total += f;
    }
    return total;
  }

  std::vector<std::vector<Edge>> adj;
  std::vector<int> level;
  std::vector<std::size_t> iter;
};

}  // namespace

MaxFlowResult max_flow(std::uint32_t node_count, std::uint32_t source,
                       std::uint32_t sink, const std::vector<MaxFlowArc>& arcs) {
  if (source >= node_count || sink >= node_count)
    throw UserError("max_flow: source/sink out of range");

  Dinic dinic(node_count);
  std::vector<std::pair<std::uint32_t, std::size_t>> handles;
  handles.reserve(arcs.size());
  for (const MaxFlowArc& a : arcs) {
    if (a.from >= node_count || a.to >= node_count)
      throw UserError("max_flow: arc endpoint out of range");
    if (a.capacity < 0) throw UserError("max_flow: negative capacity");
    handles.emplace_back(a.from, dinic.add_edge(a.from, a.to, a.capacity));
  }

  MaxFlowResult result;
  result.total = source == sink ? 0 : dinic.run(source, sink);
  result.flow.reserve(arcs.size());
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const auto& [from, idx] = handles[i];
    result.flow.push_back(arcs[i].capacity - dinic.adj[from][idx].cap);
  }
  return result;
}

}  // namespace flowsum
