#include "flowsum/align.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <queue>

#include "flowsum/errors.hpp"
#include "flowsum/maxflow.hpp"

namespace flowsum {

void AlignConfig::validate() const {
  if (!(similarity_threshold >= 0.0 && similarity_threshold <= 1.0))
    throw UserError("align: similarity_threshold must be in [0,1]");
  if (!(min_sentence_flow >= 0.0) || !std::isfinite(min_sentence_flow))
    throw UserError("align: min_sentence_flow must be non-negative");
  if (!(prune_quantile >= 0.0 && prune_quantile < 1.0))
    throw UserError("align: prune_quantile must be in [0,1)");
  if (max_iterations == 0) throw UserError("align: max_iterations must be positive");
}

namespace {

// Mean embedding over the node's role-edge neighborhood of radius
// <= order, within its own sentence graph.
std::vector<double> pooled_vector(const AdmissionGraph& g, NodeId node,
                                  unsigned order, const EmbeddingTable& table) {
  const Sentence& sent = g.sentence_of_node(node);
  const std::size_t n = sent.nodes.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const RoleEdge& e : sent.edges) {
    adj[sent.local_index(e.src)].push_back(sent.local_index(e.dst));
    adj[sent.local_index(e.dst)].push_back(sent.local_index(e.src));
  }

  std::vector<int> dist(n, -1);
  std::queue<std::size_t> q;
  const std::size_t start = sent.local_index(node);
  dist[start] = 0;
  q.push(start);
  std::vector<double> mean(table.dimension(), 0.0);
  std::size_t count = 0;
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    const std::vector<double> v = table.node_vector(g.nodes[sent.nodes[u]]);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
    ++count;
    if (static_cast<unsigned>(dist[u]) >= order) continue;
    for (std::size_t w : adj[u])
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
  }
  for (double& x : mean) x /= static_cast<double>(count);
  return mean;
}

double rescaled_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double cosine = 0.0;
  if (na > 0 && nb > 0) cosine = dot / std::sqrt(na * nb);
  cosine = std::clamp(cosine, -1.0, 1.0);
  return (cosine + 1.0) / 2.0;
}

// Linear interpolation between order statistics.
double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

}  // namespace

double node_similarity(const AdmissionGraph& g, NodeId a, NodeId b,
                       unsigned neighbor_order, const EmbeddingTable& table) {
  for (NodeId id : {a, b})
    if (id >= g.nodes.size() || !is_alignable(g.nodes[id].kind))
      throw UserError("node_similarity: node " + std::to_string(id) +
                      " is not alignable");
  return rescaled_cosine(pooled_vector(g, a, neighbor_order, table),
                         pooled_vector(g, b, neighbor_order, table));
}

std::vector<AlignmentEdge> build_alignment_edges(const AdmissionGraph& g,
                                                 const AlignConfig& cfg,
                                                 const EmbeddingTable& table) {
  cfg.validate();
  const std::vector<NodeId> src = alignable_nodes(g, Component::Source);
  const std::vector<NodeId> dst = alignable_nodes(g, Component::Summary);

  std::vector<std::vector<double>> src_pool, dst_pool;
  src_pool.reserve(src.size());
  dst_pool.reserve(dst.size());
  for (NodeId id : src) src_pool.push_back(pooled_vector(g, id, cfg.neighbor_order, table));
  for (NodeId id : dst) dst_pool.push_back(pooled_vector(g, id, cfg.neighbor_order, table));

  std::vector<AlignmentEdge> edges;
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t j = 0; j < dst.size(); ++j) {
      const double sim = rescaled_cosine(src_pool[i], dst_pool[j]);
      if (sim >= cfg.similarity_threshold)
        edges.push_back({src[i], dst[j], sim, sim, 0.0});
    }
  return edges;
}

FlowNetwork build_flow_network(const AdmissionGraph& g,
                               const std::vector<AlignmentEdge>& edges) {
  const std::uint32_t n = static_cast<std::uint32_t>(g.nodes.size());
  FlowNetwork net;
  net.node_count = n + 2;
  net.super_source = n;
  net.super_sink = n + 1;

  // Alignment capacity hanging off each alignable node.
  std::vector<double> weight(n, 0.0);
  for (const AlignmentEdge& e : edges) {
    weight[e.src] += e.capacity;
    weight[e.dst] += e.capacity;
  }

  // desc[v] = total alignment capacity reachable beneath v: within a
  // sentence graph via directed role edges, then aggregated up the
  // document hierarchy.
  std::vector<double> desc(n, 0.0);
  for (const Sentence& sent : g.sentences) {
    const std::size_t k = sent.nodes.size();
    std::vector<std::vector<std::size_t>> adj(k);
    for (const RoleEdge& e : sent.edges)
      adj[sent.local_index(e.src)].push_back(sent.local_index(e.dst));
    std::vector<unsigned> mark(k, 0);
    unsigned stamp = 0;
    for (std::size_t s = 0; s < k; ++s) {
      ++stamp;
      double total = 0;
      std::vector<std::size_t> stack{s};
      mark[s] = stamp;
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        total += weight[sent.nodes[u]];
        for (std::size_t w : adj[u])
          if (mark[w] != stamp) {
            mark[w] = stamp;
            stack.push_back(w);
          }
      }
      desc[sent.nodes[s]] = total;
    }
  }

  std::vector<std::vector<NodeId>> children(n);
  for (const RoleEdge& de : g.doc_edges) children[de.src].push_back(de.dst);
  std::function<double(NodeId)> accumulate = [&](NodeId u) -> double {
    if (g.nodes[u].kind != NodeKind::Doc) return desc[u];
    double total = 0;
    for (NodeId c : children[u]) total += accumulate(c);
    desc[u] = total;
    return total;
  };
  accumulate(g.source_root);
  accumulate(g.summary_root);

  // Fixed arc order: tap, source hierarchy, source sentence arcs,
  // alignment arcs, summary sentence arcs (reversed), summary hierarchy
  // (reversed), drain.
  net.arcs.push_back({net.super_source, g.source_root, desc[g.source_root], 0,
                      ArcKind::SourceTap, -1});
  for (const RoleEdge& de : g.doc_edges)
    if (g.component[de.src] == Component::Source)
      net.arcs.push_back({de.src, de.dst, desc[de.dst], 0, ArcKind::Hierarchy, -1});
  for (const Sentence& sent : g.sentences)
    if (sent.component == Component::Source)
      for (const RoleEdge& e : sent.edges)
        net.arcs.push_back({e.src, e.dst, desc[e.dst], 0, ArcKind::Sentence, -1});
  for (std::size_t i = 0; i < edges.size(); ++i)
    net.arcs.push_back({edges[i].src, edges[i].dst, edges[i].capacity, 0,
                        ArcKind::Alignment, static_cast<std::int32_t>(i)});
  for (const Sentence& sent : g.sentences)
    if (sent.component == Component::Summary)
      for (const RoleEdge& e : sent.edges)
        net.arcs.push_back({e.dst, e.src, desc[e.dst], 0, ArcKind::Sentence, -1});
  for (const RoleEdge& de : g.doc_edges)
    if (g.component[de.src] == Component::Summary)
      net.arcs.push_back({de.dst, de.src, desc[de.dst], 0, ArcKind::Hierarchy, -1});
  net.arcs.push_back({g.summary_root, net.super_sink, desc[g.summary_root], 0,
                      ArcKind::SinkDrain, -1});
  return net;
}

void run_max_flow(FlowNetwork& net) {
  // Capacities are snapped onto the 1e-9 grid first, so the solver is
  // exact and flow <= capacity holds without tolerance.
  std::vector<MaxFlowArc> arcs;
  arcs.reserve(net.arcs.size());
  for (FlowArc& a : net.arcs) {
    const FlowUnits cap = to_flow_units(a.capacity);
    a.capacity = from_flow_units(cap);
    arcs.push_back({a.from, a.to, cap});
  }
  const MaxFlowResult result =
      max_flow(net.node_count, net.super_source, net.super_sink, arcs);
  for (std::size_t i = 0; i < net.arcs.size(); ++i)
    net.arcs[i].flow = from_flow_units(result.flow[i]);
  net.total_flow = from_flow_units(result.total);
}

std::size_t prune_low_flow(FlowNetwork& net, const AlignConfig& cfg) {
  std::vector<double> positive;
  for (const FlowArc& a : net.arcs)
    if (a.kind == ArcKind::Alignment && a.flow > 0) positive.push_back(a.flow);
  if (positive.empty()) return 0;

  const double threshold = quantile(std::move(positive), cfg.prune_quantile);
  std::size_t pruned = 0;
  for (FlowArc& a : net.arcs)
    if (a.kind == ArcKind::Alignment && a.capacity > 0 && a.flow < threshold) {
      a.capacity = 0;
      a.flow = 0;
      ++pruned;
    }
  return pruned;
}

AlignedGraph align(const AdmissionGraph& g, const AlignConfig& cfg,
                   const EmbeddingTable& table) {
  cfg.validate();
  AlignedGraph result;
  result.graph = &g;

  const std::vector<AlignmentEdge> edges = build_alignment_edges(g, cfg, table);
  result.network = build_flow_network(g, edges);

  bool pruned_last = false;
  for (unsigned it = 0; it < cfg.max_iterations; ++it) {
    run_max_flow(result.network);
    ++result.iterations;
    pruned_last = prune_low_flow(result.network, cfg) > 0;
    if (!pruned_last) break;
  }
  // Make the reported flows consistent with the final capacities when
  // the iteration budget ran out mid-prune.
  if (pruned_last) run_max_flow(result.network);

  for (const FlowArc& a : result.network.arcs)
    if (a.kind == ArcKind::Alignment && a.capacity > 0) {
      AlignmentEdge e = edges[static_cast<std::size_t>(a.alignment_index)];
      e.capacity = a.capacity;
      e.flow = a.flow;
      result.edges.push_back(e);
    }
  return result;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

void write_network_dot(std::ostream& out, const FlowNetwork& net,
                       const AdmissionGraph& g) {
  out << "digraph alignment {\n  rankdir=LR;\n";
  for (const SemanticNode& n : g.nodes) {
    const char* shape = n.kind == NodeKind::Doc ? "box" : "ellipse";
    out << "  n" << n.id << " [label=\"" << dot_escape(n.label) << "\" shape="
        << shape << "];\n";
  }
  out << "  n" << net.super_source << " [label=\"S\" shape=diamond];\n";
  out << "  n" << net.super_sink << " [label=\"T\" shape=diamond];\n";
  for (const FlowArc& a : net.arcs) {
    out << "  n" << a.from << " -> n" << a.to << " [label=\"" << a.flow << "/"
        << a.capacity << "\"";
    if (a.kind == ArcKind::Alignment)
      out << " color=" << (a.capacity > 0 ? "red" : "gray") << " style="
          << (a.capacity > 0 ? "solid" : "dashed");
    out << "];\n";
  }
  out << "}\n";
}

}  // namespace flowsum
