#pragma once

// Bipartite alignment between the source and summary components: build
// similarity-weighted alignment edges, route maximum flow from a super
// source through the source hierarchy, across the alignment edges and
// out of the summary hierarchy into a super sink, then starve low-flow
// alignment edges by zeroing their capacities and re-flow to a fixed
// point.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "flowsum/ingest.hpp"
#include "flowsum/semgraph.hpp"

namespace flowsum {

struct AlignConfig {
  double similarity_threshold = 0.8;  // tau, in [0,1]
  unsigned neighbor_order = 1;        // neighborhood radius for similarity
  double min_sentence_flow = 0.1;     // admission threshold for matching
  double prune_quantile = 0.25;       // in [0,1)
  unsigned max_iterations = 3;

  void validate() const;  // throws UserError when out of range
};

struct AlignmentEdge {
  NodeId src = 0;  // source-component node
  NodeId dst = 0;  // summary-component node
  double similarity = 0;
  double capacity = 0;
  double flow = 0;
};

enum class ArcKind { SourceTap, Hierarchy, Sentence, Alignment, SinkDrain };

struct FlowArc {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  double capacity = 0;
  double flow = 0;
  ArcKind kind = ArcKind::Hierarchy;
  std::int32_t alignment_index = -1;  // into the alignment edge list
};

// Admission-graph nodes plus a super source (node_count-2) and super
// sink (node_count-1). Arc order is fixed by construction, so repeated
// flow computations are bit-identical.
struct FlowNetwork {
  std::uint32_t node_count = 0;
  std::uint32_t super_source = 0;
  std::uint32_t super_sink = 0;
  std::vector<FlowArc> arcs;
  double total_flow = 0;
};

// Rescaled cosine (cos+1)/2 of the mean embedding over each node's
// role-edge neighborhood of radius <= neighbor_order (0 = the node's
// own embedding). Symmetric; a zero-norm mean contributes cosine 0.
double node_similarity(const AdmissionGraph& g, NodeId a, NodeId b,
                       unsigned neighbor_order, const EmbeddingTable& table);

// One edge per alignable (source, summary) pair whose similarity meets
// the threshold; capacity is initialized to the similarity.
std::vector<AlignmentEdge> build_alignment_edges(const AdmissionGraph& g,
                                                 const AlignConfig& cfg,
                                                 const EmbeddingTable& table);

// Hierarchy and sentence arcs get the summed capacity of the alignment
// edges beneath them, so document structure never bottlenecks content.
FlowNetwork build_flow_network(const AdmissionGraph& g,
                               const std::vector<AlignmentEdge>& edges);

// Assigns maximal flow from super source to super sink; fills arc flows
// and total_flow.
void run_max_flow(FlowNetwork& net);

// Zeroes the capacity of alignment arcs whose flow falls strictly below
// the prune_quantile of the positive alignment flows. Returns the number
// of arcs pruned. Hierarchy and sentence arcs are untouched.
std::size_t prune_low_flow(FlowNetwork& net, const AlignConfig& cfg);

struct AlignedGraph {
  const AdmissionGraph* graph = nullptr;
  std::vector<AlignmentEdge> edges;  // surviving (capacity > 0), final flows
  FlowNetwork network;               // final state
  unsigned iterations = 0;           // flow/prune rounds executed
};

AlignedGraph align(const AdmissionGraph& g, const AlignConfig& cfg,
                   const EmbeddingTable& table);

// Graphviz dump of the network with capacity/flow attributes.
void write_network_dot(std::ostream& out, const FlowNetwork& net,
                       const AdmissionGraph& g);

}  // namespace flowsum
