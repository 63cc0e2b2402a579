#pragma once

// Semantic sentence graphs and the two-component admission graph that
// joins them through a document hierarchy (root / category / note /
// section / paragraph nodes).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flowsum {

using NodeId = std::uint32_t;

enum class NodeKind { Concept, Attribute, Doc };
enum class Component { Source, Summary };

// Reserved tag for absent category/section values.
inline constexpr std::string_view kUnknownTag = "unknown";

struct SemanticNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::Concept;
  std::string label;
  std::optional<std::string> concept_id;     // opaque ontology id, pass-through
  std::optional<std::string> embedding_ref;  // key into an embedding table
};

struct RoleEdge {
  NodeId src = 0;
  NodeId dst = 0;
  std::string label;
};

// ---------------------------------------------------------------------------
// Parsed inputs. Produced by ingest, consumed by build_admission_graph.
// Node and edge ids are local to one sentence graph.

struct NodeInput {
  std::string id;
  NodeKind kind = NodeKind::Concept;
  std::string label;
  std::optional<std::string> concept_id;
  std::optional<std::string> embedding_ref;
};

struct EdgeInput {
  std::string src;
  std::string dst;
  std::string label;
};

struct SentenceInput {
  std::string sent_id;
  std::string text;
  std::string root;  // local node id
  std::vector<NodeInput> nodes;
  std::vector<EdgeInput> edges;
};

struct ParagraphInput {
  std::vector<SentenceInput> sentences;
};

struct SectionInput {
  std::string section_type;
  std::vector<ParagraphInput> paragraphs;
};

struct NoteInput {
  std::string note_id;
  std::string category;
  std::string date;  // ISO-8601; chronological order == lexicographic order
  std::vector<SectionInput> sections;
};

struct SummaryInput {
  std::string note_id;
  std::string date;
  std::vector<SectionInput> sections;
};

struct AdmissionInput {
  std::string admission_id;
  std::vector<NoteInput> notes;
  SummaryInput summary;
};

// ---------------------------------------------------------------------------
// Constructed graph. Node ids are dense and assigned in input order, so
// every downstream tie-break is reproducible.

// One sentence graph embedded in an admission graph. Role edges use the
// admission-wide node ids; nodes are contiguous starting at nodes.front().
struct Sentence {
  std::string sent_id;
  std::string text;
  Component component = Component::Source;
  std::string note_id;
  std::string note_category;  // empty on the summary side
  std::string note_date;
  std::string section_type;
  NodeId root = 0;
  std::vector<NodeId> nodes;
  std::vector<RoleEdge> edges;

  // Position of a node in this sentence's input order.
  std::size_t local_index(NodeId id) const { return id - nodes.front(); }
};

struct AdmissionGraph {
  std::string admission_id;
  std::vector<SemanticNode> nodes;        // indexed by NodeId
  std::vector<Component> component;       // per node
  std::vector<std::int32_t> sentence_of;  // per node; -1 for doc nodes
  std::vector<RoleEdge> doc_edges;        // document-hierarchy edges
  std::vector<Sentence> sentences;        // source sentences first
  std::size_t source_sentence_count = 0;
  NodeId source_root = 0;
  NodeId summary_root = 0;

  const Sentence* find_sentence(std::string_view sent_id) const;
  const Sentence& sentence_of_node(NodeId id) const;
};

inline bool is_alignable(NodeKind k) { return k != NodeKind::Doc; }

// Builds the two-component admission graph. Sentence roots are joined to
// paragraph nodes; concept nodes are never merged across sentences.
// Throws UserError on duplicate sentence ids, an empty summary, or a
// sentence graph that violates the single-root/reachability invariants.
AdmissionGraph build_admission_graph(const AdmissionInput& input);

// Number of nodes with in-degree > 1 within their sentence graph, per
// component: (source_count, summary_count).
std::pair<std::size_t, std::size_t> count_reentrancies(const AdmissionGraph& g);

// Concept and attribute nodes of the chosen component, ascending by id.
std::vector<NodeId> alignable_nodes(const AdmissionGraph& g, Component side);

}  // namespace flowsum
