#include "flowsum/semgraph.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "flowsum/errors.hpp"

namespace flowsum {

namespace {

std::string tag_or_unknown(const std::string& tag) {
  return tag.empty() ? std::string(kUnknownTag) : tag;
}

class Builder {
 public:
  explicit Builder(const std::string& admission_id) {
    graph_.admission_id = admission_id;
  }

  NodeId add_doc_node(std::string label, Component side) {
    const NodeId id = static_cast<NodeId>(graph_.nodes.size());
    graph_.nodes.push_back({id, NodeKind::Doc, std::move(label), {}, {}});
    graph_.component.push_back(side);
    graph_.sentence_of.push_back(-1);
    return id;
  }

  void add_doc_edge(NodeId parent, NodeId child) {
    graph_.doc_edges.push_back({parent, child, "doc"});
  }

  void add_sentence(const SentenceInput& in, Component side, NodeId paragraph,
                    const std::string& note_id, const std::string& category,
                    const std::string& date, const std::string& section_type) {
    if (in.sent_id.empty()) fail("sentence with empty sent_id");
    if (!seen_sent_ids_.insert(in.sent_id).second)
      fail("duplicate sentence id '" + in.sent_id + "'");
    if (in.nodes.empty())
      fail("sentence '" + in.sent_id + "' has no nodes");

    Sentence sent;
    sent.sent_id = in.sent_id;
    sent.text = in.text;
    sent.component = side;
    sent.note_id = note_id;
    sent.note_category = category;
    sent.note_date = date;
    sent.section_type = section_type;

    std::unordered_map<std::string, NodeId> local;
    local.reserve(in.nodes.size());
    for (const NodeInput& n : in.nodes) {
      if (n.kind == NodeKind::Doc)
        fail("sentence '" + in.sent_id + "': node '" + n.id +
             "' has kind 'doc'; sentence graphs hold concept and attribute nodes only");
      const NodeId id = static_cast<NodeId>(graph_.nodes.size());
      if (!local.emplace(n.id, id).second)
        fail("sentence '" + in.sent_id + "': duplicate node id '" + n.id + "'");
      graph_.nodes.push_back({id, n.kind, n.label, n.concept_id, n.embedding_ref});
      graph_.component.push_back(side);
      graph_.sentence_of.push_back(static_cast<std::int32_t>(graph_.sentences.size()));
      sent.nodes.push_back(id);
    }

    auto resolve = [&](const std::string& local_id) {
      auto it = local.find(local_id);
      if (it == local.end())
        fail("sentence '" + in.sent_id + "': edge endpoint '" + local_id +
             "' is not a node of this sentence");
      return it->second;
    };
    for (const EdgeInput& e : in.edges)
      sent.edges.push_back({resolve(e.src), resolve(e.dst), e.label});
    sent.root = resolve(in.root);

    validate_sentence(sent);
    add_doc_edge(paragraph, sent.root);
    graph_.sentences.push_back(std::move(sent));
  }

  AdmissionGraph take() { return std::move(graph_); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw UserError("admission '" + graph_.admission_id + "': " + msg);
  }

  AdmissionGraph graph_;

 private:
  // Exactly one root (in-degree 0) and every node reachable from it.
  void validate_sentence(const Sentence& sent) const {
    const NodeId base = sent.nodes.front();
    const std::size_t n = sent.nodes.size();
    std::vector<unsigned> indeg(n, 0);
    std::vector<std::vector<std::size_t>> adj(n);
    for (const RoleEdge& e : sent.edges) {
      indeg[e.dst - base]++;
      adj[e.src - base].push_back(e.dst - base);
    }
    if (indeg[sent.root - base] != 0)
      fail("sentence '" + sent.sent_id + "': root has an incoming edge");

    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{sent.root - base};
    seen[sent.root - base] = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!seen[i])
        fail("sentence '" + sent.sent_id + "': node '" +
             graph_.nodes[base + i].label + "' (#" + std::to_string(i) +
             ") is not reachable from the root");
  }

  std::unordered_set<std::string> seen_sent_ids_;
};

std::size_t count_section_sentences(const std::vector<SectionInput>& sections) {
  std::size_t n = 0;
  for (const SectionInput& sec : sections)
    for (const ParagraphInput& para : sec.paragraphs) n += para.sentences.size();
  return n;
}

}  // namespace

const Sentence* AdmissionGraph::find_sentence(std::string_view sent_id) const {
  for (const Sentence& s : sentences)
    if (s.sent_id == sent_id) return &s;
  return nullptr;
}

const Sentence& AdmissionGraph::sentence_of_node(NodeId id) const {
  return sentences[static_cast<std::size_t>(sentence_of[id])];
}

AdmissionGraph build_admission_graph(const AdmissionInput& input) {
  Builder b(input.admission_id);

  if (count_section_sentences(input.summary.sections) == 0)
    b.fail("summary has no sentences");

  // Source side: root -> note category -> note -> section -> paragraph
  // -> sentence roots. One category node per distinct category tag, in
  // first-appearance order.
  b.graph_.source_root = b.add_doc_node("source", Component::Source);
  std::vector<std::pair<std::string, NodeId>> categories;
  auto category_node = [&](const std::string& tag) {
    for (const auto& [name, id] : categories)
      if (name == tag) return id;
    const NodeId id = b.add_doc_node(tag, Component::Source);
    b.add_doc_edge(b.graph_.source_root, id);
    categories.emplace_back(tag, id);
    return id;
  };

  for (const NoteInput& note : input.notes) {
    if (count_section_sentences(note.sections) == 0)
      b.fail("note '" + note.note_id + "' has no sentences");
    const std::string category = tag_or_unknown(note.category);
    const NodeId note_node = b.add_doc_node(note.note_id, Component::Source);
    b.add_doc_edge(category_node(category), note_node);
    for (const SectionInput& sec : note.sections) {
      const std::string section = tag_or_unknown(sec.section_type);
      const NodeId sec_node = b.add_doc_node(section, Component::Source);
      b.add_doc_edge(note_node, sec_node);
      std::size_t pi = 0;
      for (const ParagraphInput& para : sec.paragraphs) {
        const NodeId para_node =
            b.add_doc_node("p" + std::to_string(pi++), Component::Source);
        b.add_doc_edge(sec_node, para_node);
        for (const SentenceInput& s : para.sentences)
          b.add_sentence(s, Component::Source, para_node, note.note_id,
                         category, note.date, section);
      }
    }
  }
  b.graph_.source_sentence_count = b.graph_.sentences.size();

  // Summary side: root -> section -> paragraph -> sentence roots. The
  // root itself stands for the summary document, so there is no
  // category or note level.
  b.graph_.summary_root = b.add_doc_node("summary", Component::Summary);
  for (const SectionInput& sec : input.summary.sections) {
    const std::string section = tag_or_unknown(sec.section_type);
    const NodeId sec_node = b.add_doc_node(section, Component::Summary);
    b.add_doc_edge(b.graph_.summary_root, sec_node);
    std::size_t pi = 0;
    for (const ParagraphInput& para : sec.paragraphs) {
      const NodeId para_node =
          b.add_doc_node("p" + std::to_string(pi++), Component::Summary);
      b.add_doc_edge(sec_node, para_node);
      for (const SentenceInput& s : para.sentences)
        b.add_sentence(s, Component::Summary, para_node, input.summary.note_id,
                       "", input.summary.date, section);
    }
  }

  return b.take();
}

std::pair<std::size_t, std::size_t> count_reentrancies(const AdmissionGraph& g) {
  std::size_t source = 0, summary = 0;
  for (const Sentence& sent : g.sentences) {
    std::vector<unsigned> indeg(sent.nodes.size(), 0);
    for (const RoleEdge& e : sent.edges) indeg[sent.local_index(e.dst)]++;
    const std::size_t n = static_cast<std::size_t>(
        std::count_if(indeg.begin(), indeg.end(), [](unsigned d) { return d > 1; }));
    (sent.component == Component::Source ? source : summary) += n;
  }
  return {source, summary};
}

std::vector<NodeId> alignable_nodes(const AdmissionGraph& g, Component side) {
  std::vector<NodeId> out;
  for (const SemanticNode& n : g.nodes)
    if (is_alignable(n.kind) && g.component[n.id] == side) out.push_back(n.id);
  return out;
}

}  // namespace flowsum
