#include "flowsum/match.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "flowsum/errors.hpp"

namespace flowsum {

std::map<std::string, std::vector<NodeId>> index_aligned_nodes(const AlignedGraph& aligned) {
  const AdmissionGraph& g = *aligned.graph;
  std::unordered_set<NodeId> aligned_summary_nodes;
  for (const AlignmentEdge& e : aligned.edges) aligned_summary_nodes.insert(e.dst);

  std::map<std::string, std::vector<NodeId>> index;
  for (const Sentence& sent : g.sentences) {
    if (sent.component != Component::Summary) continue;
    std::vector<NodeId>& hits = index[sent.sent_id];

    const std::size_t k = sent.nodes.size();
    std::vector<std::vector<std::size_t>> adj(k);
    for (const RoleEdge& e : sent.edges)
      adj[sent.local_index(e.src)].push_back(sent.local_index(e.dst));

    // Preorder DFS with a visited set, so a reentrant node is indexed once.
    std::vector<char> seen(k, 0);
    std::vector<std::size_t> stack{sent.local_index(sent.root)};
    seen[sent.local_index(sent.root)] = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      if (aligned_summary_nodes.count(sent.nodes[u])) hits.push_back(sent.nodes[u]);
      for (auto it = adj[u].rbegin(); it != adj[u].rend(); ++it)
        if (!seen[*it]) {
          seen[*it] = 1;
          stack.push_back(*it);
        }
    }
  }
  return index;
}

std::vector<SentenceMatchCandidate> collect_candidates(
    const AlignedGraph& aligned,
    const std::map<std::string, std::vector<NodeId>>& index) {
  const AdmissionGraph& g = *aligned.graph;
  std::unordered_map<NodeId, std::vector<const AlignmentEdge*>> edges_by_dst;
  for (const AlignmentEdge& e : aligned.edges) edges_by_dst[e.dst].push_back(&e);

  std::map<std::pair<std::string, std::string>, double> mass;
  for (const auto& [summary_sent, nodes] : index)
    for (NodeId node : nodes) {
      auto it = edges_by_dst.find(node);
      if (it == edges_by_dst.end()) continue;
      for (const AlignmentEdge* e : it->second)
        mass[{g.sentence_of_node(e->src).sent_id, summary_sent}] += e->flow;
    }

  std::vector<SentenceMatchCandidate> cands;
  for (const auto& [pair, flow] : mass)
    if (flow > 0) cands.push_back({pair.first, pair.second, flow});
  return cands;
}

std::vector<std::string> rank_sources(const std::vector<SentenceMatchCandidate>& cands) {
  std::map<std::string, double> totals;
  for (const SentenceMatchCandidate& c : cands) totals[c.source_sent] += c.flow_mass;
  std::vector<std::string> order;
  order.reserve(totals.size());
  for (const auto& [id, total] : totals) order.push_back(id);
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) {
                     if (totals[a] != totals[b]) return totals[a] > totals[b];
                     return a < b;
                   });
  return order;
}

std::vector<SectionLabeledSentence> greedy_match(
    const std::vector<SentenceMatchCandidate>& cands, double min_sentence_flow,
    const std::map<std::string, std::string>& summary_section,
    const std::vector<std::string>& all_source_sents) {
  std::map<std::string, std::vector<const SentenceMatchCandidate*>> by_source;
  for (const SentenceMatchCandidate& c : cands)
    by_source[c.source_sent].push_back(&c);
  // Ascending summary id within each source, so an equal-flow tie picks
  // the lowest id.
  for (auto& [src, list] : by_source)
    std::sort(list.begin(), list.end(),
              [](const SentenceMatchCandidate* a, const SentenceMatchCandidate* b) {
                return a->summary_sent < b->summary_sent;
              });

  std::set<std::string> taken;
  std::unordered_map<std::string, SectionLabeledSentence> matched;
  for (const std::string& src : rank_sources(cands)) {
    const SentenceMatchCandidate* best = nullptr;
    for (const SentenceMatchCandidate* c : by_source[src]) {
      if (c->flow_mass < min_sentence_flow) continue;
      if (taken.count(c->summary_sent)) continue;
      if (!best || c->flow_mass > best->flow_mass) best = c;
    }
    if (!best) continue;
    auto sec = summary_section.find(best->summary_sent);
    if (sec == summary_section.end())
      throw UserError("match: summary sentence '" + best->summary_sent +
                      "' has no section");
    taken.insert(best->summary_sent);
    matched.emplace(src, SectionLabeledSentence{src, sec->second,
                                                best->summary_sent,
                                                best->flow_mass});
  }

  std::vector<SectionLabeledSentence> out;
  out.reserve(all_source_sents.size());
  for (const std::string& src : all_source_sents) {
    auto it = matched.find(src);
    if (it != matched.end())
      out.push_back(it->second);
    else
      out.push_back({src, std::string(kNoSection), std::nullopt, 0.0});
  }
  return out;
}

std::vector<SectionLabeledSentence> match_admission(const AlignedGraph& aligned,
                                                    double min_sentence_flow) {
  const AdmissionGraph& g = *aligned.graph;
  std::map<std::string, std::string> summary_section;
  std::vector<std::string> sources;
  for (const Sentence& sent : g.sentences) {
    if (sent.component == Component::Source)
      sources.push_back(sent.sent_id);
    else
      summary_section[sent.sent_id] = sent.section_type;
  }
  const auto index = index_aligned_nodes(aligned);
  const auto cands = collect_candidates(aligned, index);
  return greedy_match(cands, min_sentence_flow, summary_section, sources);
}

}  // namespace flowsum
