#pragma once

// Sentence matching: turn alignment flow into sentence-level section
// labels. Summary sentences index their aligned nodes by DFS, flows are
// summed per (source sentence, summary sentence) pair into candidates,
// source sentences are ranked by total flow, and a greedy pass matches
// each to its strongest remaining summary sentence. A matched summary
// sentence leaves the pool; unmatched sources get the no-section label.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowsum/align.hpp"
#include "flowsum/semgraph.hpp"

namespace flowsum {

inline constexpr std::string_view kNoSection = "no-section";

struct SentenceMatchCandidate {
  std::string source_sent;
  std::string summary_sent;
  double flow_mass = 0;  // > 0
};

struct SectionLabeledSentence {
  std::string source_sent;
  std::string label;  // section tag or kNoSection
  std::optional<std::string> matched_summary_sent;
  double flow_mass = 0;
};

// For each summary sentence, the nodes (indexed once, reentrancies
// included a single time) incident to surviving alignment edges.
std::map<std::string, std::vector<NodeId>> index_aligned_nodes(const AlignedGraph& aligned);

// One candidate per sentence pair connected by surviving alignment
// edges with positive total flow; flow_mass sums those edges' flows.
std::vector<SentenceMatchCandidate> collect_candidates(
    const AlignedGraph& aligned,
    const std::map<std::string, std::vector<NodeId>>& index);

// Source sentences by descending total flow mass; ties ascending by id.
std::vector<std::string> rank_sources(const std::vector<SentenceMatchCandidate>& cands);

// Greedy one-to-one matching over ranked sources. summary_section maps
// summary sentence id -> section tag; all_source_sents fixes the output
// order and guarantees every source sentence appears exactly once.
std::vector<SectionLabeledSentence> greedy_match(
    const std::vector<SentenceMatchCandidate>& cands, double min_sentence_flow,
    const std::map<std::string, std::string>& summary_section,
    const std::vector<std::string>& all_source_sents);

// The full pipeline for one aligned admission.
std::vector<SectionLabeledSentence> match_admission(const AlignedGraph& aligned,
                                                    double min_sentence_flow);

}  // namespace flowsum
