#pragma once

// Shared test fixtures and independent oracles. Everything here stays
// out of the library proper; oracles re-derive expected values through
// a different route than the implementation under test.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "flowsum/ingest.hpp"
#include "flowsum/match.hpp"
#include "flowsum/maxflow.hpp"
#include "flowsum/semgraph.hpp"

namespace flowsum::testsupport {

struct Rng {
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next();
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  double unit();  // [0,1)
  std::uint64_t state;
};

// Chain-shaped sentence graph: first label becomes the root concept,
// the rest hang off it as attribute children. Labels double as
// embedding refs for concept nodes.
SentenceInput make_sentence(const std::string& sent_id, const std::string& text,
                            const std::vector<std::string>& labels);

// One-note admission with every sentence in a single paragraph.
AdmissionInput one_note_admission(const std::string& admission_id,
                                  const std::vector<SentenceInput>& note_sentences,
                                  const std::vector<SentenceInput>& summary_sentences,
                                  const std::string& category = "progress",
                                  const std::string& note_section = "assessment",
                                  const std::string& summary_section = "hospital course");

// Deterministic multi-admission corpus whose topic words steer the
// alignment: heart -> hospital course, lung -> history of present
// illness, leg -> physical examination; other topics stay unmatched.
std::vector<AdmissionInput> demo_corpus(std::size_t n_admissions, std::uint64_t seed);

// Topic vectors plus per-source-sentence embeddings for demo_corpus.
EmbeddingTable demo_embeddings(const std::vector<AdmissionInput>& admissions);

struct DemoFiles {
  std::filesystem::path dir;
  std::filesystem::path corpus;
  std::filesystem::path embeddings;
  std::filesystem::path config;
  std::filesystem::path output_dir;
};

// Writes corpus, embeddings and a config file into dir (created fresh).
DemoFiles write_demo_files(std::size_t n_admissions, std::uint64_t seed,
                           const std::filesystem::path& dir);

std::filesystem::path make_temp_dir(const std::string& hint);

// Exit code of the flowsum CLI run with `args`; stdout+stderr land in
// log_file.
int run_cli(const std::string& args, const std::filesystem::path& log_file);

// All regular files under root as sorted relative paths.
std::vector<std::string> list_files(const std::filesystem::path& root);

// Byte-compare two directory trees; returns mismatch descriptions.
std::vector<std::string> diff_dirs(const std::filesystem::path& a,
                                   const std::filesystem::path& b);

// ---------------------------------------------------------------------------
// Oracles

// Minimum s-t cut by enumerating all vertex subsets (n <= ~20).
FlowUnits min_cut_bruteforce(std::uint32_t node_count, std::uint32_t source,
                             std::uint32_t sink, const std::vector<MaxFlowArc>& arcs);

// Literal transcription of the matching procedure: rank sources by
// total flow (ties ascend by id), give each its strongest remaining
// summary sentence above the threshold, eliminate it, label leftovers
// no-section.
std::vector<SectionLabeledSentence> simulate_match(
    const std::vector<SentenceMatchCandidate>& cands, double min_flow,
    const std::map<std::string, std::string>& summary_section,
    const std::vector<std::string>& sources);

struct RandomMatchCase {
  std::vector<SentenceMatchCandidate> cands;
  std::map<std::string, std::string> summary_section;
  std::vector<std::string> sources;
};

// <=5 source x <=4 summary sentences with gridded flows so ties occur.
RandomMatchCase random_match_case(Rng& rng);

}  // namespace flowsum::testsupport
