#pragma once

// Summary assembly from classifier predictions, with per-sentence
// provenance and a faithfulness check that every emitted sentence is a
// verbatim copy of its source.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowsum/model.hpp"
#include "flowsum/semgraph.hpp"

namespace flowsum {

struct Provenance {
  std::string note_id;
  std::string note_category;
  std::string source_sent;
  std::string predicted_label;
  double confidence = 0;
  std::optional<double> flow_mass;  // training-time mass, when known
};

struct GeneratedSentence {
  std::string text;
  Provenance provenance;
};

struct GeneratedSection {
  std::string section;
  std::vector<GeneratedSentence> sentences;
};

struct GeneratedSummary {
  std::string admission_id;
  std::vector<GeneratedSection> sections;  // configured vocabulary order
};

struct GenerateOptions {
  std::vector<std::string> section_order;  // output order for sections
  bool dedup = false;  // drop repeated identical sentences within a section
};

// Classifies every source sentence and appends non-no-section sentences
// verbatim to their predicted section, in source chronological order
// (note date, then document position). Empty sections are omitted.
GeneratedSummary generate_summary(const SectionClassifier& model,
                                  const AdmissionGraph& admission,
                                  const EmbeddingTable& table,
                                  const GenerateOptions& options);

struct FaithfulnessReport {
  std::vector<std::string> violations;  // empty for valid output
  std::size_t sentences_checked = 0;
};

FaithfulnessReport verify_faithfulness(const GeneratedSummary& summary,
                                       const AdmissionGraph& admission);

void write_summary_text(std::ostream& out, const GeneratedSummary& summary);
void write_provenance_json(std::ostream& out, const GeneratedSummary& summary);

}  // namespace flowsum
