#pragma once

// Source-section dataset emission: labeled rows, admission-level splits,
// label-count tables and note-category x section contingency tables.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "flowsum/match.hpp"
#include "flowsum/semgraph.hpp"

namespace flowsum {

struct DatasetRow {
  std::string admission_id;
  std::string source_sent;
  std::string text;
  std::string embedding_ref;  // sentence-level key; falls back to a text hash
  std::string note_category;
  std::string note_section_type;
  std::string label;  // configured section tag or kNoSection
};

struct SplitSpec {
  double train = 0.8;
  double test = 0.1;
  double validation = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // fractions in [0,1), sum 1 within 1e-9
};

struct MatchedAdmission {
  const AdmissionGraph* graph = nullptr;
  std::vector<SectionLabeledSentence> labels;
};

// One row per source sentence. Labels outside the configured section
// vocabulary collapse to no-section.
std::vector<DatasetRow> build_rows(const AdmissionGraph& g,
                                   const std::vector<SectionLabeledSentence>& labels,
                                   const std::vector<std::string>& section_vocabulary);

struct DatasetSplits {
  std::vector<DatasetRow> train;
  std::vector<DatasetRow> test;
  std::vector<DatasetRow> validation;
};

// Partitions whole admissions (never sentences) across splits: shuffle
// by seed, apportion counts by largest remainder, and guarantee every
// nonzero-fraction split at least one admission. Throws UserError when
// there are fewer admissions than nonzero splits.
DatasetSplits emit_dataset(const std::vector<std::vector<DatasetRow>>& admissions,
                           const SplitSpec& split);

// label -> {train, test, validation} counts; rows ordered by the
// vocabulary with no-section last.
std::vector<std::pair<std::string, std::array<std::size_t, 3>>> label_counts(
    const DatasetSplits& splits, const std::vector<std::string>& section_vocabulary);

// category -> section -> summed matched flow mass.
std::map<std::string, std::map<std::string, double>> contingency_table(
    const std::vector<MatchedAdmission>& admissions);

}  // namespace flowsum
