#pragma once

// Corpus and embedding-table loading. The corpus is UTF-8 JSON Lines:
// a {"format_version":1} header line, then one admission object per
// line (see docs/formats.md for the field contract). Embedding files
// are tab-separated: two header lines (format_version, dimension)
// followed by `ref<TAB>v1 v2 ... vd` rows.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flowsum/semgraph.hpp"

namespace flowsum {

inline constexpr int kCorpusFormatVersion = 1;
inline constexpr int kEmbeddingFormatVersion = 1;

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return entries_.size(); }

  // Rejects dimension mismatches, non-finite values and duplicate refs.
  void insert(std::string ref, std::vector<double> values);

  const std::vector<double>* find(std::string_view ref) const;

  // Node embedding lookup: by embedding_ref when present, else by label;
  // keys missing from the table fall back to a deterministic vector
  // hashed from the node label.
  std::vector<double> node_vector(const SemanticNode& node) const;

  // Insertion order, for bit-identical write round-trips.
  const std::vector<std::pair<std::string, std::vector<double>>>& entries() const {
    return entries_;
  }

 private:
  std::size_t dimension_;
  std::vector<std::pair<std::string, std::vector<double>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Unit vector derived by hashing `key` into the embedding space.
// Identical keys always produce identical vectors.
std::vector<double> fallback_vector(std::string_view key, std::size_t dimension);

struct LoadOptions {
  // strict: throw on the first malformed admission instead of skipping it.
  bool strict = false;
};

struct LoadIssue {
  std::size_t line = 0;  // 1-based line in the corpus file
  std::string admission_id;
  std::string message;
};

struct CorpusLoadResult {
  std::vector<AdmissionInput> admissions;
  std::vector<LoadIssue> issues;  // empty under strict (it throws instead)
};

CorpusLoadResult load_corpus(const std::filesystem::path& path,
                             const LoadOptions& options = {});
CorpusLoadResult load_corpus(std::istream& in, const LoadOptions& options = {});

// Canonical serialization; load-then-write is a fixed point.
void write_corpus(std::ostream& out, const std::vector<AdmissionInput>& admissions);

EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable load_embeddings(std::istream& in, const std::string& name);
void write_embeddings(std::ostream& out, const EmbeddingTable& table);

// Single validation pass: every embedding_ref used by the corpus that
// does not resolve in the table, sorted and de-duplicated.
std::vector<std::string> unresolved_refs(const std::vector<AdmissionInput>& admissions,
                                         const EmbeddingTable& table);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

}  // namespace flowsum
