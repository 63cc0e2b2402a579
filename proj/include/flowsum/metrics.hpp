#pragma once

// Text overlap metrics: ROUGE-N (clipped n-gram counts), ROUGE-L
// (longest common subsequence) and BLEU (geometric mean of clipped
// n-gram precisions with a brevity penalty). Tokenization is lowercase
// with splits on non-alphanumeric runs; scores depend on it, so it is
// part of the contract.

#include <string>
#include <string_view>
#include <vector>

#include "flowsum/semgraph.hpp"

namespace flowsum {

std::vector<std::string> tokenize(std::string_view text);

struct OverlapScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Empty reference or candidate scores 0 (a warning goes to stderr for
// an empty reference).
OverlapScore rouge_n(const std::string& candidate, const std::string& reference, int n);
OverlapScore rouge_l(const std::string& candidate, const std::string& reference);

// Zero clipped counts are smoothed to kBleuEpsilon before the geometric
// mean; orders longer than the candidate are skipped.
inline constexpr double kBleuEpsilon = 1e-9;
double bleu(const std::string& candidate, const std::string& reference, int max_n = 4);

struct MetricReport {
  OverlapScore rouge1;
  OverlapScore rouge2;
  OverlapScore rouge_l;
  double bleu = 0;
  int bleu_order = 4;
};

// Concatenates the note antecedents chronologically (note date, then
// input order) and scores them against the summary text.
MetricReport compare_antecedents(const AdmissionInput& admission);

}  // namespace flowsum
