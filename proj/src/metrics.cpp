#include "flowsum/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <map>

namespace flowsum {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, int n) {
  std::map<Ngram, std::size_t> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
    counts[Ngram(tokens.begin() + static_cast<long>(i),
                 tokens.begin() + static_cast<long>(i) + n)]++;
  return counts;
}

// Clipped overlap and the candidate n-gram total.
std::pair<std::size_t, std::size_t> clipped_matches(const std::vector<std::string>& cand,
                                                    const std::vector<std::string>& ref,
                                                    int n) {
  const auto cand_counts = ngram_counts(cand, n);
  const auto ref_counts = ngram_counts(ref, n);
  std::size_t matched = 0, total = 0;
  for (const auto& [g, count] : cand_counts) {
    total += count;
    auto it = ref_counts.find(g);
    if (it != ref_counts.end()) matched += std::min(count, it->second);
  }
  return {matched, total};
}

OverlapScore score_from_counts(std::size_t matched, std::size_t cand_total,
                               std::size_t ref_total) {
  OverlapScore s;
  if (cand_total) s.precision = static_cast<double>(matched) / static_cast<double>(cand_total);
  if (ref_total) s.recall = static_cast<double>(matched) / static_cast<double>(ref_total);
  if (s.precision + s.recall > 0)
    s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool warn_empty_reference(const std::vector<std::string>& ref, const char* metric) {
  if (!ref.empty()) return false;
  std::cerr << "warning: " << metric << " against an empty reference scores 0\n";
  return true;
}

}  // namespace

OverlapScore rouge_n(const std::string& candidate, const std::string& reference, int n) {
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  if (warn_empty_reference(ref, "rouge-n")) return {};
  const auto [matched, cand_total] = clipped_matches(cand, ref, n);
  const std::size_t ref_total =
      static_cast<int>(ref.size()) >= n ? ref.size() - static_cast<std::size_t>(n) + 1 : 0;
  return score_from_counts(matched, cand_total, ref_total);
}

OverlapScore rouge_l(const std::string& candidate, const std::string& reference) {
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  if (warn_empty_reference(ref, "rouge-l")) return {};
  return score_from_counts(lcs_length(cand, ref), cand.size(), ref.size());
}

double bleu(const std::string& candidate, const std::string& reference, int max_n) {
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  if (warn_empty_reference(ref, "bleu")) return 0.0;
  if (cand.empty()) return 0.0;

  double log_sum = 0;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    const auto [matched, total] = clipped_matches(cand, ref, n);
    if (total == 0) break;  // candidate shorter than n
    const double p = matched ? static_cast<double>(matched) / static_cast<double>(total)
                             : kBleuEpsilon;
    log_sum += std::log(p);
    ++orders;
  }
  if (orders == 0) return 0.0;

  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double brevity = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return brevity * std::exp(log_sum / orders);
}

MetricReport compare_antecedents(const AdmissionInput& admission) {
  std::vector<const NoteInput*> notes;
  for (const NoteInput& note : admission.notes) notes.push_back(&note);
  std::stable_sort(notes.begin(), notes.end(),
                   [](const NoteInput* a, const NoteInput* b) { return a->date < b->date; });

  auto append_sections = [](std::string& out, const std::vector<SectionInput>& sections) {
    for (const SectionInput& sec : sections)
      for (const ParagraphInput& para : sec.paragraphs)
        for (const SentenceInput& s : para.sentences) {
          if (!out.empty()) out.push_back(' ');
          out += s.text;
        }
  };

  std::string antecedents;
  for (const NoteInput* note : notes) append_sections(antecedents, note->sections);
  std::string summary;
  append_sections(summary, admission.summary.sections);

  MetricReport report;
  report.rouge1 = rouge_n(antecedents, summary, 1);
  report.rouge2 = rouge_n(antecedents, summary, 2);
  report.rouge_l = rouge_l(antecedents, summary);
  report.bleu = bleu(antecedents, summary, report.bleu_order);
  return report;
}

}  // namespace flowsum
