#include "flowsum/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "flowsum/errors.hpp"

namespace flowsum {

void SplitSpec::validate() const {
  for (double f : {train, test, validation})
    if (!(f >= 0.0 && f < 1.0 + 1e-9) || !std::isfinite(f))
      throw UserError("split: fractions must lie in [0,1]");
  if (std::abs(train + test + validation - 1.0) > 1e-9)
    throw UserError("split: fractions must sum to 1");
  if (train <= 0.0) throw UserError("split: train fraction must be positive");
}

std::vector<DatasetRow> build_rows(const AdmissionGraph& g,
                                   const std::vector<SectionLabeledSentence>& labels,
                                   const std::vector<std::string>& vocabulary) {
  std::unordered_map<std::string, const Sentence*> sentences;
  for (const Sentence& s : g.sentences) sentences.emplace(s.sent_id, &s);

  auto in_vocab = [&](const std::string& tag) {
    return std::find(vocabulary.begin(), vocabulary.end(), tag) != vocabulary.end();
  };

  std::vector<DatasetRow> rows;
  rows.reserve(labels.size());
  for (const SectionLabeledSentence& l : labels) {
    auto it = sentences.find(l.source_sent);
    if (it == sentences.end())
      throw UserError("dataset: unknown source sentence '" + l.source_sent + "'");
    const Sentence& sent = *it->second;
    DatasetRow row;
    row.admission_id = g.admission_id;
    row.source_sent = sent.sent_id;
    row.text = sent.text;
    row.embedding_ref = sent.sent_id;
    row.note_category = sent.note_category;
    row.note_section_type = sent.section_type;
    row.label = l.label != kNoSection && in_vocab(l.label) ? l.label
                                                           : std::string(kNoSection);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Hand-rolled Fisher-Yates so shuffles are identical across standard
// library implementations.
void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  std::uint64_t state = seed;
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[splitmix64(state) % i]);
}

}  // namespace

DatasetSplits emit_dataset(const std::vector<std::vector<DatasetRow>>& admissions,
                           const SplitSpec& split) {
  split.validate();
  const std::size_t n = admissions.size();
  const std::array<double, 3> fractions{split.train, split.test, split.validation};
  std::size_t nonzero = 0;
  for (double f : fractions)
    if (f > 0) ++nonzero;
  if (n < nonzero)
    throw UserError("split: " + std::to_string(n) + " admissions cannot fill " +
                    std::to_string(nonzero) + " nonzero splits");
  if (n == 0) throw UserError("split: no admissions");

  // Largest-remainder apportionment.
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double raw = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(raw);
    remainder[i] = raw - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) counts[order[k % 3]]++;

  // Every split with a nonzero fraction gets at least one admission,
  // stolen from the largest split.
  for (std::size_t i = 0; i < 3; ++i) {
    if (fractions[i] == 0 || counts[i] > 0) continue;
    const std::size_t donor = static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    counts[donor]--;
    counts[i]++;
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  shuffle_indices(idx, split.seed);

  std::array<std::vector<std::size_t>, 3> members;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    members[i].assign(idx.begin() + cursor, idx.begin() + cursor + counts[i]);
    std::sort(members[i].begin(), members[i].end());  // keep input order within a split
    cursor += counts[i];
  }

  DatasetSplits out;
  std::array<std::vector<DatasetRow>*, 3> dest{&out.train, &out.test, &out.validation};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t a : members[i])
      dest[i]->insert(dest[i]->end(), admissions[a].begin(), admissions[a].end());
  return out;
}

std::vector<std::pair<std::string, std::array<std::size_t, 3>>> label_counts(
    const DatasetSplits& splits, const std::vector<std::string>& vocabulary) {
  std::map<std::string, std::array<std::size_t, 3>> counts;
  for (const std::string& tag : vocabulary) counts[tag] = {0, 0, 0};
  counts[std::string(kNoSection)] = {0, 0, 0};
  const std::array<const std::vector<DatasetRow>*, 3> parts{&splits.train, &splits.test,
                                                            &splits.validation};
  for (std::size_t i = 0; i < 3; ++i)
    for (const DatasetRow& row : *parts[i]) counts[row.label][i]++;

  std::vector<std::pair<std::string, std::array<std::size_t, 3>>> out;
  for (const std::string& tag : vocabulary)
    if (tag != kNoSection) out.emplace_back(tag, counts[tag]);
  out.emplace_back(std::string(kNoSection), counts[std::string(kNoSection)]);
  return out;
}

std::map<std::string, std::map<std::string, double>> contingency_table(
    const std::vector<MatchedAdmission>& admissions) {
  std::map<std::string, std::map<std::string, double>> table;
  for (const MatchedAdmission& adm : admissions) {
    for (const SectionLabeledSentence& l : adm.labels) {
      if (!l.matched_summary_sent) continue;
      const Sentence* sent = adm.graph->find_sentence(l.source_sent);
      if (!sent)
        throw UserError("contingency: unknown source sentence '" + l.source_sent + "'");
      table[sent->note_category][l.label] += l.flow_mass;
    }
  }
  return table;
}

}  // namespace flowsum
