#include "flowsum/generate.hpp"

#include <algorithm>
#include <ostream>

#include "json.hpp"

#include "flowsum/errors.hpp"

namespace flowsum {

using nlohmann::json;

GeneratedSummary generate_summary(const SectionClassifier& model,
                                  const AdmissionGraph& admission,
                                  const EmbeddingTable& table,
                                  const GenerateOptions& options) {
  // Source sentences in chronological order: note date first, then the
  // position in the admission.
  std::vector<const Sentence*> sources;
  for (const Sentence& s : admission.sentences)
    if (s.component == Component::Source) sources.push_back(&s);
  if (sources.empty())
    throw UserError("generate: admission '" + admission.admission_id +
                    "' has no source sentences");
  std::stable_sort(sources.begin(), sources.end(),
                   [](const Sentence* a, const Sentence* b) {
                     return a->note_date < b->note_date;
                   });

  GeneratedSummary summary;
  summary.admission_id = admission.admission_id;
  for (const std::string& section : options.section_order)
    summary.sections.push_back({section, {}});

  for (const Sentence* sent : sources) {
    DatasetRow row;
    row.admission_id = admission.admission_id;
    row.source_sent = sent->sent_id;
    row.text = sent->text;
    row.embedding_ref = sent->sent_id;
    row.note_category = sent->note_category;
    row.note_section_type = sent->section_type;
    const Prediction pred =
        model.predict(featurize(row, table, model.feature_spec()));
    if (pred.label == kNoSection) continue;

    auto dest = std::find_if(summary.sections.begin(), summary.sections.end(),
                             [&](const GeneratedSection& s) { return s.section == pred.label; });
    if (dest == summary.sections.end())
      throw UserError("generate: predicted section '" + pred.label +
                      "' is not in the configured section order");
    const double confidence = *std::max_element(pred.distribution.begin(),
                                                pred.distribution.end());
    if (options.dedup) {
      const bool dup = std::any_of(dest->sentences.begin(), dest->sentences.end(),
                                   [&](const GeneratedSentence& g) {
                                     return g.text == sent->text;
                                   });
      if (dup) continue;
    }
    dest->sentences.push_back({sent->text,
                               {sent->note_id, sent->note_category, sent->sent_id,
                                pred.label, confidence, std::nullopt}});
  }

  std::erase_if(summary.sections,
                [](const GeneratedSection& s) { return s.sentences.empty(); });
  return summary;
}

FaithfulnessReport verify_faithfulness(const GeneratedSummary& summary,
                                       const AdmissionGraph& admission) {
  FaithfulnessReport report;
  for (const GeneratedSection& section : summary.sections)
    for (const GeneratedSentence& g : section.sentences) {
      ++report.sentences_checked;
      const Sentence* src = admission.find_sentence(g.provenance.source_sent);
      if (!src) {
        report.violations.push_back("sentence '" + g.provenance.source_sent +
                                    "' does not resolve in the admission");
        continue;
      }
      if (src->component != Component::Source)
        report.violations.push_back("sentence '" + g.provenance.source_sent +
                                    "' is not a source sentence");
      else if (src->text != g.text)
        report.violations.push_back("sentence '" + g.provenance.source_sent +
                                    "' differs from its source text");
      else if (src->note_id != g.provenance.note_id)
        report.violations.push_back("sentence '" + g.provenance.source_sent +
                                    "' cites note '" + g.provenance.note_id +
                                    "' but lives in note '" + src->note_id + "'");
    }
  return report;
}

void write_summary_text(std::ostream& out, const GeneratedSummary& summary) {
  out << "# " << summary.admission_id << '\n';
  for (const GeneratedSection& section : summary.sections) {
    out << '\n' << "## " << section.section << '\n' << '\n';
    for (const GeneratedSentence& g : section.sentences) out << g.text << '\n';
  }
}

void write_provenance_json(std::ostream& out, const GeneratedSummary& summary) {
  json sentences = json::array();
  std::size_t index = 0;
  for (const GeneratedSection& section : summary.sections)
    for (const GeneratedSentence& g : section.sentences) {
      json j{{"index", index++},
             {"section", section.section},
             {"text", g.text},
             {"note_id", g.provenance.note_id},
             {"note_category", g.provenance.note_category},
             {"source_sent", g.provenance.source_sent},
             {"predicted_label", g.provenance.predicted_label},
             {"confidence", g.provenance.confidence}};
      if (g.provenance.flow_mass) j["flow_mass"] = *g.provenance.flow_mass;
      sentences.push_back(std::move(j));
    }
  out << json{{"format_version", 1},
              {"admission_id", summary.admission_id},
              {"sentences", sentences}}
             .dump()
      << '\n';
}

}  // namespace flowsum
