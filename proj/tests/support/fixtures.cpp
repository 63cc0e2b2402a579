#include "support/fixtures.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "flowsum/errors.hpp"

namespace flowsum::testsupport {

std::uint64_t Rng::next() {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

SentenceInput make_sentence(const std::string& sent_id, const std::string& text,
                            const std::vector<std::string>& labels) {
  SentenceInput s;
  s.sent_id = sent_id;
  s.text = text;
  s.root = "n0";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    NodeInput n;
    n.id = "n" + std::to_string(i);
    n.kind = i == 0 ? NodeKind::Concept : NodeKind::Attribute;
    n.label = labels[i];
    if (i == 0) n.embedding_ref = labels[i];
    s.nodes.push_back(std::move(n));
    if (i > 0) s.edges.push_back({"n0", "n" + std::to_string(i), ":mod"});
  }
  return s;
}

AdmissionInput one_note_admission(const std::string& admission_id,
                                  const std::vector<SentenceInput>& note_sentences,
                                  const std::vector<SentenceInput>& summary_sentences,
                                  const std::string& category,
                                  const std::string& note_section,
                                  const std::string& summary_section) {
  AdmissionInput adm;
  adm.admission_id = admission_id;
  NoteInput note;
  note.note_id = admission_id + ".n1";
  note.category = category;
  note.date = "2120-01-01";
  note.sections.push_back({note_section, {{note_sentences}}});
  adm.notes.push_back(std::move(note));
  adm.summary.note_id = admission_id + ".ds";
  adm.summary.date = "2120-01-09";
  adm.summary.sections.push_back({summary_section, {{summary_sentences}}});
  return adm;
}

namespace {

struct Topic {
  const char* word;
  const char* section;  // summary section; nullptr = source-only distractor
};

constexpr Topic kTopics[] = {
    {"heart", "hospital course"},
    {"lung", "history of present illness"},
    {"leg", "physical examination"},
    {"med", nullptr},
    {"diet", nullptr},
    {"sleep", nullptr},
};
constexpr std::size_t kMappedTopics = 3;
constexpr std::size_t kEmbeddingDim = 8;

const char* kCategories[] = {"radiology", "nursing", "progress"};
const char* kNoteSections[] = {"findings", "assessment"};

}  // namespace

std::vector<AdmissionInput> demo_corpus(std::size_t n_admissions, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AdmissionInput> corpus;
  for (std::size_t a = 0; a < n_admissions; ++a) {
    AdmissionInput adm;
    adm.admission_id = "A" + std::to_string(100 + a);
    std::size_t sent_counter = 0;

    // Every admission covers the three mapped topics at least once, then
    // pads with distractors so no-section dominates the labels.
    std::vector<std::size_t> topics = {0, 1, 2};
    const std::size_t extra = 3 + rng.below(4);
    for (std::size_t i = 0; i < extra; ++i)
      topics.push_back(3 + rng.below(std::size(kTopics) - 3));
    for (std::size_t i = topics.size(); i > 1; --i)
      std::swap(topics[i - 1], topics[rng.below(i)]);

    const std::size_t n_notes = 2 + rng.below(2);
    std::size_t cursor = 0;
    for (std::size_t nn = 0; nn < n_notes; ++nn) {
      NoteInput note;
      note.note_id = adm.admission_id + ".n" + std::to_string(nn);
      note.category = kCategories[rng.below(std::size(kCategories))];
      note.date = "2120-01-0" + std::to_string(1 + nn);
      const std::size_t n_sections = 1 + rng.below(2);
      for (std::size_t ss = 0; ss < n_sections; ++ss) {
        SectionInput sec;
        sec.section_type = kNoteSections[rng.below(std::size(kNoteSections))];
        const std::size_t n_paragraphs = 1 + rng.below(2);
        for (std::size_t pp = 0; pp < n_paragraphs; ++pp) {
          ParagraphInput para;
          const std::size_t n_sents =
              1 + rng.below(2) + (nn + 1 == n_notes && ss + 1 == n_sections &&
                                          pp + 1 == n_paragraphs && cursor < topics.size()
                                      ? topics.size() - cursor
                                      : 0);
          for (std::size_t qq = 0; qq < n_sents; ++qq) {
            const std::size_t topic =
                cursor < topics.size() ? topics[cursor++] : 3 + rng.below(3);
            const std::string sent_id =
                adm.admission_id + ".s" + std::to_string(sent_counter++);
            para.sentences.push_back(make_sentence(
                sent_id,
                "Note remark " + sent_id + " concerning " + kTopics[topic].word + ".",
                {kTopics[topic].word, "attr" + sent_id}));
          }
          sec.paragraphs.push_back(std::move(para));
        }
        note.sections.push_back(std::move(sec));
      }
      adm.notes.push_back(std::move(note));
    }

    adm.summary.note_id = adm.admission_id + ".ds";
    adm.summary.date = "2120-01-09";
    for (std::size_t t = 0; t < kMappedTopics; ++t) {
      const std::string sent_id = adm.admission_id + ".ds" + std::to_string(t);
      SectionInput sec;
      sec.section_type = kTopics[t].section;
      // Every third admission blurs one summary topic so its alignment
      // flow drops below the prune quantile and starves.
      const bool blur = a % 3 == 2 && t == 0;
      SentenceInput sent = make_sentence(
          sent_id, "Summary statement " + sent_id + " on " + kTopics[t].word + ".",
          {std::string(kTopics[t].word) + (blur ? "_blur" : ""), "ds_attr" + sent_id});
      sec.paragraphs.push_back({{std::move(sent)}});
      adm.summary.sections.push_back(std::move(sec));
    }
    corpus.push_back(std::move(adm));
  }
  return corpus;
}

EmbeddingTable demo_embeddings(const std::vector<AdmissionInput>& admissions) {
  EmbeddingTable table(kEmbeddingDim);
  std::vector<double> v(kEmbeddingDim, 0.0);
  for (std::size_t t = 0; t < std::size(kTopics); ++t) {
    std::fill(v.begin(), v.end(), 0.0);
    v[t] = 1.0;
    table.insert(kTopics[t].word, v);
  }
  // Blurred topic: mostly heart with a lung component.
  std::fill(v.begin(), v.end(), 0.0);
  v[0] = 0.9;
  v[1] = std::sqrt(1.0 - 0.81);
  table.insert("heart_blur", v);

  // Sentence-level vectors for source sentences: the topic one-hot, so
  // the section classifier has a learnable signal.
  for (const AdmissionInput& adm : admissions)
    for (const NoteInput& note : adm.notes)
      for (const SectionInput& sec : note.sections)
        for (const ParagraphInput& para : sec.paragraphs)
          for (const SentenceInput& s : para.sentences) {
            const std::string& topic = *s.nodes.front().embedding_ref;
            table.insert(s.sent_id, *table.find(topic));
          }
  return table;
}

DemoFiles write_demo_files(std::size_t n_admissions, std::uint64_t seed,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DemoFiles files;
  files.dir = dir;
  files.corpus = dir / "corpus.jsonl";
  files.embeddings = dir / "embeddings.tsv";
  files.config = dir / "config.json";
  files.output_dir = dir / "run";

  const std::vector<AdmissionInput> corpus = demo_corpus(n_admissions, seed);
  {
    std::ofstream out(files.corpus, std::ios::binary);
    write_corpus(out, corpus);
  }
  {
    std::ofstream out(files.embeddings, std::ios::binary);
    write_embeddings(out, demo_embeddings(corpus));
  }
  {
    std::ofstream out(files.config, std::ios::binary);
    out << R"({
  "corpus": "corpus.jsonl",
  "embeddings": "embeddings.tsv",
  "output_dir": "run",
  "align": {"similarity_threshold": 0.8, "neighbor_order": 0,
            "min_sentence_flow": 0.1, "prune_quantile": 0.25, "max_iterations": 3},
  "split": {"train": 0.6, "test": 0.2, "validation": 0.2, "seed": 7},
  "model": {"learning_rate": 0.5, "epochs": 120, "l2": 0.0001, "seed": 7},
  "sections": ["history of present illness", "hospital course", "physical examination",
               "medications", "follow-up"]
})";
  }
  return files;
}

std::filesystem::path make_temp_dir(const std::string& hint) {
  static std::uint64_t counter = 0;
  Rng rng(0x5eedf00d ^ static_cast<std::uint64_t>(::getpid()) ^ ++counter);
  for (int tries = 0; tries < 32; ++tries) {
    auto dir = std::filesystem::temp_directory_path() /
               ("flowsum_" + hint + "_" + std::to_string(rng.next() % 1000000));
    std::error_code ec;
    if (std::filesystem::create_directories(dir, ec)) return dir;
  }
  throw std::runtime_error("cannot create temp dir");
}

int run_cli(const std::string& args, const std::filesystem::path& log_file) {
  const std::string cmd = std::string(FLOWSUM_CLI_PATH) + " " + args + " > " +
                          log_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::vector<std::string> list_files(const std::filesystem::path& root) {
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      files.push_back(std::filesystem::relative(entry.path(), root).string());
  std::sort(files.begin(), files.end());
  return files;
}

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<std::string> diff_dirs(const std::filesystem::path& a,
                                   const std::filesystem::path& b) {
  std::vector<std::string> problems;
  const auto fa = list_files(a), fb = list_files(b);
  if (fa != fb) {
    problems.push_back("file lists differ");
    return problems;
  }
  for (const std::string& rel : fa)
    if (slurp(a / rel) != slurp(b / rel)) problems.push_back("content differs: " + rel);
  return problems;
}

// ---------------------------------------------------------------------------
// Oracles

FlowUnits min_cut_bruteforce(std::uint32_t node_count, std::uint32_t source,
                             std::uint32_t sink, const std::vector<MaxFlowArc>& arcs) {
  // Enumerate subsets of the other nodes; source always in, sink out.
  std::vector<std::uint32_t> others;
  for (std::uint32_t v = 0; v < node_count; ++v)
    if (v != source && v != sink) others.push_back(v);

  FlowUnits best = std::numeric_limits<FlowUnits>::max();
  for (std::uint64_t mask = 0; mask < (1ull << others.size()); ++mask) {
    std::vector<char> in_cut(node_count, 0);
    in_cut[source] = 1;
    for (std::size_t i = 0; i < others.size(); ++i)
      if (mask & (1ull << i)) in_cut[others[i]] = 1;
    FlowUnits cut = 0;
    for (const MaxFlowArc& a : arcs)
      if (in_cut[a.from] && !in_cut[a.to]) cut += a.capacity;
    best = std::min(best, cut);
  }
  return best;
}

std::vector<SectionLabeledSentence> simulate_match(
    const std::vector<SentenceMatchCandidate>& cands, double min_flow,
    const std::map<std::string, std::string>& summary_section,
    const std::vector<std::string>& sources) {
  // Step 6: total flow per source sentence, sorted descending (ties by
  // ascending id).
  std::map<std::string, double> totals;
  for (const SentenceMatchCandidate& c : cands) totals[c.source_sent] += c.flow_mass;
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [id, total] : totals) ranked.emplace_back(-total, id);
  std::sort(ranked.begin(), ranked.end());

  // Step 7: strongest remaining summary sentence at or above the
  // threshold; the chosen summary sentence leaves the pool.
  std::vector<std::string> taken;
  std::map<std::string, std::pair<std::string, double>> chosen;  // src -> (smy, mass)
  for (const auto& [neg_total, src] : ranked) {
    std::string best_summary;
    double best_mass = -1;
    for (const SentenceMatchCandidate& c : cands) {
      if (c.source_sent != src || c.flow_mass < min_flow) continue;
      if (std::find(taken.begin(), taken.end(), c.summary_sent) != taken.end())
        continue;
      if (c.flow_mass > best_mass ||
          (c.flow_mass == best_mass && c.summary_sent < best_summary)) {
        best_mass = c.flow_mass;
        best_summary = c.summary_sent;
      }
    }
    if (best_mass < 0) continue;
    taken.push_back(best_summary);
    chosen[src] = {best_summary, best_mass};
  }

  // Step 8: everything unmatched gets no-section.
  std::vector<SectionLabeledSentence> out;
  for (const std::string& src : sources) {
    auto it = chosen.find(src);
    if (it == chosen.end()) {
      out.push_back({src, std::string(kNoSection), std::nullopt, 0.0});
    } else {
      out.push_back({src, summary_section.at(it->second.first), it->second.first,
                     it->second.second});
    }
  }
  return out;
}

RandomMatchCase random_match_case(Rng& rng) {
  RandomMatchCase c;
  const std::size_t n_src = 1 + rng.below(5);
  const std::size_t n_smy = 1 + rng.below(4);
  const char* sections[] = {"hospital course", "history of present illness",
                            "physical examination"};
  for (std::size_t j = 0; j < n_smy; ++j)
    c.summary_section["ds" + std::to_string(j)] = sections[j % 3];
  for (std::size_t i = 0; i < n_src; ++i) {
    c.sources.push_back("s" + std::to_string(i));
    for (std::size_t j = 0; j < n_smy; ++j)
      if (rng.below(100) < 60) {
        // Dyadic grid (k/16): frequent ties, and sums and scalings stay
        // exact in IEEE arithmetic.
        const double mass = static_cast<double>(1 + rng.below(20)) / 16.0;
        c.cands.push_back({c.sources.back(), "ds" + std::to_string(j), mass});
      }
  }
  return c;
}

}  // namespace flowsum::testsupport
