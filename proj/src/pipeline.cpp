#include "flowsum/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <cctype>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"

#include "flowsum/errors.hpp"
#include "flowsum/generate.hpp"
#include "flowsum/ingest.hpp"
#include "flowsum/match.hpp"
#include "flowsum/metrics.hpp"

namespace flowsum {

using nlohmann::json;

namespace {

constexpr const char* kAlignmentsFile = "alignments.jsonl";
constexpr const char* kGraphStatsFile = "graph_stats.tsv";
constexpr const char* kMatchesFile = "matches.jsonl";
constexpr const char* kMatchTraceFile = "match_trace.txt";
constexpr const char* kLabelCountsFile = "label_counts.tsv";
constexpr const char* kContingencyFile = "contingency.tsv";
constexpr const char* kModelFile = "model.json";
constexpr const char* kTestMetricsFile = "test_metrics.tsv";
constexpr const char* kSummariesDir = "summaries";
constexpr const char* kFaithfulnessFile = "faithfulness.tsv";
constexpr const char* kAutoMetricsFile = "auto_metrics.tsv";
constexpr const char* kAutoMetricsPerAdmission = "auto_metrics_admissions.tsv";

const char* dataset_file(std::size_t split) {
  static const char* names[] = {"dataset_train.jsonl", "dataset_test.jsonl",
                                "dataset_validation.jsonl"};
  return names[split];
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write " + path.string());
  return out;
}

// Admission ids become file names; keep them shell- and path-safe.
std::string safe_filename(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-')
      c = '_';
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, const char* hint) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw UserError("cannot open " + path.string() + "; run '" + hint + "' first");
  return in;
}

// fn(i) over [0, count), spread across workers. Exceptions are collected
// and the first one rethrown after all threads join.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  unsigned n = workers ? workers : std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  n = static_cast<unsigned>(std::min<std::size_t>(n, count));
  if (n == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr error;
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (unsigned t = 0; t < n; ++t)
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

struct Inputs {
  std::vector<AdmissionInput> admissions;
  EmbeddingTable table{1};
};

Inputs load_inputs(const PipelineConfig& cfg) {
  Inputs in;
  CorpusLoadResult corpus = load_corpus(cfg.corpus, {cfg.strict});
  for (const LoadIssue& issue : corpus.issues)
    std::cerr << "warning: corpus line " << issue.line << ": " << issue.message
              << " (admission skipped)\n";
  in.admissions = std::move(corpus.admissions);
  in.table = load_embeddings(cfg.embeddings);

  const std::vector<std::string> missing = unresolved_refs(in.admissions, in.table);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << missing.size() << " embedding ref(s) do not resolve:";
    for (const std::string& ref : missing) msg << ' ' << ref;
    if (cfg.strict) throw UserError(msg.str());
    std::cerr << "warning: " << msg.str() << " (label-hash fallback in effect)\n";
  }
  return in;
}

// ---------------------------------------------------------------------------
// Artifact records

struct AlignmentArtifact {
  struct Edge {
    std::string src_sent;
    std::size_t src_node = 0;
    std::string dst_sent;
    std::size_t dst_node = 0;
    double similarity = 0, capacity = 0, flow = 0;
  };
  std::string admission_id;
  unsigned iterations = 0;
  std::vector<Edge> edges;
};

json alignment_to_json(const AdmissionGraph& g, const AlignedGraph& aligned) {
  json edges = json::array();
  for (const AlignmentEdge& e : aligned.edges) {
    const Sentence& src = g.sentence_of_node(e.src);
    const Sentence& dst = g.sentence_of_node(e.dst);
    edges.push_back({{"src_sent", src.sent_id},
                     {"src_node", src.local_index(e.src)},
                     {"dst_sent", dst.sent_id},
                     {"dst_node", dst.local_index(e.dst)},
                     {"similarity", e.similarity},
                     {"capacity", e.capacity},
                     {"flow", e.flow}});
  }
  return json{{"admission_id", g.admission_id},
              {"iterations", aligned.iterations},
              {"edges", edges}};
}

// One artifact line; json type/parse errors become UserErrors naming
// the file and line.
json parse_artifact_line(const std::filesystem::path& path, const std::string& line,
                         std::size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw UserError(path.string() + " line " + std::to_string(lineno) +
                    ": malformed JSON");
  return j;
}

[[noreturn]] void artifact_error(const std::filesystem::path& path,
                                 std::size_t lineno, const std::exception& e) {
  throw UserError(path.string() + " line " + std::to_string(lineno) + ": " +
                  e.what());
}

std::unordered_map<std::string, AlignmentArtifact> load_alignments(
    const std::filesystem::path& path) {
  std::ifstream in = open_in(path, "align");
  std::unordered_map<std::string, AlignmentArtifact> out;
  std::string line;
  bool saw_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_artifact_line(path, line, lineno);
    try {
      if (!saw_header) {
        if (j.value("format_version", 0) != 1)
          throw UserError(path.string() + ": unsupported format_version");
        saw_header = true;
        continue;
      }
      AlignmentArtifact art;
      art.admission_id = j.at("admission_id").get<std::string>();
      art.iterations = j.at("iterations").get<unsigned>();
      for (const json& je : j.at("edges")) {
        AlignmentArtifact::Edge e;
        e.src_sent = je.at("src_sent").get<std::string>();
        e.src_node = je.at("src_node").get<std::size_t>();
        e.dst_sent = je.at("dst_sent").get<std::string>();
        e.dst_node = je.at("dst_node").get<std::size_t>();
        e.similarity = je.at("similarity").get<double>();
        e.capacity = je.at("capacity").get<double>();
        e.flow = je.at("flow").get<double>();
        art.edges.push_back(std::move(e));
      }
      out.emplace(art.admission_id, std::move(art));
    } catch (const json::exception& e) {
      artifact_error(path, lineno, e);
    }
  }
  return out;
}

// Rebind an alignment artifact to a freshly built graph.
AlignedGraph bind_alignment(const AdmissionGraph& g, const AlignmentArtifact& art) {
  AlignedGraph aligned;
  aligned.graph = &g;
  aligned.iterations = art.iterations;
  for (const AlignmentArtifact::Edge& ae : art.edges) {
    const Sentence* src = g.find_sentence(ae.src_sent);
    const Sentence* dst = g.find_sentence(ae.dst_sent);
    if (!src || ae.src_node >= src->nodes.size() || !dst ||
        ae.dst_node >= dst->nodes.size())
      throw UserError("alignment artifact for admission '" + g.admission_id +
                      "' does not match the corpus (sentence '" +
                      (src ? ae.dst_sent : ae.src_sent) + "')");
    aligned.edges.push_back({src->nodes[ae.src_node], dst->nodes[ae.dst_node],
                             ae.similarity, ae.capacity, ae.flow});
  }
  return aligned;
}

json match_to_json(const std::string& admission_id,
                   const std::vector<SectionLabeledSentence>& labels) {
  json sentences = json::array();
  for (const SectionLabeledSentence& l : labels) {
    json j{{"source_sent", l.source_sent},
           {"label", l.label},
           {"flow_mass", l.flow_mass}};
    j["matched_summary_sent"] =
        l.matched_summary_sent ? json(*l.matched_summary_sent) : json(nullptr);
    sentences.push_back(std::move(j));
  }
  return json{{"admission_id", admission_id}, {"sentences", sentences}};
}

std::unordered_map<std::string, std::vector<SectionLabeledSentence>> load_matches(
    const std::filesystem::path& path) {
  std::ifstream in = open_in(path, "match");
  std::unordered_map<std::string, std::vector<SectionLabeledSentence>> out;
  std::string line;
  bool saw_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_artifact_line(path, line, lineno);
    try {
      if (!saw_header) {
        if (j.value("format_version", 0) != 1)
          throw UserError(path.string() + ": unsupported format_version");
        saw_header = true;
        continue;
      }
      std::vector<SectionLabeledSentence> labels;
      for (const json& js : j.at("sentences")) {
        SectionLabeledSentence l;
        l.source_sent = js.at("source_sent").get<std::string>();
        l.label = js.at("label").get<std::string>();
        if (!js.at("matched_summary_sent").is_null())
          l.matched_summary_sent = js.at("matched_summary_sent").get<std::string>();
        l.flow_mass = js.at("flow_mass").get<double>();
        labels.push_back(std::move(l));
      }
      out.emplace(j.at("admission_id").get<std::string>(), std::move(labels));
    } catch (const json::exception& e) {
      artifact_error(path, lineno, e);
    }
  }
  return out;
}

std::vector<DatasetRow> load_dataset_rows(const std::filesystem::path& path,
                                          const char* hint) {
  std::ifstream in = open_in(path, hint);
  std::vector<DatasetRow> rows;
  std::string line;
  bool saw_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_artifact_line(path, line, lineno);
    try {
      if (!saw_header) {
        if (j.value("format_version", 0) != 1)
          throw UserError(path.string() + ": unsupported format_version");
        saw_header = true;
        continue;
      }
      rows.push_back({j.at("admission_id").get<std::string>(),
                      j.at("source_sent").get<std::string>(),
                      j.at("text").get<std::string>(),
                      j.at("embedding_ref").get<std::string>(),
                      j.at("note_category").get<std::string>(),
                      j.at("note_section_type").get<std::string>(),
                      j.at("label").get<std::string>()});
    } catch (const json::exception& e) {
      artifact_error(path, lineno, e);
    }
  }
  return rows;
}

void write_dataset_rows(const std::filesystem::path& path,
                        const std::vector<DatasetRow>& rows) {
  std::ofstream out = open_out(path);
  out << json{{"format_version", 1}}.dump() << '\n';
  for (const DatasetRow& r : rows)
    out << json{{"admission_id", r.admission_id},
                {"source_sent", r.source_sent},
                {"text", r.text},
                {"embedding_ref", r.embedding_ref},
                {"note_category", r.note_category},
                {"note_section_type", r.note_section_type},
                {"label", r.label}}
               .dump()
        << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

const std::vector<std::string>& default_sections() {
  static const std::vector<std::string> sections{
      "history of present illness", "hospital course", "physical examination",
      "medications", "follow-up"};
  return sections;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

void check_known_keys(const json& j, std::initializer_list<const char*> known,
                      const std::string& ctx) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end())
      throw UserError("config: unknown key '" + ctx + key + "'");
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw UserError("config " + path.string() + ": " + e.what());
  }
  check_known_keys(j,
                   {"corpus", "embeddings", "output_dir", "align", "split", "model",
                    "sections", "strict", "workers", "dump_networks"},
                   "");

  const std::filesystem::path base = path.parent_path();
  PipelineConfig cfg;
  if (!j.contains("corpus") || !j.contains("embeddings") || !j.contains("output_dir"))
    throw UserError("config: 'corpus', 'embeddings' and 'output_dir' are required");
  cfg.corpus = resolve(base, j.at("corpus").get<std::string>());
  cfg.embeddings = resolve(base, j.at("embeddings").get<std::string>());
  cfg.output_dir = resolve(base, j.at("output_dir").get<std::string>());

  if (j.contains("align")) {
    const json& a = j.at("align");
    check_known_keys(a,
                     {"similarity_threshold", "neighbor_order", "min_sentence_flow",
                      "prune_quantile", "max_iterations"},
                     "align.");
    cfg.align.similarity_threshold =
        a.value("similarity_threshold", cfg.align.similarity_threshold);
    cfg.align.neighbor_order = a.value("neighbor_order", cfg.align.neighbor_order);
    cfg.align.min_sentence_flow =
        a.value("min_sentence_flow", cfg.align.min_sentence_flow);
    cfg.align.prune_quantile = a.value("prune_quantile", cfg.align.prune_quantile);
    cfg.align.max_iterations = a.value("max_iterations", cfg.align.max_iterations);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    check_known_keys(s, {"train", "test", "validation", "seed"}, "split.");
    cfg.split.train = s.value("train", cfg.split.train);
    cfg.split.test = s.value("test", cfg.split.test);
    cfg.split.validation = s.value("validation", cfg.split.validation);
    cfg.split.seed = s.value("seed", cfg.split.seed);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_known_keys(
        m, {"learning_rate", "epochs", "l2", "seed", "hidden_size", "dropout"},
        "model.");
    cfg.model.learning_rate = m.value("learning_rate", cfg.model.learning_rate);
    cfg.model.epochs = m.value("epochs", cfg.model.epochs);
    cfg.model.l2 = m.value("l2", cfg.model.l2);
    cfg.model.seed = m.value("seed", cfg.model.seed);
    cfg.model.hidden_size = m.value("hidden_size", cfg.model.hidden_size);
    cfg.model.dropout = m.value("dropout", cfg.model.dropout);
  }
  cfg.sections = j.value("sections", default_sections());
  cfg.strict = j.value("strict", false);
  cfg.workers = j.value("workers", 0u);
  cfg.dump_networks = j.value("dump_networks", false);
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  align.validate();
  split.validate();
  model.validate();
  if (sections.empty()) throw UserError("config: section vocabulary is empty");
  for (const std::string& s : sections)
    if (s == kNoSection)
      throw UserError("config: '" + std::string(kNoSection) +
                      "' is reserved and cannot be a section");
}

// ---------------------------------------------------------------------------
// Stages

void cmd_align(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  if (cfg.dump_networks)
    std::filesystem::create_directories(cfg.output_dir / "networks");

  struct Result {
    json line;
    std::string stats_row;
    std::string dot;
    std::array<double, 6> stats{};
  };
  std::vector<Result> results(in.admissions.size());

  parallel_for(in.admissions.size(), cfg.workers, [&](std::size_t i) {
    const AdmissionGraph g = build_admission_graph(in.admissions[i]);
    const AlignedGraph aligned = align(g, cfg.align, in.table);

    std::set<NodeId> src_aligned, dst_aligned;
    for (const AlignmentEdge& e : aligned.edges) {
      src_aligned.insert(e.src);
      dst_aligned.insert(e.dst);
    }
    const auto [src_reent, dst_reent] = count_reentrancies(g);
    Result& r = results[i];
    r.stats = {static_cast<double>(alignable_nodes(g, Component::Source).size()),
               static_cast<double>(alignable_nodes(g, Component::Summary).size()),
               static_cast<double>(src_aligned.size()),
               static_cast<double>(dst_aligned.size()),
               static_cast<double>(src_reent),
               static_cast<double>(dst_reent)};
    std::ostringstream row;
    row << g.admission_id;
    for (double v : r.stats) row << '\t' << static_cast<std::size_t>(v);
    r.stats_row = row.str();
    r.line = alignment_to_json(g, aligned);
    if (cfg.dump_networks) {
      std::ostringstream dot;
      write_network_dot(dot, aligned.network, g);
      r.dot = dot.str();
    }
  });

  std::ofstream alignments = open_out(cfg.output_dir / kAlignmentsFile);
  alignments << json{{"format_version", 1}}.dump() << '\n';
  for (const Result& r : results) alignments << r.line.dump() << '\n';

  std::ofstream stats = open_out(cfg.output_dir / kGraphStatsFile);
  stats << "admission_id\tsrc_alignable\tsmy_alignable\tsrc_aligned\tsmy_aligned"
           "\tsrc_reentrancies\tsmy_reentrancies\n";
  std::array<double, 6> mean{};
  for (const Result& r : results) {
    stats << r.stats_row << '\n';
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += r.stats[k];
  }
  if (!results.empty()) {
    stats << "mean";
    for (double v : mean)
      stats << '\t' << format_double(v / static_cast<double>(results.size()));
    stats << '\n';
  }

  if (cfg.dump_networks)
    for (std::size_t i = 0; i < results.size(); ++i)
      open_out(cfg.output_dir / "networks" /
               (safe_filename(in.admissions[i].admission_id) + ".dot"))
          << results[i].dot;

  std::cerr << "aligned " << results.size() << " admission(s)\n";
}

void cmd_match(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const auto artifacts = load_alignments(cfg.output_dir / kAlignmentsFile);
  std::filesystem::create_directories(cfg.output_dir);

  std::ofstream matches = open_out(cfg.output_dir / kMatchesFile);
  matches << json{{"format_version", 1}}.dump() << '\n';
  std::ofstream trace = open_out(cfg.output_dir / kMatchTraceFile);

  for (const AdmissionInput& adm : in.admissions) {
    auto it = artifacts.find(adm.admission_id);
    if (it == artifacts.end())
      throw UserError("no alignment artifact for admission '" + adm.admission_id +
                      "'; re-run 'align'");
    const AdmissionGraph g = build_admission_graph(adm);
    const AlignedGraph aligned = bind_alignment(g, it->second);

    const auto index = index_aligned_nodes(aligned);
    const auto cands = collect_candidates(aligned, index);
    std::map<std::string, std::string> summary_section;
    std::vector<std::string> sources;
    for (const Sentence& sent : g.sentences) {
      if (sent.component == Component::Source)
        sources.push_back(sent.sent_id);
      else
        summary_section[sent.sent_id] = sent.section_type;
    }
    const auto labels =
        greedy_match(cands, cfg.align.min_sentence_flow, summary_section, sources);

    for (const SentenceMatchCandidate& c : cands)
      trace << adm.admission_id << "\tcandidate\t" << c.source_sent << '\t'
            << c.summary_sent << '\t' << format_double(c.flow_mass) << '\n';
    for (const SectionLabeledSentence& l : labels) {
      if (l.matched_summary_sent)
        trace << adm.admission_id << "\tmatch\t" << l.source_sent << '\t'
              << *l.matched_summary_sent << '\t' << l.label << '\t'
              << format_double(l.flow_mass) << '\n';
      else
        trace << adm.admission_id << "\tno-section\t" << l.source_sent << '\n';
    }
    matches << match_to_json(adm.admission_id, labels).dump() << '\n';
  }
  std::cerr << "matched " << in.admissions.size() << " admission(s)\n";
}

void cmd_dataset(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const auto matches = load_matches(cfg.output_dir / kMatchesFile);

  std::vector<std::vector<DatasetRow>> per_admission;
  std::vector<AdmissionGraph> graphs;
  graphs.reserve(in.admissions.size());
  std::vector<MatchedAdmission> matched;
  for (const AdmissionInput& adm : in.admissions) {
    auto it = matches.find(adm.admission_id);
    if (it == matches.end())
      throw UserError("no match artifact for admission '" + adm.admission_id +
                      "'; re-run 'match'");
    graphs.push_back(build_admission_graph(adm));
    per_admission.push_back(build_rows(graphs.back(), it->second, cfg.sections));
    matched.push_back({&graphs.back(), it->second});
  }

  const DatasetSplits splits = emit_dataset(per_admission, cfg.split);
  write_dataset_rows(cfg.output_dir / dataset_file(0), splits.train);
  write_dataset_rows(cfg.output_dir / dataset_file(1), splits.test);
  write_dataset_rows(cfg.output_dir / dataset_file(2), splits.validation);

  std::ofstream counts = open_out(cfg.output_dir / kLabelCountsFile);
  counts << "section\ttrain\ttest\tvalidation\n";
  for (const auto& [label, row] : label_counts(splits, cfg.sections))
    counts << label << '\t' << row[0] << '\t' << row[1] << '\t' << row[2] << '\n';

  const auto table = contingency_table(matched);
  std::set<std::string> section_cols;
  for (const auto& [category, cells] : table)
    for (const auto& [section, mass] : cells) section_cols.insert(section);
  std::ofstream cont = open_out(cfg.output_dir / kContingencyFile);
  cont << "category";
  for (const std::string& s : section_cols) cont << '\t' << s;
  cont << "\ttotal\n";
  double grand = 0;
  for (const auto& [category, cells] : table) {
    cont << category;
    double row_total = 0;
    for (const std::string& s : section_cols) {
      const auto it = cells.find(s);
      const double v = it == cells.end() ? 0.0 : it->second;
      row_total += v;
      cont << '\t' << format_double(v);
    }
    grand += row_total;
    cont << '\t' << format_double(row_total) << '\n';
  }
  cont << "total";
  for (std::size_t i = 0; i < section_cols.size(); ++i) cont << '\t';
  cont << format_double(grand) << '\n';

  std::cerr << "dataset: " << splits.train.size() << " train, " << splits.test.size()
            << " test, " << splits.validation.size() << " validation row(s)\n";
}

void cmd_train(const PipelineConfig& cfg) {
  const EmbeddingTable table = load_embeddings(cfg.embeddings);
  const std::vector<DatasetRow> train_rows =
      load_dataset_rows(cfg.output_dir / dataset_file(0), "dataset");
  const std::vector<DatasetRow> test_rows =
      load_dataset_rows(cfg.output_dir / dataset_file(1), "dataset");

  const FeatureSpec spec = make_feature_spec(train_rows, table.dimension());
  std::vector<std::string> classes = cfg.sections;
  classes.push_back(std::string(kNoSection));

  const auto model = train_linear(train_rows, table, spec, classes, cfg.model);
  {
    std::ofstream out = open_out(cfg.output_dir / kModelFile);
    model->save(out);
  }

  if (test_rows.empty()) {
    std::cerr << "warning: empty test split, skipping evaluation\n";
    return;
  }
  const ClassifierMetrics m = evaluate(*model, test_rows, table);
  std::ofstream out = open_out(cfg.output_dir / kTestMetricsFile);
  out << "class\tprecision\trecall\tf1\tsupport\n";
  for (std::size_t c = 0; c < m.classes.size(); ++c)
    out << m.classes[c] << '\t' << format_double(m.per_class[c].precision) << '\t'
        << format_double(m.per_class[c].recall) << '\t'
        << format_double(m.per_class[c].f1) << '\t' << m.per_class[c].support << '\n';
  out << "micro_f1\t" << format_double(m.micro_f1) << '\n';
  out << "macro_f1\t" << format_double(m.macro_f1) << '\n';
  out << "weighted_f1\t" << format_double(m.weighted_f1) << '\n';
  out << "accuracy\t" << format_double(m.accuracy) << '\n';
  std::cerr << "trained on " << train_rows.size() << " row(s); weighted F1 "
            << format_double(m.weighted_f1) << " on " << test_rows.size()
            << " test row(s)\n";
}

void cmd_generate(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  std::ifstream model_in = open_in(cfg.output_dir / kModelFile, "train");
  const std::unique_ptr<SectionClassifier> model = load_classifier(model_in);
  const std::vector<DatasetRow> test_rows =
      load_dataset_rows(cfg.output_dir / dataset_file(1), "dataset");

  std::set<std::string> test_ids;
  for (const DatasetRow& r : test_rows) test_ids.insert(r.admission_id);

  std::vector<const AdmissionInput*> targets;
  for (const AdmissionInput& adm : in.admissions)
    if (test_ids.count(adm.admission_id)) targets.push_back(&adm);

  std::filesystem::create_directories(cfg.output_dir / kSummariesDir);
  GenerateOptions options;
  options.section_order = cfg.sections;

  struct Result {
    std::string text;
    std::string provenance;
    std::size_t sentences = 0;
    std::size_t violations = 0;
  };
  std::vector<Result> results(targets.size());

  parallel_for(targets.size(), cfg.workers, [&](std::size_t i) {
    const AdmissionGraph g = build_admission_graph(*targets[i]);
    const GeneratedSummary summary = generate_summary(*model, g, in.table, options);
    const FaithfulnessReport report = verify_faithfulness(summary, g);
    std::ostringstream text, prov;
    write_summary_text(text, summary);
    write_provenance_json(prov, summary);
    results[i] = {text.str(), prov.str(), report.sentences_checked,
                  report.violations.size()};
  });

  std::ofstream faith = open_out(cfg.output_dir / kFaithfulnessFile);
  faith << "admission_id\tsentences\tviolations\n";
  std::size_t total_violations = 0, total_sentences = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    open_out(cfg.output_dir / kSummariesDir / (safe_filename(targets[i]->admission_id) + ".txt"))
        << results[i].text;
    open_out(cfg.output_dir / kSummariesDir /
             (safe_filename(targets[i]->admission_id) + ".provenance.json"))
        << results[i].provenance;
    faith << targets[i]->admission_id << '\t' << results[i].sentences << '\t'
          << results[i].violations << '\n';
    total_sentences += results[i].sentences;
    total_violations += results[i].violations;
  }
  faith << "total\t" << total_sentences << '\t' << total_violations << '\n';

  if (total_violations != 0)
    throw std::runtime_error("faithfulness violations in generated output");
  std::cerr << "generated " << targets.size() << " summaries, " << total_sentences
            << " sentence(s), 0 faithfulness violation(s)\n";
}

void cmd_eval(const PipelineConfig& cfg) {
  CorpusLoadResult corpus = load_corpus(cfg.corpus, {cfg.strict});
  for (const LoadIssue& issue : corpus.issues)
    std::cerr << "warning: corpus line " << issue.line << ": " << issue.message
              << " (admission skipped)\n";
  std::filesystem::create_directories(cfg.output_dir);

  std::vector<MetricReport> reports(corpus.admissions.size());
  parallel_for(corpus.admissions.size(), cfg.workers,
               [&](std::size_t i) { reports[i] = compare_antecedents(corpus.admissions[i]); });

  std::ofstream per = open_out(cfg.output_dir / kAutoMetricsPerAdmission);
  per << "admission_id\trouge1_p\trouge1_r\trouge1_f1\trouge2_p\trouge2_r\trouge2_f1"
         "\trougeL_p\trougeL_r\trougeL_f1\tbleu\n";
  MetricReport mean;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const MetricReport& r = reports[i];
    per << corpus.admissions[i].admission_id;
    for (double v : {r.rouge1.precision, r.rouge1.recall, r.rouge1.f1,
                     r.rouge2.precision, r.rouge2.recall, r.rouge2.f1,
                     r.rouge_l.precision, r.rouge_l.recall, r.rouge_l.f1, r.bleu})
      per << '\t' << format_double(v);
    per << '\n';
    mean.rouge1.precision += r.rouge1.precision;
    mean.rouge1.recall += r.rouge1.recall;
    mean.rouge1.f1 += r.rouge1.f1;
    mean.rouge2.precision += r.rouge2.precision;
    mean.rouge2.recall += r.rouge2.recall;
    mean.rouge2.f1 += r.rouge2.f1;
    mean.rouge_l.precision += r.rouge_l.precision;
    mean.rouge_l.recall += r.rouge_l.recall;
    mean.rouge_l.f1 += r.rouge_l.f1;
    mean.bleu += r.bleu;
  }

  std::ofstream out = open_out(cfg.output_dir / kAutoMetricsFile);
  out << "metric\tvalue\n";
  const double n = reports.empty() ? 1.0 : static_cast<double>(reports.size());
  out << "rouge1_precision\t" << format_double(mean.rouge1.precision / n) << '\n';
  out << "rouge1_recall\t" << format_double(mean.rouge1.recall / n) << '\n';
  out << "rouge1_f1\t" << format_double(mean.rouge1.f1 / n) << '\n';
  out << "rouge2_precision\t" << format_double(mean.rouge2.precision / n) << '\n';
  out << "rouge2_recall\t" << format_double(mean.rouge2.recall / n) << '\n';
  out << "rouge2_f1\t" << format_double(mean.rouge2.f1 / n) << '\n';
  out << "rougeL_precision\t" << format_double(mean.rouge_l.precision / n) << '\n';
  out << "rougeL_recall\t" << format_double(mean.rouge_l.recall / n) << '\n';
  out << "rougeL_f1\t" << format_double(mean.rouge_l.f1 / n) << '\n';
  out << "bleu\t" << format_double(mean.bleu / n) << '\n';
  std::cerr << "evaluated " << reports.size() << " admission(s)\n";
}

void cmd_run_all(const PipelineConfig& cfg) {
  cmd_align(cfg);
  cmd_match(cfg);
  cmd_dataset(cfg);
  cmd_train(cfg);
  cmd_generate(cfg);
  cmd_eval(cfg);
}

}  // namespace flowsum
