#include "flowsum/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "flowsum/errors.hpp"

namespace flowsum {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& ctx, const std::string& msg) {
  throw UserError(ctx + ": " + msg);
}

const json& field(const json& obj, const char* name, const std::string& ctx) {
  if (!obj.is_object()) bad(ctx, "expected an object");
  auto it = obj.find(name);
  if (it == obj.end()) bad(ctx, std::string("missing field '") + name + "'");
  return *it;
}

std::string str_field(const json& obj, const char* name, const std::string& ctx) {
  const json& v = field(obj, name, ctx);
  if (!v.is_string()) bad(ctx, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> opt_str_field(const json& obj, const char* name,
                                         const std::string& ctx) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) bad(ctx, std::string("field '") + name + "' must be a string");
  return it->get<std::string>();
}

const json& array_field(const json& obj, const char* name, const std::string& ctx) {
  const json& v = field(obj, name, ctx);
  if (!v.is_array()) bad(ctx, std::string("field '") + name + "' must be an array");
  return v;
}

NodeKind parse_kind(const std::string& kind, const std::string& ctx) {
  if (kind == "concept") return NodeKind::Concept;
  if (kind == "attribute") return NodeKind::Attribute;
  bad(ctx, "node kind must be 'concept' or 'attribute', got '" + kind + "'");
}

SentenceInput parse_sentence(const json& j, const std::string& ctx) {
  SentenceInput s;
  s.sent_id = str_field(j, "sent_id", ctx);
  s.text = str_field(j, "text", ctx);
  const json& graph = field(j, "graph", ctx);
  const std::string gctx = ctx + ".graph";
  s.root = str_field(graph, "root", gctx);
  for (const json& jn : array_field(graph, "nodes", gctx)) {
    const std::string nctx = gctx + ".nodes[" + std::to_string(s.nodes.size()) + "]";
    NodeInput n;
    n.id = str_field(jn, "id", nctx);
    n.kind = parse_kind(str_field(jn, "kind", nctx), nctx);
    n.label = str_field(jn, "label", nctx);
    n.concept_id = opt_str_field(jn, "concept_id", nctx);
    n.embedding_ref = opt_str_field(jn, "embedding_ref", nctx);
    s.nodes.push_back(std::move(n));
  }
  for (const json& je : array_field(graph, "edges", gctx)) {
    const std::string ectx = gctx + ".edges[" + std::to_string(s.edges.size()) + "]";
    s.edges.push_back({str_field(je, "src", ectx), str_field(je, "dst", ectx),
                       str_field(je, "label", ectx)});
  }
  return s;
}

std::vector<SectionInput> parse_sections(const json& j, const std::string& ctx) {
  std::vector<SectionInput> sections;
  for (const json& js : j) {
    const std::string sctx = ctx + "[" + std::to_string(sections.size()) + "]";
    SectionInput sec;
    sec.section_type = str_field(js, "section_type", sctx);
    for (const json& jp : array_field(js, "paragraphs", sctx)) {
      const std::string pctx =
          sctx + ".paragraphs[" + std::to_string(sec.paragraphs.size()) + "]";
      if (!jp.is_array()) bad(pctx, "paragraph must be an array of sentences");
      ParagraphInput para;
      for (const json& jsent : jp)
        para.sentences.push_back(parse_sentence(
            jsent, pctx + "[" + std::to_string(para.sentences.size()) + "]"));
      sec.paragraphs.push_back(std::move(para));
    }
    sections.push_back(std::move(sec));
  }
  return sections;
}

AdmissionInput parse_admission(const json& j, const std::string& where) {
  std::string ctx = where;
  AdmissionInput adm;
  adm.admission_id = str_field(j, "admission_id", ctx);
  ctx += ": admission '" + adm.admission_id + "'";
  for (const json& jn : array_field(j, "notes", ctx)) {
    const std::string nctx = ctx + ": notes[" + std::to_string(adm.notes.size()) + "]";
    NoteInput note;
    note.note_id = str_field(jn, "note_id", nctx);
    note.category = str_field(jn, "category", nctx);
    note.date = str_field(jn, "date", nctx);
    note.sections = parse_sections(array_field(jn, "sections", nctx), nctx + ".sections");
    adm.notes.push_back(std::move(note));
  }
  const json& ds = field(j, "discharge_summary", ctx);
  const std::string dctx = ctx + ": discharge_summary";
  adm.summary.note_id = str_field(ds, "note_id", dctx);
  adm.summary.date = str_field(ds, "date", dctx);
  adm.summary.sections =
      parse_sections(array_field(ds, "sections", dctx), dctx + ".sections");
  return adm;
}

void collect_sent_ids(const std::vector<SectionInput>& sections,
                      std::vector<std::string>& out) {
  for (const SectionInput& sec : sections)
    for (const ParagraphInput& para : sec.paragraphs)
      for (const SentenceInput& s : para.sentences) out.push_back(s.sent_id);
}

json sentence_to_json(const SentenceInput& s) {
  json nodes = json::array();
  for (const NodeInput& n : s.nodes) {
    json jn{{"id", n.id}, {"kind", n.kind == NodeKind::Concept ? "concept" : "attribute"},
            {"label", n.label}};
    if (n.concept_id) jn["concept_id"] = *n.concept_id;
    if (n.embedding_ref) jn["embedding_ref"] = *n.embedding_ref;
    nodes.push_back(std::move(jn));
  }
  json edges = json::array();
  for (const EdgeInput& e : s.edges)
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"label", e.label}});
  return json{{"sent_id", s.sent_id},
              {"text", s.text},
              {"graph", {{"root", s.root}, {"nodes", nodes}, {"edges", edges}}}};
}

json sections_to_json(const std::vector<SectionInput>& sections) {
  json out = json::array();
  for (const SectionInput& sec : sections) {
    json paragraphs = json::array();
    for (const ParagraphInput& para : sec.paragraphs) {
      json sentences = json::array();
      for (const SentenceInput& s : para.sentences)
        sentences.push_back(sentence_to_json(s));
      paragraphs.push_back(std::move(sentences));
    }
    out.push_back({{"section_type", sec.section_type}, {"paragraphs", paragraphs}});
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// EmbeddingTable

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw UserError("embedding dimension must be positive");
}

void EmbeddingTable::insert(std::string ref, std::vector<double> values) {
  if (values.size() != dimension_)
    throw UserError("embedding '" + ref + "': expected dimension " +
                    std::to_string(dimension_) + ", got " +
                    std::to_string(values.size()));
  for (double v : values)
    if (!std::isfinite(v))
      throw UserError("embedding '" + ref + "': non-finite value");
  if (index_.count(ref))
    throw UserError("duplicate embedding ref '" + ref + "'");
  index_.emplace(ref, entries_.size());
  entries_.emplace_back(std::move(ref), std::move(values));
}

const std::vector<double>* EmbeddingTable::find(std::string_view ref) const {
  auto it = index_.find(std::string(ref));
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

std::vector<double> EmbeddingTable::node_vector(const SemanticNode& node) const {
  const std::string& key = node.embedding_ref ? *node.embedding_ref : node.label;
  if (const std::vector<double>* v = find(key)) return *v;
  return fallback_vector(node.label, dimension_);
}

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<double> fallback_vector(std::string_view key, std::size_t dimension) {
  std::uint64_t state = fnv1a64(key);
  std::vector<double> v(dimension);
  for (double& x : v) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    x = 2.0 * u - 1.0;
  }
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm < 1e-12) {
    v.assign(dimension, 0.0);
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

// ---------------------------------------------------------------------------
// Corpus

CorpusLoadResult load_corpus(const std::filesystem::path& path,
                             const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open corpus file: " + path.string());
  return load_corpus(in, options);
}

CorpusLoadResult load_corpus(std::istream& in, const LoadOptions& options) {
  CorpusLoadResult result;
  std::unordered_set<std::string> admission_ids;
  std::unordered_set<std::string> sent_ids;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = "corpus line " + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      if (options.strict) bad(where, e.what());
      result.issues.push_back({lineno, "", e.what()});
      continue;
    }

    if (!saw_header) {
      const json& ver = field(j, "format_version", where);
      if (!ver.is_number_integer() || ver.get<int>() != kCorpusFormatVersion)
        bad(where, "unsupported corpus format_version");
      saw_header = true;
      continue;
    }

    std::string admission_id;
    try {
      AdmissionInput adm = parse_admission(j, where);
      admission_id = adm.admission_id;
      if (!admission_ids.insert(adm.admission_id).second)
        bad(where, "duplicate admission_id '" + adm.admission_id + "'");
      std::vector<std::string> ids;
      for (const NoteInput& note : adm.notes) collect_sent_ids(note.sections, ids);
      collect_sent_ids(adm.summary.sections, ids);
      for (const std::string& id : ids)
        if (!sent_ids.insert(id).second)
          bad(where + ": admission '" + adm.admission_id + "'",
              "duplicate sent_id '" + id + "'");
      // Every returned admission must build cleanly, so later stages
      // never trip over graph-level defects.
      try {
        build_admission_graph(adm);
      } catch (const UserError& e) {
        bad(where, e.what());
      }
      result.admissions.push_back(std::move(adm));
    } catch (const UserError& e) {
      if (options.strict) throw;
      result.issues.push_back({lineno, admission_id, e.what()});
    }
  }
  if (!saw_header) throw UserError("corpus file has no format_version header line");
  return result;
}

void write_corpus(std::ostream& out, const std::vector<AdmissionInput>& admissions) {
  out << json{{"format_version", kCorpusFormatVersion}}.dump() << '\n';
  for (const AdmissionInput& adm : admissions) {
    json notes = json::array();
    for (const NoteInput& note : adm.notes)
      notes.push_back({{"note_id", note.note_id},
                       {"category", note.category},
                       {"date", note.date},
                       {"sections", sections_to_json(note.sections)}});
    json j{{"admission_id", adm.admission_id},
           {"notes", notes},
           {"discharge_summary",
            {{"note_id", adm.summary.note_id},
             {"date", adm.summary.date},
             {"sections", sections_to_json(adm.summary.sections)}}}};
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open embedding file: " + path.string());
  return load_embeddings(in, path.string());
}

namespace {

std::pair<std::string, std::string> split_tab(const std::string& line,
                                              const std::string& ctx) {
  const auto tab = line.find('\t');
  if (tab == std::string::npos) bad(ctx, "expected a tab-separated line");
  return {line.substr(0, tab), line.substr(tab + 1)};
}

long parse_long(const std::string& text, const std::string& ctx) {
  long value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    bad(ctx, "expected an integer, got '" + text + "'");
  return value;
}

}  // namespace

EmbeddingTable load_embeddings(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line))
      throw UserError(name + ": missing " + what + " line");
    ++lineno;
  };

  next_line("format_version header");
  auto [vkey, vval] = split_tab(line, name + " line 1");
  if (vkey != "format_version" || parse_long(vval, name + " line 1") != kEmbeddingFormatVersion)
    throw UserError(name + ": unsupported embedding format_version");

  next_line("dimension header");
  auto [dkey, dval] = split_tab(line, name + " line 2");
  if (dkey != "dimension") throw UserError(name + ": second header line must be 'dimension'");
  const long dim = parse_long(dval, name + " line 2");
  if (dim <= 0) throw UserError(name + ": dimension must be positive");

  EmbeddingTable table(static_cast<std::size_t>(dim));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    ++row;
    if (line.empty()) continue;
    const std::string ctx = name + " row " + std::to_string(row);
    auto [ref, rest] = split_tab(line, ctx);
    std::vector<double> values;
    const char* p = rest.data();
    const char* end = rest.data() + rest.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) bad(ctx, "malformed float");
      values.push_back(v);
      p = res.ptr;
    }
    if (values.size() != static_cast<std::size_t>(dim))
      bad(ctx, "dimension mismatch: expected " + std::to_string(dim) + " values, got " +
                   std::to_string(values.size()));
    for (double v : values)
      if (!std::isfinite(v)) bad(ctx, "non-finite value");
    try {
      table.insert(std::move(ref), std::move(values));
    } catch (const UserError& e) {
      bad(ctx, e.what());
    }
  }
  return table;
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << "format_version\t" << kEmbeddingFormatVersion << '\n';
  out << "dimension\t" << table.dimension() << '\n';
  for (const auto& [ref, values] : table.entries()) {
    out << ref << '\t';
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out << ' ';
      out << format_double(values[i]);
    }
    out << '\n';
  }
}

std::vector<std::string> unresolved_refs(const std::vector<AdmissionInput>& admissions,
                                         const EmbeddingTable& table) {
  std::set<std::string> missing;
  auto scan_sections = [&](const std::vector<SectionInput>& sections) {
    for (const SectionInput& sec : sections)
      for (const ParagraphInput& para : sec.paragraphs)
        for (const SentenceInput& s : para.sentences)
          for (const NodeInput& n : s.nodes)
            if (n.embedding_ref && !table.find(*n.embedding_ref))
              missing.insert(*n.embedding_ref);
  };
  for (const AdmissionInput& adm : admissions) {
    for (const NoteInput& note : adm.notes) scan_sections(note.sections);
    scan_sections(adm.summary.sections);
  }
  return {missing.begin(), missing.end()};
}

}  // namespace flowsum
