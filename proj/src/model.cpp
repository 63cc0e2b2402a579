#include "flowsum/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>

#include "json.hpp"

#include "flowsum/errors.hpp"

namespace flowsum {

using nlohmann::json;

void ModelConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate))
    throw UserError("model: learning_rate must be positive");
  if (epochs == 0) throw UserError("model: epochs must be >= 1");
  if (l2 < 0 || !std::isfinite(l2)) throw UserError("model: l2 must be non-negative");
}

FeatureSpec make_feature_spec(const std::vector<DatasetRow>& rows,
                              std::size_t embedding_dim) {
  std::set<std::string> categories{std::string(kUnknownTag)};
  std::set<std::string> sections{std::string(kUnknownTag)};
  for (const DatasetRow& row : rows) {
    categories.insert(row.note_category);
    sections.insert(row.note_section_type);
  }
  FeatureSpec spec;
  spec.embedding_dim = embedding_dim;
  spec.categories.assign(categories.begin(), categories.end());
  spec.section_types.assign(sections.begin(), sections.end());
  return spec;
}

namespace {

std::size_t one_hot_slot(const std::vector<std::string>& vocab, const std::string& tag) {
  auto it = std::find(vocab.begin(), vocab.end(), tag);
  if (it == vocab.end()) it = std::find(vocab.begin(), vocab.end(), kUnknownTag);
  return static_cast<std::size_t>(it - vocab.begin());
}

}  // namespace

std::vector<double> featurize(const DatasetRow& row, const EmbeddingTable& table,
                              const FeatureSpec& spec) {
  if (table.dimension() != spec.embedding_dim)
    throw UserError("featurize: embedding table dimension " +
                    std::to_string(table.dimension()) + " != feature spec dimension " +
                    std::to_string(spec.embedding_dim));
  std::vector<double> out;
  out.reserve(spec.total_dim());
  if (const std::vector<double>* v = table.find(row.embedding_ref))
    out.assign(v->begin(), v->end());
  else
    out = fallback_vector(row.text, spec.embedding_dim);

  std::vector<double> cat(spec.categories.size(), 0.0);
  cat[one_hot_slot(spec.categories, row.note_category)] = 1.0;
  std::vector<double> sec(spec.section_types.size(), 0.0);
  sec[one_hot_slot(spec.section_types, row.note_section_type)] = 1.0;
  out.insert(out.end(), cat.begin(), cat.end());
  out.insert(out.end(), sec.begin(), sec.end());
  return out;
}

// ---------------------------------------------------------------------------
// Softmax loss and gradient

namespace {

// probs[i*k..] = softmax(W x_i + b), max-shifted for stability.
void softmax_probs(const std::vector<double>& features, std::size_t n,
                   std::size_t dim, std::size_t k,
                   const std::vector<double>& weights,
                   const std::vector<double>& bias, std::vector<double>& probs) {
  probs.assign(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = features.data() + i * dim;
    double* p = probs.data() + i * k;
    double maxscore = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      double s = bias[c];
      const double* w = weights.data() + c * dim;
      for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
      p[c] = s;
      maxscore = std::max(maxscore, s);
    }
    double z = 0;
    for (std::size_t c = 0; c < k; ++c) {
      p[c] = std::exp(p[c] - maxscore);
      z += p[c];
    }
    for (std::size_t c = 0; c < k; ++c) p[c] /= z;
  }
}

}  // namespace

double softmax_cross_entropy(const std::vector<double>& features,
                             const std::vector<int>& labels, std::size_t n,
                             std::size_t dim, std::size_t k,
                             const std::vector<double>& weights,
                             const std::vector<double>& bias, double l2) {
  std::vector<double> probs;
  softmax_probs(features, n, dim, k, weights, bias, probs);
  double loss = 0;
  for (std::size_t i = 0; i < n; ++i)
    loss -= std::log(std::max(probs[i * k + static_cast<std::size_t>(labels[i])],
                              1e-300));
  loss /= static_cast<double>(n);
  double reg = 0;
  for (double w : weights) reg += w * w;
  return loss + 0.5 * l2 * reg;
}

void softmax_gradient(const std::vector<double>& features,
                      const std::vector<int>& labels, std::size_t n,
                      std::size_t dim, std::size_t k,
                      const std::vector<double>& weights,
                      const std::vector<double>& bias, double l2,
                      std::vector<double>& grad_weights,
                      std::vector<double>& grad_bias) {
  std::vector<double> probs;
  softmax_probs(features, n, dim, k, weights, bias, probs);
  grad_weights.assign(k * dim, 0.0);
  grad_bias.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = features.data() + i * dim;
    for (std::size_t c = 0; c < k; ++c) {
      const double delta =
          probs[i * k + c] - (static_cast<std::size_t>(labels[i]) == c ? 1.0 : 0.0);
      grad_bias[c] += delta;
      double* gw = grad_weights.data() + c * dim;
      for (std::size_t d = 0; d < dim; ++d) gw[d] += delta * x[d];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& g : grad_weights) g *= inv_n;
  for (double& g : grad_bias) g *= inv_n;
  for (std::size_t i = 0; i < weights.size(); ++i) grad_weights[i] += l2 * weights[i];
}

// ---------------------------------------------------------------------------
// LinearSectionClassifier

LinearSectionClassifier::LinearSectionClassifier(FeatureSpec spec,
                                                 std::vector<std::string> classes,
                                                 std::vector<double> weights,
                                                 std::vector<double> bias)
    : spec_(std::move(spec)),
      classes_(std::move(classes)),
      weights_(std::move(weights)),
      bias_(std::move(bias)) {
  if (weights_.size() != classes_.size() * spec_.total_dim() ||
      bias_.size() != classes_.size())
    throw UserError("classifier: weight dimensions do not match classes/features");
}

Prediction LinearSectionClassifier::predict(const std::vector<double>& features) const {
  const std::size_t dim = spec_.total_dim();
  if (features.size() != dim)
    throw UserError("predict: feature dimension " + std::to_string(features.size()) +
                    " != model dimension " + std::to_string(dim));
  const std::size_t k = classes_.size();
  std::vector<double> probs;
  softmax_probs(features, 1, dim, k, weights_, bias_, probs);
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c)
    if (probs[c] > probs[best]) best = c;
  return {classes_[best], std::move(probs)};
}

void LinearSectionClassifier::save(std::ostream& out) const {
  json j{{"format_version", 1},
         {"type", "linear"},
         {"classes", classes_},
         {"feature_spec",
          {{"embedding_dim", spec_.embedding_dim},
           {"categories", spec_.categories},
           {"section_types", spec_.section_types}}},
         {"weights", weights_},
         {"bias", bias_}};
  out << j.dump() << '\n';
}

std::unique_ptr<SectionClassifier> load_classifier(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw UserError(std::string("model file: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format_version", 0) != 1)
      throw UserError("model file: unsupported format_version");
    const std::string type = j.value("type", "");
    if (type != "linear")
      throw UserError("model file: unknown classifier type '" + type + "'");
    FeatureSpec spec;
    const json& fs = j.at("feature_spec");
    spec.embedding_dim = fs.at("embedding_dim").get<std::size_t>();
    spec.categories = fs.at("categories").get<std::vector<std::string>>();
    spec.section_types = fs.at("section_types").get<std::vector<std::string>>();
    return std::make_unique<LinearSectionClassifier>(
        std::move(spec), j.at("classes").get<std::vector<std::string>>(),
        j.at("weights").get<std::vector<double>>(),
        j.at("bias").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw UserError(std::string("model file: ") + e.what());
  }
}

std::unique_ptr<LinearSectionClassifier> train_linear(
    const std::vector<DatasetRow>& rows, const EmbeddingTable& table,
    const FeatureSpec& spec, const std::vector<std::string>& classes,
    const ModelConfig& cfg) {
  cfg.validate();
  if (rows.empty()) throw UserError("train: no rows");

  const std::size_t dim = spec.total_dim();
  const std::size_t k = classes.size();
  const std::size_t n = rows.size();

  std::vector<double> features;
  features.reserve(n * dim);
  std::vector<int> labels;
  labels.reserve(n);
  std::set<int> distinct;
  for (const DatasetRow& row : rows) {
    const std::vector<double> x = featurize(row, table, spec);
    features.insert(features.end(), x.begin(), x.end());
    const auto it = std::find(classes.begin(), classes.end(), row.label);
    if (it == classes.end())
      throw UserError("train: label '" + row.label + "' is not a configured class");
    labels.push_back(static_cast<int>(it - classes.begin()));
    distinct.insert(labels.back());
  }
  if (distinct.size() < 2)
    throw UserError("train: need at least two distinct labels, got " +
                    std::to_string(distinct.size()));

  std::vector<double> weights(k * dim, 0.0);
  std::vector<double> bias(k, 0.0);
  std::vector<double> grad_w, grad_b;

  double loss = softmax_cross_entropy(features, labels, n, dim, k, weights, bias, cfg.l2);
  for (unsigned epoch = 0; epoch < cfg.epochs; ++epoch) {
    softmax_gradient(features, labels, n, dim, k, weights, bias, cfg.l2, grad_w, grad_b);
    double step = cfg.learning_rate;
    std::vector<double> w_new(k * dim), b_new(k);
    // Backtrack until the loss does not increase; keeps the loss curve
    // monotone for any learning rate.
    for (int tries = 0; tries < 40; ++tries) {
      for (std::size_t i = 0; i < weights.size(); ++i)
        w_new[i] = weights[i] - step * grad_w[i];
      for (std::size_t i = 0; i < bias.size(); ++i)
        b_new[i] = bias[i] - step * grad_b[i];
      const double candidate =
          softmax_cross_entropy(features, labels, n, dim, k, w_new, b_new, cfg.l2);
      if (candidate <= loss + 1e-12) {
        weights.swap(w_new);
        bias.swap(b_new);
        loss = candidate;
        break;
      }
      step /= 2;
    }
  }
  return std::make_unique<LinearSectionClassifier>(spec, classes, std::move(weights),
                                                   std::move(bias));
}

// ---------------------------------------------------------------------------
// Metrics

ClassifierMetrics metrics_from_confusion(
    const std::vector<std::vector<std::size_t>>& confusion,
    const std::vector<std::string>& classes) {
  const std::size_t k = classes.size();
  ClassifierMetrics m;
  m.classes = classes;
  m.confusion = confusion;
  m.per_class.resize(k);

  std::size_t total = 0, correct = 0;
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t p = 0; p < k; ++p) {
      total += confusion[t][p];
      if (t == p) correct += confusion[t][p];
    }

  double weighted = 0, macro = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = confusion[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += confusion[o][c];
      fn += confusion[c][o];
    }
    ClassMetrics& cm = m.per_class[c];
    cm.support = tp + fn;
    cm.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    cm.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    cm.f1 = cm.precision + cm.recall > 0
                ? 2 * cm.precision * cm.recall / (cm.precision + cm.recall)
                : 0.0;
    macro += cm.f1;
    weighted += cm.f1 * static_cast<double>(cm.support);
  }
  m.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  m.micro_f1 = m.accuracy;  // single-label classification
  m.macro_f1 = k ? macro / static_cast<double>(k) : 0.0;
  m.weighted_f1 = total ? weighted / static_cast<double>(total) : 0.0;
  return m;
}

ClassifierMetrics evaluate(const SectionClassifier& model,
                           const std::vector<DatasetRow>& rows,
                           const EmbeddingTable& table) {
  if (rows.empty()) throw UserError("evaluate: no rows");
  const std::vector<std::string>& classes = model.classes();
  const std::size_t k = classes.size();
  std::vector<std::vector<std::size_t>> confusion(k, std::vector<std::size_t>(k, 0));
  for (const DatasetRow& row : rows) {
    const auto truth = std::find(classes.begin(), classes.end(), row.label);
    if (truth == classes.end())
      throw UserError("evaluate: label '" + row.label + "' is not a model class");
    const Prediction pred = model.predict(featurize(row, table, model.feature_spec()));
    const auto guess = std::find(classes.begin(), classes.end(), pred.label);
    confusion[static_cast<std::size_t>(truth - classes.begin())]
             [static_cast<std::size_t>(guess - classes.begin())]++;
  }
  return metrics_from_confusion(confusion, classes);
}

}  // namespace flowsum
