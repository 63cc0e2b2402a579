#pragma once

// Sentence-section classification: feature assembly (sentence embedding
// + note-category one-hot + note-section-type one-hot), a trainable
// multinomial logistic baseline behind a pluggable interface, and
// precision/recall/F1 evaluation.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "flowsum/dataset.hpp"
#include "flowsum/ingest.hpp"

namespace flowsum {

struct FeatureSpec {
  std::size_t embedding_dim = 0;
  std::vector<std::string> categories;     // includes kUnknownTag
  std::vector<std::string> section_types;  // includes kUnknownTag

  std::size_t total_dim() const {
    return embedding_dim + categories.size() + section_types.size();
  }
};

// Sorted distinct tags observed in the rows, with the unknown tag
// guaranteed a slot.
FeatureSpec make_feature_spec(const std::vector<DatasetRow>& rows,
                              std::size_t embedding_dim);

// Deterministic vector of spec.total_dim() entries. The embedding part
// resolves row.embedding_ref in the table and falls back to a vector
// hashed from the row text; unseen tags land in the unknown slot.
std::vector<double> featurize(const DatasetRow& row, const EmbeddingTable& table,
                              const FeatureSpec& spec);

struct ModelConfig {
  double learning_rate = 5e-4;
  unsigned epochs = 30;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  // Accepted for config compatibility with richer classifiers; the
  // linear baseline ignores both.
  unsigned hidden_size = 500;
  double dropout = 0.15;

  void validate() const;
};

struct Prediction {
  std::string label;
  std::vector<double> distribution;  // sums to 1, class order
};

class SectionClassifier {
 public:
  virtual ~SectionClassifier() = default;
  virtual const std::vector<std::string>& classes() const = 0;
  virtual const FeatureSpec& feature_spec() const = 0;
  virtual Prediction predict(const std::vector<double>& features) const = 0;
  virtual void save(std::ostream& out) const = 0;
};

class LinearSectionClassifier final : public SectionClassifier {
 public:
  LinearSectionClassifier(FeatureSpec spec, std::vector<std::string> classes,
                          std::vector<double> weights, std::vector<double> bias);

  const std::vector<std::string>& classes() const override { return classes_; }
  const FeatureSpec& feature_spec() const override { return spec_; }
  Prediction predict(const std::vector<double>& features) const override;
  void save(std::ostream& out) const override;

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }

 private:
  FeatureSpec spec_;
  std::vector<std::string> classes_;
  std::vector<double> weights_;  // row-major [class][feature]
  std::vector<double> bias_;
};

// Regularized cross-entropy of a flattened sample matrix (n x dim) under
// weights (k x dim) and bias (k); the L2 term excludes the bias.
double softmax_cross_entropy(const std::vector<double>& features,
                             const std::vector<int>& labels, std::size_t n,
                             std::size_t dim, std::size_t k,
                             const std::vector<double>& weights,
                             const std::vector<double>& bias, double l2);

// Analytic gradient of softmax_cross_entropy.
void softmax_gradient(const std::vector<double>& features,
                      const std::vector<int>& labels, std::size_t n,
                      std::size_t dim, std::size_t k,
                      const std::vector<double>& weights,
                      const std::vector<double>& bias, double l2,
                      std::vector<double>& grad_weights,
                      std::vector<double>& grad_bias);

// Full-batch gradient descent with backtracking, so the training loss is
// non-increasing across epochs. classes fixes the label order (argmax
// ties break toward the lowest class index). Throws UserError when the
// rows carry fewer than two distinct labels.
std::unique_ptr<LinearSectionClassifier> train_linear(
    const std::vector<DatasetRow>& rows, const EmbeddingTable& table,
    const FeatureSpec& spec, const std::vector<std::string>& classes,
    const ModelConfig& cfg);

std::unique_ptr<SectionClassifier> load_classifier(std::istream& in);

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
};

struct ClassifierMetrics {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> per_class;
  double micro_f1 = 0;
  double macro_f1 = 0;
  double weighted_f1 = 0;
  double accuracy = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

ClassifierMetrics metrics_from_confusion(const std::vector<std::vector<std::size_t>>& confusion,
                                         const std::vector<std::string>& classes);

ClassifierMetrics evaluate(const SectionClassifier& model,
                           const std::vector<DatasetRow>& rows,
                           const EmbeddingTable& table);

}  // namespace flowsum
