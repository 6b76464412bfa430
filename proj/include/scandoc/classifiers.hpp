#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "scandoc/features.hpp"
#include "scandoc/segmenter.hpp"

namespace scandoc::cls {

enum class Kind { kLR, kLasso, kRidge, kSvm, kKnn, kNaiveBayes, kRandomForest };

std::string kind_name(Kind kind);
Kind kind_from_name(const std::string& name);

struct ClassifierSpec {
  Kind kind = Kind::kLR;
  std::map<std::string, double> hyperparams;

  double get(const std::string& name, double fallback) const {
    const auto it = hyperparams.find(name);
    return it == hyperparams.end() ? fallback : it->second;
  }
  bool operator==(const ClassifierSpec&) const = default;
};

// Defaults: Lasso/Ridge lambda 0.01, SVM polynomial kernel degree 3,
// kNN k=3, NaiveBayes alpha=0.5, RandomForest 100 trees.
ClassifierSpec default_spec(Kind kind);

using Probabilities = std::array<double, 3>;  // [AHI, SaO2, Other]

// Max-subtracted softmax; the order-preserving map from decision scores
// (SVM margins, NB log-posteriors) to a probability triple.
Probabilities softmax_scores(const std::array<double, 3>& scores);

struct Dataset {
  std::vector<feat::FeatureVector> x;
  std::vector<seg::Label> y;
  std::vector<std::string> group;  // report id per instance (CV fold unit)
  std::size_t tfidf_dim = 0;       // vocabulary size

  std::size_t size() const { return x.size(); }
  std::size_t feature_dim() const { return feat::kStructuredDim + tfidf_dim; }
};

class Model {
 public:
  virtual ~Model() = default;
  virtual Kind kind() const = 0;
  virtual const ClassifierSpec& spec() const = 0;
  virtual Probabilities predict_proba(const feat::FeatureVector& x) const = 0;
  virtual std::string to_json() const = 0;

  seg::Label predict(const feat::FeatureVector& x) const;
};

std::unique_ptr<Model> train(const ClassifierSpec& spec, const Dataset& data,
                             std::uint64_t seed);

std::unique_ptr<Model> model_from_json(const std::string& json_text);

struct CrossValidation {
  ClassifierSpec best_spec;
  std::vector<double> mean_accuracy;  // parallel to the grid
  std::unique_ptr<Model> final_model; // best spec retrained on all data
};

// Deterministic report-id -> fold assignment, independent of input order.
std::map<std::string, int> assign_report_folds(const std::vector<std::string>& groups,
                                               int folds, std::uint64_t seed);

// Report-level 5-fold CV: all instances of one report share a fold.
CrossValidation cross_validate(const std::vector<ClassifierSpec>& grid,
                               const Dataset& data, int folds, std::uint64_t seed);

// Search grids from the module defaults (lambda/k/alpha/trees).
std::vector<ClassifierSpec> default_grid(Kind kind);

}  // namespace scandoc::cls
