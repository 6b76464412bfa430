#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "scandoc/segmenter.hpp"

namespace scandoc::feat {

// The fixed 179-word English stopword list shipped with the repo.
const std::unordered_set<std::string>& stopwords();

// Lowercase, strip leading/trailing non-alphanumerics, drop empties/stopwords.
std::vector<std::string> tokenize_normalize(const std::string& segment);

struct Vocabulary {
  std::vector<std::string> terms;            // ordered, <= cap entries
  std::vector<double> idf;                   // parallel to terms
  std::size_t doc_count = 0;                 // N segments used for fitting
  std::unordered_map<std::string, std::size_t> index;  // term -> position

  std::string to_json() const;
  static Vocabulary from_json(const std::string& json_text);
};

// Top-`cap` terms by total frequency (ties broken lexicographically);
// idf(t) = ln((1+N)/(1+df(t))) + 1.
Vocabulary fit_vocab(const std::vector<std::vector<std::string>>& segments,
                     std::size_t cap = 400);

inline constexpr std::size_t kStructuredDim = 6;  // left, top, width, height, page, value

struct FeatureVector {
  std::array<double, kStructuredDim> structured{};
  std::map<std::size_t, double> tfidf;  // term index -> L2-normalized weight
};

FeatureVector vectorize(const seg::Instance& instance, const Vocabulary& vocab);

struct Scaler {
  std::array<double, kStructuredDim> mean{};
  std::array<double, kStructuredDim> stddev{};  // 0 marks pass-through features

  std::string to_json() const;
  static Scaler from_json(const std::string& json_text);
};

// z-score statistics of the structured block over the training set.
Scaler fit_scaler(const std::vector<FeatureVector>& training);
FeatureVector apply_scaler(const FeatureVector& v, const Scaler& scaler);

}  // namespace scandoc::feat
