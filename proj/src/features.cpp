#include "scandoc/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <json.hpp>

#include "scandoc/errors.hpp"
#include "scandoc/text.hpp"

namespace scandoc::feat {

namespace {

bool is_alnum(unsigned char c) { return std::isalnum(c) != 0; }

std::string strip_edges(const std::string& token) {
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end && !is_alnum(static_cast<unsigned char>(token[begin]))) ++begin;
  while (end > begin && !is_alnum(static_cast<unsigned char>(token[end - 1]))) --end;
  return token.substr(begin, end - begin);
}

}  // namespace

std::vector<std::string> tokenize_normalize(const std::string& segment) {
  std::vector<std::string> out;
  for (const auto& raw : split_ws(segment)) {
    std::string token = strip_edges(to_lower(raw));
    if (token.empty()) continue;
    if (stopwords().count(token)) continue;
    out.push_back(std::move(token));
  }
  return out;
}

Vocabulary fit_vocab(const std::vector<std::vector<std::string>>& segments, std::size_t cap) {
  if (segments.empty()) throw InvalidInputError("fit_vocab: empty corpus");
  std::map<std::string, std::size_t> tf;   // total term frequency
  std::map<std::string, std::size_t> df;   // segment frequency
  bool any_token = false;
  for (const auto& tokens : segments) {
    std::unordered_set<std::string> seen;
    for (const auto& t : tokens) {
      any_token = true;
      ++tf[t];
      if (seen.insert(t).second) ++df[t];
    }
  }
  if (!any_token) throw InvalidInputError("fit_vocab: no tokens in corpus");

  std::vector<std::pair<std::string, std::size_t>> ranked(tf.begin(), tf.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > cap) ranked.resize(cap);

  Vocabulary vocab;
  vocab.doc_count = segments.size();
  const double n = static_cast<double>(segments.size());
  for (const auto& [term, count] : ranked) {
    vocab.index.emplace(term, vocab.terms.size());
    vocab.terms.push_back(term);
    vocab.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(df[term]))) + 1.0);
  }
  return vocab;
}

FeatureVector vectorize(const seg::Instance& instance, const Vocabulary& vocab) {
  FeatureVector v;
  v.structured = {static_cast<double>(instance.left), static_cast<double>(instance.top),
                  static_cast<double>(instance.width), static_cast<double>(instance.height),
                  static_cast<double>(instance.page), instance.numeric_value};

  std::map<std::size_t, double> counts;
  for (const auto& token : tokenize_normalize(instance.segment)) {
    const auto it = vocab.index.find(token);
    if (it != vocab.index.end()) counts[it->second] += 1.0;
  }
  double norm_sq = 0.0;
  for (auto& [idx, count] : counts) {
    const double w = count * vocab.idf[idx];
    counts[idx] = w;
    norm_sq += w * w;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& [idx, w] : counts) v.tfidf[idx] = w * inv;
  }
  return v;
}

Scaler fit_scaler(const std::vector<FeatureVector>& training) {
  if (training.size() < 2) {
    throw InvalidInputError("fit_scaler: need at least 2 training vectors");
  }
  Scaler scaler;
  const double n = static_cast<double>(training.size());
  for (std::size_t f = 0; f < kStructuredDim; ++f) {
    double mean = 0.0;
    for (const auto& v : training) mean += v.structured[f];
    mean /= n;
    double var = 0.0;
    for (const auto& v : training) {
      const double d = v.structured[f] - mean;
      var += d * d;
    }
    var /= n;
    scaler.mean[f] = mean;
    scaler.stddev[f] = std::sqrt(var);
  }
  return scaler;
}

FeatureVector apply_scaler(const FeatureVector& v, const Scaler& scaler) {
  FeatureVector out = v;
  for (std::size_t f = 0; f < kStructuredDim; ++f) {
    if (scaler.stddev[f] > 0.0) {
      out.structured[f] = (v.structured[f] - scaler.mean[f]) / scaler.stddev[f];
    }
  }
  return out;
}

std::string Vocabulary::to_json() const {
  nlohmann::json j;
  j["terms"] = terms;
  j["idf"] = idf;
  j["doc_count"] = doc_count;
  return j.dump(2);
}

Vocabulary Vocabulary::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  Vocabulary v;
  v.terms = j.at("terms").get<std::vector<std::string>>();
  v.idf = j.at("idf").get<std::vector<double>>();
  v.doc_count = j.at("doc_count").get<std::size_t>();
  for (std::size_t i = 0; i < v.terms.size(); ++i) v.index.emplace(v.terms[i], i);
  return v;
}

std::string Scaler::to_json() const {
  nlohmann::json j;
  j["mean"] = mean;
  j["stddev"] = stddev;
  return j.dump(2);
}

Scaler Scaler::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  Scaler s;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto stddev = j.at("stddev").get<std::vector<double>>();
  if (mean.size() != kStructuredDim || stddev.size() != kStructuredDim) {
    throw ParseError("scaler JSON: wrong feature count");
  }
  std::copy(mean.begin(), mean.end(), s.mean.begin());
  std::copy(stddev.begin(), stddev.end(), s.stddev.begin());
  return s;
}

}  // namespace scandoc::feat
