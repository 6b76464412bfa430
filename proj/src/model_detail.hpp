#pragma once

#include <json.hpp>

#include "scandoc/classifiers.hpp"

namespace scandoc::cls::detail {

// Feature index space: [0,6) structured block, [6, 6+V) tf-idf block.
double feature_at(const feat::FeatureVector& v, std::size_t f);
double dot(const feat::FeatureVector& a, const feat::FeatureVector& b);
double dist_sq(const feat::FeatureVector& a, const feat::FeatureVector& b);
Probabilities softmax3(const std::array<double, 3>& scores);

nlohmann::json feature_to_json(const feat::FeatureVector& v);
feat::FeatureVector feature_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const ClassifierSpec& spec);
ClassifierSpec spec_from_json(const nlohmann::json& j);

std::unique_ptr<Model> train_forest(const ClassifierSpec& spec, const Dataset& data,
                                    std::uint64_t seed);
std::unique_ptr<Model> forest_from_json(const nlohmann::json& j);

}  // namespace scandoc::cls::detail
