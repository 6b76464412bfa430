#include <algorithm>
#include <cmath>
#include <numeric>

#include "scandoc/errors.hpp"
#include "scandoc/rng.hpp"
#include "src/model_detail.hpp"

namespace scandoc::cls::detail {

using nlohmann::json;

namespace {

constexpr int kClasses = 3;

struct TreeNode {
  int feature = -1;             // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<double, kClasses> probs{};  // leaf class frequencies
};

struct Tree {
  std::vector<TreeNode> nodes;

  const std::array<double, kClasses>& predict(const feat::FeatureVector& x) const {
    int at = 0;
    while (nodes[at].feature >= 0) {
      at = feature_at(x, static_cast<std::size_t>(nodes[at].feature)) <= nodes[at].threshold
               ? nodes[at].left
               : nodes[at].right;
    }
    return nodes[at].probs;
  }
};

std::array<double, kClasses> class_histogram(const Dataset& data,
                                             const std::vector<std::size_t>& samples) {
  std::array<double, kClasses> hist{};
  for (std::size_t i : samples) hist[static_cast<int>(data.y[i])] += 1.0;
  return hist;
}

double gini(const std::array<double, kClasses>& hist, double total) {
  if (total <= 0.0) return 0.0;
  double g = 1.0;
  for (double h : hist) {
    const double p = h / total;
    g -= p * p;
  }
  return g;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();  // weighted child Gini
};

// Best threshold for one feature via sorted scan; returns false when the
// feature is constant on this node.
bool best_split_on_feature(const Dataset& data, const std::vector<std::size_t>& samples,
                           std::size_t feature, std::size_t min_leaf, SplitChoice& best) {
  std::vector<std::pair<double, int>> values;
  values.reserve(samples.size());
  for (std::size_t i : samples) {
    values.emplace_back(feature_at(data.x[i], feature), static_cast<int>(data.y[i]));
  }
  std::sort(values.begin(), values.end());
  if (values.front().first == values.back().first) return false;

  std::array<double, kClasses> left{};
  std::array<double, kClasses> right{};
  for (const auto& [v, c] : values) right[c] += 1.0;
  const auto n = static_cast<double>(values.size());

  bool found = false;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const int c = values[i].second;
    left[c] += 1.0;
    right[c] -= 1.0;
    if (values[i].first == values[i + 1].first) continue;
    const double n_left = static_cast<double>(i + 1);
    const double n_right = n - n_left;
    if (n_left < static_cast<double>(min_leaf) || n_right < static_cast<double>(min_leaf)) continue;
    const double impurity = (n_left * gini(left, n_left) + n_right * gini(right, n_right)) / n;
    if (impurity < best.impurity) {
      best.impurity = impurity;
      best.feature = static_cast<int>(feature);
      best.threshold = 0.5 * (values[i].first + values[i + 1].first);
      found = true;
    }
  }
  return found;
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, std::size_t max_features, std::size_t min_leaf,
              int max_depth, Rng& rng)
      : data_(data), max_features_(max_features), min_leaf_(min_leaf),
        max_depth_(max_depth), rng_(rng) {}

  Tree build(std::vector<std::size_t> samples) {
    Tree tree;
    grow(tree, std::move(samples), 0);
    return tree;
  }

 private:
  int make_leaf(Tree& tree, const std::vector<std::size_t>& samples) {
    TreeNode node;
    auto hist = class_histogram(data_, samples);
    const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
    for (int c = 0; c < kClasses; ++c) node.probs[c] = hist[c] / total;
    tree.nodes.push_back(node);
    return static_cast<int>(tree.nodes.size() - 1);
  }

  int grow(Tree& tree, std::vector<std::size_t> samples, int depth) {
    const auto hist = class_histogram(data_, samples);
    const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
    const bool pure = std::any_of(hist.begin(), hist.end(),
                                  [&](double h) { return h == total; });
    if (pure || samples.size() <= min_leaf_ ||
        (max_depth_ >= 0 && depth >= max_depth_)) {
      return make_leaf(tree, samples);
    }

    const std::size_t dim = data_.feature_dim();
    std::vector<std::size_t> features(dim);
    std::iota(features.begin(), features.end(), 0);
    rng_.shuffle(features);

    SplitChoice best;
    std::size_t tried = 0;
    for (std::size_t f : features) {
      best_split_on_feature(data_, samples, f, min_leaf_, best);
      ++tried;
      // Sample max_features candidates; keep scanning past them only while
      // no valid split has been found (mtry fallback).
      if (tried >= max_features_ && best.feature >= 0) break;
    }
    if (best.feature < 0) return make_leaf(tree, samples);

    std::vector<std::size_t> left_samples, right_samples;
    for (std::size_t i : samples) {
      if (feature_at(data_.x[i], static_cast<std::size_t>(best.feature)) <= best.threshold) {
        left_samples.push_back(i);
      } else {
        right_samples.push_back(i);
      }
    }

    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node_index].feature = best.feature;
    tree.nodes[node_index].threshold = best.threshold;
    const int left = grow(tree, std::move(left_samples), depth + 1);
    const int right = grow(tree, std::move(right_samples), depth + 1);
    tree.nodes[node_index].left = left;
    tree.nodes[node_index].right = right;
    return node_index;
  }

  const Dataset& data_;
  std::size_t max_features_;
  std::size_t min_leaf_;
  int max_depth_;
  Rng& rng_;
};

class ForestModel final : public Model {
 public:
  explicit ForestModel(ClassifierSpec spec) : spec_(std::move(spec)) {}

  Kind kind() const override { return spec_.kind; }
  const ClassifierSpec& spec() const override { return spec_; }

  void fit(const Dataset& data, std::uint64_t seed) {
    if (data.x.size() != data.y.size() || data.x.empty()) {
      throw InvalidInputError("random forest: bad training data");
    }
    tfidf_dim_ = data.tfidf_dim;
    const int n_trees = static_cast<int>(spec_.get("trees", 100));
    const bool bootstrap = spec_.get("bootstrap", 1.0) != 0.0;
    const int max_depth = static_cast<int>(spec_.get("max_depth", -1.0));
    const auto min_leaf = static_cast<std::size_t>(spec_.get("min_leaf", 1.0));
    const std::size_t dim = data.feature_dim();
    auto max_features = static_cast<std::size_t>(spec_.get(
        "max_features", std::max(1.0, std::floor(std::sqrt(static_cast<double>(dim))))));
    max_features = std::clamp<std::size_t>(max_features, 1, dim);

    trees_.clear();
    const std::size_t n = data.size();
    for (int t = 0; t < n_trees; ++t) {
      Rng rng(derive_seed(seed, "tree-" + std::to_string(t)));
      std::vector<std::size_t> samples(n);
      if (bootstrap) {
        for (auto& s : samples) s = rng.below(n);
      } else {
        std::iota(samples.begin(), samples.end(), 0);
      }
      TreeBuilder builder(data, max_features, min_leaf, max_depth, rng);
      trees_.push_back(builder.build(std::move(samples)));
    }
  }

  Probabilities predict_proba(const feat::FeatureVector& x) const override {
    if (!x.tfidf.empty() && x.tfidf.rbegin()->first >= tfidf_dim_) {
      throw InvalidInputError("predict: feature dimension exceeds training dimension");
    }
    Probabilities p{};
    for (const auto& tree : trees_) {
      const auto& leaf = tree.predict(x);
      for (int c = 0; c < kClasses; ++c) p[c] += leaf[c];
    }
    for (auto& v : p) v /= static_cast<double>(trees_.size());
    return p;
  }

  std::string to_json() const override {
    json j;
    j["format_version"] = "1";
    j["model"] = spec_to_json(spec_);
    j["classes"] = {"AHI", "SaO2", "Other"};
    j["tfidf_dim"] = tfidf_dim_;
    json trees = json::array();
    for (const auto& tree : trees_) {
      json nodes = json::array();
      for (const auto& n : tree.nodes) {
        nodes.push_back({{"f", n.feature},
                         {"t", n.threshold},
                         {"l", n.left},
                         {"r", n.right},
                         {"p", n.probs}});
      }
      trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump();
  }

  static std::unique_ptr<ForestModel> parse(const json& j) {
    auto model = std::make_unique<ForestModel>(spec_from_json(j.at("model")));
    model->tfidf_dim_ = j.at("tfidf_dim").get<std::size_t>();
    for (const auto& tree_json : j.at("trees")) {
      Tree tree;
      for (const auto& n : tree_json) {
        TreeNode node;
        node.feature = n.at("f").get<int>();
        node.threshold = n.at("t").get<double>();
        node.left = n.at("l").get<int>();
        node.right = n.at("r").get<int>();
        const auto p = n.at("p").get<std::vector<double>>();
        std::copy(p.begin(), p.end(), node.probs.begin());
        tree.nodes.push_back(node);
      }
      model->trees_.push_back(std::move(tree));
    }
    return model;
  }

 private:
  ClassifierSpec spec_;
  std::size_t tfidf_dim_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace

std::unique_ptr<Model> train_forest(const ClassifierSpec& spec, const Dataset& data,
                                    std::uint64_t seed) {
  auto model = std::make_unique<ForestModel>(spec);
  model->fit(data, seed);
  return model;
}

std::unique_ptr<Model> forest_from_json(const json& j) { return ForestModel::parse(j); }

}  // namespace scandoc::cls::detail
