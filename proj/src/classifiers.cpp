#include "scandoc/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "scandoc/errors.hpp"
#include "scandoc/rng.hpp"
#include "src/model_detail.hpp"

namespace scandoc::cls {

using nlohmann::json;

std::string kind_name(Kind kind) {
  switch (kind) {
    case Kind::kLR: return "LR";
    case Kind::kLasso: return "Lasso";
    case Kind::kRidge: return "Ridge";
    case Kind::kSvm: return "SVM";
    case Kind::kKnn: return "kNN";
    case Kind::kNaiveBayes: return "NaiveBayes";
    case Kind::kRandomForest: return "RandomForest";
  }
  return "LR";
}

Kind kind_from_name(const std::string& name) {
  for (Kind k : {Kind::kLR, Kind::kLasso, Kind::kRidge, Kind::kSvm, Kind::kKnn,
                 Kind::kNaiveBayes, Kind::kRandomForest}) {
    if (kind_name(k) == name) return k;
  }
  throw InvalidInputError("unknown classifier kind: " + name);
}

ClassifierSpec default_spec(Kind kind) {
  ClassifierSpec spec;
  spec.kind = kind;
  switch (kind) {
    case Kind::kLR:
      break;
    case Kind::kLasso:
    case Kind::kRidge:
      spec.hyperparams["lambda"] = 0.01;
      break;
    case Kind::kSvm:
      spec.hyperparams["degree"] = 3;
      spec.hyperparams["gamma"] = 1.0;
      spec.hyperparams["coef0"] = 1.0;
      spec.hyperparams["lambda"] = 0.01;
      break;
    case Kind::kKnn:
      spec.hyperparams["k"] = 3;
      break;
    case Kind::kNaiveBayes:
      spec.hyperparams["alpha"] = 0.5;
      break;
    case Kind::kRandomForest:
      spec.hyperparams["trees"] = 100;
      break;
  }
  return spec;
}

std::vector<ClassifierSpec> default_grid(Kind kind) {
  std::vector<ClassifierSpec> grid;
  const auto with = [&](const std::string& key, double value) {
    ClassifierSpec s = default_spec(kind);
    s.hyperparams[key] = value;
    return s;
  };
  switch (kind) {
    case Kind::kLasso:
    case Kind::kRidge:
      for (double lambda : {0.001, 0.01, 0.1}) grid.push_back(with("lambda", lambda));
      break;
    case Kind::kKnn:
      for (double k : {1.0, 3.0, 5.0}) grid.push_back(with("k", k));
      break;
    case Kind::kNaiveBayes:
      for (double alpha : {0.1, 0.5, 1.0}) grid.push_back(with("alpha", alpha));
      break;
    case Kind::kRandomForest:
      for (double trees : {50.0, 100.0, 200.0}) grid.push_back(with("trees", trees));
      break;
    default:
      grid.push_back(default_spec(kind));
      break;
  }
  return grid;
}

Probabilities softmax_scores(const std::array<double, 3>& scores) {
  return detail::softmax3(scores);
}

seg::Label Model::predict(const feat::FeatureVector& x) const {
  const auto p = predict_proba(x);
  // Strict comparison keeps the earliest class on ties: AHI > SaO2 > Other.
  int best = 0;
  for (int c = 1; c < 3; ++c) {
    if (p[c] > p[best]) best = c;
  }
  return static_cast<seg::Label>(best);
}

namespace detail {

double feature_at(const feat::FeatureVector& v, std::size_t f) {
  if (f < feat::kStructuredDim) return v.structured[f];
  const auto it = v.tfidf.find(f - feat::kStructuredDim);
  return it == v.tfidf.end() ? 0.0 : it->second;
}

double dot(const feat::FeatureVector& a, const feat::FeatureVector& b) {
  double acc = 0.0;
  for (std::size_t f = 0; f < feat::kStructuredDim; ++f) acc += a.structured[f] * b.structured[f];
  const auto& small = a.tfidf.size() <= b.tfidf.size() ? a.tfidf : b.tfidf;
  const auto& large = a.tfidf.size() <= b.tfidf.size() ? b.tfidf : a.tfidf;
  for (const auto& [idx, w] : small) {
    const auto it = large.find(idx);
    if (it != large.end()) acc += w * it->second;
  }
  return acc;
}

double dist_sq(const feat::FeatureVector& a, const feat::FeatureVector& b) {
  double acc = 0.0;
  for (std::size_t f = 0; f < feat::kStructuredDim; ++f) {
    const double d = a.structured[f] - b.structured[f];
    acc += d * d;
  }
  auto ia = a.tfidf.begin();
  auto ib = b.tfidf.begin();
  while (ia != a.tfidf.end() || ib != b.tfidf.end()) {
    if (ib == b.tfidf.end() || (ia != a.tfidf.end() && ia->first < ib->first)) {
      acc += ia->second * ia->second;
      ++ia;
    } else if (ia == a.tfidf.end() || ib->first < ia->first) {
      acc += ib->second * ib->second;
      ++ib;
    } else {
      const double d = ia->second - ib->second;
      acc += d * d;
      ++ia;
      ++ib;
    }
  }
  return acc;
}

Probabilities softmax3(const std::array<double, 3>& scores) {
  const double m = std::max({scores[0], scores[1], scores[2]});
  Probabilities p{};
  double z = 0.0;
  for (int c = 0; c < 3; ++c) {
    p[c] = std::exp(scores[c] - m);
    z += p[c];
  }
  for (int c = 0; c < 3; ++c) p[c] /= z;
  return p;
}

json feature_to_json(const feat::FeatureVector& v) {
  json j;
  j["structured"] = v.structured;
  json t = json::object();
  for (const auto& [idx, w] : v.tfidf) t[std::to_string(idx)] = w;
  j["tfidf"] = std::move(t);
  return j;
}

feat::FeatureVector feature_from_json(const json& j) {
  feat::FeatureVector v;
  const auto s = j.at("structured").get<std::vector<double>>();
  std::copy(s.begin(), s.end(), v.structured.begin());
  for (const auto& [key, value] : j.at("tfidf").items()) {
    v.tfidf[std::stoul(key)] = value.get<double>();
  }
  return v;
}

json spec_to_json(const ClassifierSpec& spec) {
  json j;
  j["kind"] = kind_name(spec.kind);
  j["hyperparams"] = spec.hyperparams;
  return j;
}

ClassifierSpec spec_from_json(const json& j) {
  ClassifierSpec spec;
  spec.kind = kind_from_name(j.at("kind").get<std::string>());
  spec.hyperparams = j.at("hyperparams").get<std::map<std::string, double>>();
  return spec;
}

namespace {

constexpr int kClasses = 3;
const char* const kFormatVersion = "1";

void require_all_classes(const Dataset& data) {
  std::array<std::size_t, kClasses> counts{};
  for (const auto label : data.y) ++counts[static_cast<int>(label)];
  for (int c = 0; c < kClasses; ++c) {
    if (counts[c] == 0) {
      throw InvalidInputError("training data is missing class " +
                              seg::label_name(static_cast<seg::Label>(c)));
    }
  }
}

void require_consistent(const Dataset& data) {
  if (data.x.size() != data.y.size()) {
    throw InvalidInputError("training data: feature/label count mismatch");
  }
  if (data.x.empty()) throw InvalidInputError("training data: empty");
  for (const auto& v : data.x) {
    if (!v.tfidf.empty() && v.tfidf.rbegin()->first >= data.tfidf_dim) {
      throw InvalidInputError("training data: tf-idf index exceeds declared dimension");
    }
  }
}

void require_dim(const feat::FeatureVector& x, std::size_t tfidf_dim) {
  if (!x.tfidf.empty() && x.tfidf.rbegin()->first >= tfidf_dim) {
    throw InvalidInputError("predict: feature dimension exceeds training dimension");
  }
}

// ---------------------------------------------------------------------------
// Multinomial logistic regression, penalty in {none, L1, L2}.
// ---------------------------------------------------------------------------

enum class Penalty { kNone, kL1, kL2 };

class LinearModel final : public Model {
 public:
  LinearModel(ClassifierSpec spec, Penalty penalty)
      : spec_(std::move(spec)), penalty_(penalty) {}

  Kind kind() const override { return spec_.kind; }
  const ClassifierSpec& spec() const override { return spec_; }

  void fit(const Dataset& data) {
    require_consistent(data);
    require_all_classes(data);
    dim_ = data.feature_dim();
    tfidf_dim_ = data.tfidf_dim;
    weights_.assign(kClasses, std::vector<double>(dim_, 0.0));
    bias_.assign(kClasses, 0.0);

    const double lambda = spec_.get("lambda", penalty_ == Penalty::kNone ? 0.0 : 0.01);
    const double lr = spec_.get("learning_rate", 0.2);
    const int max_iters = static_cast<int>(spec_.get("max_iters", 800));
    const double tol = spec_.get("tol", 1e-9);
    const double n = static_cast<double>(data.size());

    std::vector<std::vector<double>> grad_w(kClasses, std::vector<double>(dim_));
    std::vector<double> grad_b(kClasses);
    double prev_loss = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iters; ++iter) {
      for (auto& g : grad_w) std::fill(g.begin(), g.end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      double loss = 0.0;

      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& x = data.x[i];
        const auto p = scores_to_proba(x);
        loss -= std::log(std::max(p[static_cast<int>(data.y[i])], 1e-300));
        for (int c = 0; c < kClasses; ++c) {
          const double err = p[c] - (static_cast<int>(data.y[i]) == c ? 1.0 : 0.0);
          grad_b[c] += err;
          for (std::size_t f = 0; f < feat::kStructuredDim; ++f) {
            grad_w[c][f] += err * x.structured[f];
          }
          for (const auto& [idx, w] : x.tfidf) {
            grad_w[c][feat::kStructuredDim + idx] += err * w;
          }
        }
      }
      loss /= n;

      for (int c = 0; c < kClasses; ++c) {
        bias_[c] -= lr * grad_b[c] / n;
        for (std::size_t f = 0; f < dim_; ++f) {
          double w = weights_[c][f];
          double g = grad_w[c][f] / n;
          if (penalty_ == Penalty::kL2) {
            g += lambda * w;
            w -= lr * g;
          } else {
            w -= lr * g;
            if (penalty_ == Penalty::kL1) {
              // Proximal soft-threshold keeps exact zeros under L1.
              const double shrink = lr * lambda;
              w = w > shrink ? w - shrink : (w < -shrink ? w + shrink : 0.0);
            }
          }
          weights_[c][f] = w;
        }
      }

      if (penalty_ == Penalty::kL1) {
        double l1 = 0.0;
        for (const auto& row : weights_)
          for (double w : row) l1 += std::fabs(w);
        loss += lambda * l1;
      } else if (penalty_ == Penalty::kL2) {
        double l2 = 0.0;
        for (const auto& row : weights_)
          for (double w : row) l2 += w * w;
        loss += 0.5 * lambda * l2;
      }
      if (std::fabs(prev_loss - loss) < tol) break;
      prev_loss = loss;
    }
  }

  Probabilities predict_proba(const feat::FeatureVector& x) const override {
    require_dim(x, tfidf_dim_);
    return scores_to_proba(x);
  }

  std::string to_json() const override {
    json j;
    j["format_version"] = kFormatVersion;
    j["model"] = spec_to_json(spec_);
    j["classes"] = {"AHI", "SaO2", "Other"};
    j["tfidf_dim"] = tfidf_dim_;
    j["weights"] = weights_;
    j["bias"] = bias_;
    return j.dump();
  }

  static std::unique_ptr<Model> from_json(const json& j) {
    auto spec = spec_from_json(j.at("model"));
    const Penalty penalty = spec.kind == Kind::kLasso   ? Penalty::kL1
                            : spec.kind == Kind::kRidge ? Penalty::kL2
                                                        : Penalty::kNone;
    auto model = std::make_unique<LinearModel>(std::move(spec), penalty);
    model->tfidf_dim_ = j.at("tfidf_dim").get<std::size_t>();
    model->weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
    model->bias_ = j.at("bias").get<std::vector<double>>();
    model->dim_ = model->weights_.empty() ? 0 : model->weights_[0].size();
    return model;
  }

 private:
  Probabilities scores_to_proba(const feat::FeatureVector& x) const {
    std::array<double, kClasses> scores{};
    for (int c = 0; c < kClasses; ++c) {
      double z = bias_[c];
      for (std::size_t f = 0; f < feat::kStructuredDim; ++f) {
        z += weights_[c][f] * x.structured[f];
      }
      for (const auto& [idx, w] : x.tfidf) {
        z += weights_[c][feat::kStructuredDim + idx] * w;
      }
      scores[c] = z;
    }
    return softmax3(scores);
  }

  ClassifierSpec spec_;
  Penalty penalty_;
  std::size_t dim_ = 0;
  std::size_t tfidf_dim_ = 0;
  std::vector<std::vector<double>> weights_;  // class x feature
  std::vector<double> bias_;
};

// ---------------------------------------------------------------------------
// One-vs-rest SVM with a polynomial kernel, trained by kernelized Pegasos.
// Decision scores go through softmax for a probability triple.
// ---------------------------------------------------------------------------

class SvmModel final : public Model {
 public:
  explicit SvmModel(ClassifierSpec spec) : spec_(std::move(spec)) {}

  Kind kind() const override { return spec_.kind; }
  const ClassifierSpec& spec() const override { return spec_; }

  void fit(const Dataset& data, std::uint64_t seed) {
    require_consistent(data);
    require_all_classes(data);
    tfidf_dim_ = data.tfidf_dim;
    degree_ = static_cast<int>(spec_.get("degree", 3));
    gamma_ = spec_.get("gamma", 1.0);
    coef0_ = spec_.get("coef0", 1.0);
    lambda_ = spec_.get("lambda", 0.01);
    const std::size_t n = data.size();
    const std::size_t steps =
        n * static_cast<std::size_t>(spec_.get("iters_per_sample", 10));

    std::vector<std::vector<double>> alpha(kClasses, std::vector<double>(n, 0.0));
    Rng rng(derive_seed(seed, "svm"));
    for (std::size_t t = 1; t <= steps; ++t) {
      const std::size_t i = rng.below(n);
      for (int c = 0; c < kClasses; ++c) {
        double f = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (alpha[c][j] == 0.0) continue;
          const double yj = static_cast<int>(data.y[j]) == c ? 1.0 : -1.0;
          f += alpha[c][j] * yj * kernel(data.x[j], data.x[i]);
        }
        f /= lambda_ * static_cast<double>(t);
        const double yi = static_cast<int>(data.y[i]) == c ? 1.0 : -1.0;
        if (yi * f < 1.0) alpha[c][i] += 1.0;
      }
    }

    scale_ = 1.0 / (lambda_ * static_cast<double>(steps));
    for (std::size_t j = 0; j < n; ++j) {
      if (alpha[0][j] == 0.0 && alpha[1][j] == 0.0 && alpha[2][j] == 0.0) continue;
      support_.push_back(data.x[j]);
      support_label_.push_back(static_cast<int>(data.y[j]));
      for (int c = 0; c < kClasses; ++c) coef_[c].push_back(alpha[c][j]);
    }
  }

  Probabilities predict_proba(const feat::FeatureVector& x) const override {
    require_dim(x, tfidf_dim_);
    return softmax3(decision_scores(x));
  }

  std::array<double, kClasses> decision_scores(const feat::FeatureVector& x) const {
    std::array<double, kClasses> scores{};
    for (std::size_t j = 0; j < support_.size(); ++j) {
      const double k = kernel(support_[j], x);
      for (int c = 0; c < kClasses; ++c) {
        if (coef_[c][j] == 0.0) continue;
        const double yj = support_label_[j] == c ? 1.0 : -1.0;
        scores[c] += coef_[c][j] * yj * k;
      }
    }
    for (auto& s : scores) s *= scale_;
    return scores;
  }

  std::string to_json() const override {
    json j;
    j["format_version"] = kFormatVersion;
    j["model"] = spec_to_json(spec_);
    j["classes"] = {"AHI", "SaO2", "Other"};
    j["tfidf_dim"] = tfidf_dim_;
    j["scale"] = scale_;
    json sv = json::array();
    for (std::size_t i = 0; i < support_.size(); ++i) {
      json entry = feature_to_json(support_[i]);
      entry["label"] = support_label_[i];
      entry["coef"] = {coef_[0][i], coef_[1][i], coef_[2][i]};
      sv.push_back(std::move(entry));
    }
    j["support"] = std::move(sv);
    return j.dump();
  }

  static std::unique_ptr<Model> from_json(const json& j) {
    auto model = std::make_unique<SvmModel>(spec_from_json(j.at("model")));
    model->tfidf_dim_ = j.at("tfidf_dim").get<std::size_t>();
    model->scale_ = j.at("scale").get<double>();
    model->degree_ = static_cast<int>(model->spec_.get("degree", 3));
    model->gamma_ = model->spec_.get("gamma", 1.0);
    model->coef0_ = model->spec_.get("coef0", 1.0);
    for (const auto& entry : j.at("support")) {
      model->support_.push_back(feature_from_json(entry));
      model->support_label_.push_back(entry.at("label").get<int>());
      const auto coef = entry.at("coef").get<std::vector<double>>();
      for (int c = 0; c < kClasses; ++c) model->coef_[c].push_back(coef[c]);
    }
    return model;
  }

 private:
  double kernel(const feat::FeatureVector& a, const feat::FeatureVector& b) const {
    return std::pow(gamma_ * dot(a, b) + coef0_, degree_);
  }

  ClassifierSpec spec_;
  std::size_t tfidf_dim_ = 0;
  int degree_ = 3;
  double gamma_ = 1.0;
  double coef0_ = 1.0;
  double lambda_ = 0.01;
  double scale_ = 1.0;
  std::vector<feat::FeatureVector> support_;
  std::vector<int> support_label_;
  std::array<std::vector<double>, kClasses> coef_;
};

// ---------------------------------------------------------------------------
// kNN: lazy learner, Euclidean distance, vote-fraction probabilities,
// distance ties broken by lower training index.
// ---------------------------------------------------------------------------

class KnnModel final : public Model {
 public:
  explicit KnnModel(ClassifierSpec spec) : spec_(std::move(spec)) {}

  Kind kind() const override { return spec_.kind; }
  const ClassifierSpec& spec() const override { return spec_; }

  void fit(const Dataset& data) {
    require_consistent(data);
    x_ = data.x;
    y_.clear();
    for (auto label : data.y) y_.push_back(static_cast<int>(label));
    tfidf_dim_ = data.tfidf_dim;
    k_ = static_cast<std::size_t>(spec_.get("k", 3));
    if (k_ < 1 || k_ > x_.size()) {
      throw InvalidInputError("kNN: k must be in [1, n_training]");
    }
  }

  Probabilities predict_proba(const feat::FeatureVector& x) const override {
    require_dim(x, tfidf_dim_);
    std::vector<std::pair<double, std::size_t>> order(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) order[i] = {dist_sq(x_[i], x), i};
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k_), order.end());
    Probabilities p{};
    for (std::size_t r = 0; r < k_; ++r) p[y_[order[r].second]] += 1.0;
    for (auto& v : p) v /= static_cast<double>(k_);
    return p;
  }

  std::string to_json() const override {
    json j;
    j["format_version"] = kFormatVersion;
    j["model"] = spec_to_json(spec_);
    j["classes"] = {"AHI", "SaO2", "Other"};
    j["tfidf_dim"] = tfidf_dim_;
    json train = json::array();
    for (std::size_t i = 0; i < x_.size(); ++i) {
      json entry = feature_to_json(x_[i]);
      entry["label"] = y_[i];
      train.push_back(std::move(entry));
    }
    j["training"] = std::move(train);
    return j.dump();
  }

  static std::unique_ptr<Model> from_json(const json& j) {
    auto model = std::make_unique<KnnModel>(spec_from_json(j.at("model")));
    model->tfidf_dim_ = j.at("tfidf_dim").get<std::size_t>();
    model->k_ = static_cast<std::size_t>(model->spec_.get("k", 3));
    for (const auto& entry : j.at("training")) {
      model->x_.push_back(feature_from_json(entry));
      model->y_.push_back(entry.at("label").get<int>());
    }
    return model;
  }

 private:
  ClassifierSpec spec_;
  std::size_t tfidf_dim_ = 0;
  std::size_t k_ = 3;
  std::vector<feat::FeatureVector> x_;
  std::vector<int> y_;
};

// ---------------------------------------------------------------------------
// Multinomial Naive Bayes over a nonnegative feature map: tf-idf as-is,
// structured block min-max scaled into [0,1] on the training set.
// ---------------------------------------------------------------------------

class NaiveBayesModel final : public Model {
 public:
  explicit NaiveBayesModel(ClassifierSpec spec) : spec_(std::move(spec)) {}

  Kind kind() const override { return spec_.kind; }
  const ClassifierSpec& spec() const override { return spec_; }

  void fit(const Dataset& data) {
    require_consistent(data);
    require_all_classes(data);
    tfidf_dim_ = data.tfidf_dim;
    const double alpha = spec_.get("alpha", 0.5);
    const std::size_t dim = data.feature_dim();

    for (std::size_t f = 0; f < feat::kStructuredDim; ++f) {
      double lo = data.x[0].structured[f], hi = data.x[0].structured[f];
      for (const auto& v : data.x) {
        lo = std::min(lo, v.structured[f]);
        hi = std::max(hi, v.structured[f]);
      }
      min_[f] = lo;
      max_[f] = hi;
    }

    std::array<double, kClasses> class_count{};
    std::vector<std::vector<double>> feature_sum(kClasses, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int c = static_cast<int>(data.y[i]);
      class_count[c] += 1.0;
      const auto mapped = to_nonnegative(data.x[i]);
      for (std::size_t f = 0; f < feat::kStructuredDim; ++f) feature_sum[c][f] += mapped[f];
      for (const auto& [idx, w] : data.x[i].tfidf) {
        feature_sum[c][feat::kStructuredDim + idx] += w;
      }
    }

    log_prior_.resize(kClasses);
    log_theta_.assign(kClasses, std::vector<double>(dim, 0.0));
    const double n = static_cast<double>(data.size());
    for (int c = 0; c < kClasses; ++c) {
      log_prior_[c] = std::log(class_count[c] / n);
      const double total = std::accumulate(feature_sum[c].begin(), feature_sum[c].end(), 0.0);
      const double denom = total + alpha * static_cast<double>(dim);
      for (std::size_t f = 0; f < dim; ++f) {
        log_theta_[c][f] = std::log((feature_sum[c][f] + alpha) / denom);
      }
    }
  }

  Probabilities predict_proba(const feat::FeatureVector& x) const override {
    require_dim(x, tfidf_dim_);
    const auto mapped = to_nonnegative(x);
    std::array<double, kClasses> log_post{};
    for (int c = 0; c < kClasses; ++c) {
      double lp = log_prior_[c];
      for (std::size_t f = 0; f < feat::kStructuredDim; ++f) {
        if (mapped[f] != 0.0) lp += mapped[f] * log_theta_[c][f];
      }
      for (const auto& [idx, w] : x.tfidf) {
        lp += w * log_theta_[c][feat::kStructuredDim + idx];
      }
      log_post[c] = lp;
    }
    return softmax3(log_post);
  }

  std::string to_json() const override {
    json j;
    j["format_version"] = kFormatVersion;
    j["model"] = spec_to_json(spec_);
    j["classes"] = {"AHI", "SaO2", "Other"};
    j["tfidf_dim"] = tfidf_dim_;
    j["min"] = min_;
    j["max"] = max_;
    j["log_prior"] = log_prior_;
    j["log_theta"] = log_theta_;
    return j.dump();
  }

  static std::unique_ptr<Model> from_json(const json& j) {
    auto model = std::make_unique<NaiveBayesModel>(spec_from_json(j.at("model")));
    model->tfidf_dim_ = j.at("tfidf_dim").get<std::size_t>();
    const auto lo = j.at("min").get<std::vector<double>>();
    const auto hi = j.at("max").get<std::vector<double>>();
    std::copy(lo.begin(), lo.end(), model->min_.begin());
    std::copy(hi.begin(), hi.end(), model->max_.begin());
    model->log_prior_ = j.at("log_prior").get<std::vector<double>>();
    model->log_theta_ = j.at("log_theta").get<std::vector<std::vector<double>>>();
    return model;
  }

 private:
  std::array<double, feat::kStructuredDim> to_nonnegative(const feat::FeatureVector& x) const {
    std::array<double, feat::kStructuredDim> out{};
    for (std::size_t f = 0; f < feat::kStructuredDim; ++f) {
      const double range = max_[f] - min_[f];
      out[f] = range > 0.0 ? std::clamp((x.structured[f] - min_[f]) / range, 0.0, 1.0) : 0.0;
    }
    return out;
  }

  ClassifierSpec spec_;
  std::size_t tfidf_dim_ = 0;
  std::array<double, feat::kStructuredDim> min_{};
  std::array<double, feat::kStructuredDim> max_{};
  std::vector<double> log_prior_;
  std::vector<std::vector<double>> log_theta_;
};

}  // namespace
}  // namespace detail

std::unique_ptr<Model> train(const ClassifierSpec& spec, const Dataset& data,
                             std::uint64_t seed) {
  using namespace detail;
  switch (spec.kind) {
    case Kind::kLR:
    case Kind::kLasso:
    case Kind::kRidge: {
      const Penalty penalty = spec.kind == Kind::kLasso   ? Penalty::kL1
                              : spec.kind == Kind::kRidge ? Penalty::kL2
                                                          : Penalty::kNone;
      auto model = std::make_unique<LinearModel>(spec, penalty);
      model->fit(data);
      return model;
    }
    case Kind::kSvm: {
      auto model = std::make_unique<SvmModel>(spec);
      model->fit(data, seed);
      return model;
    }
    case Kind::kKnn: {
      auto model = std::make_unique<KnnModel>(spec);
      model->fit(data);
      return model;
    }
    case Kind::kNaiveBayes: {
      auto model = std::make_unique<NaiveBayesModel>(spec);
      model->fit(data);
      return model;
    }
    case Kind::kRandomForest:
      return train_forest(spec, data, seed);
  }
  throw InvalidInputError("unknown classifier kind");
}

std::unique_ptr<Model> model_from_json(const std::string& json_text) {
  using namespace detail;
  const auto j = json::parse(json_text);
  const auto kind = kind_from_name(j.at("model").at("kind").get<std::string>());
  switch (kind) {
    case Kind::kLR:
    case Kind::kLasso:
    case Kind::kRidge:
      return LinearModel::from_json(j);
    case Kind::kSvm:
      return SvmModel::from_json(j);
    case Kind::kKnn:
      return KnnModel::from_json(j);
    case Kind::kNaiveBayes:
      return NaiveBayesModel::from_json(j);
    case Kind::kRandomForest:
      return forest_from_json(j);
  }
  throw ParseError("model JSON: unknown kind");
}

std::map<std::string, int> assign_report_folds(const std::vector<std::string>& groups,
                                               int folds, std::uint64_t seed) {
  // Sort before shuffling so the assignment ignores input order.
  std::vector<std::string> ids(groups.begin(), groups.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  Rng rng(derive_seed(seed, "cv-folds"));
  rng.shuffle(ids);
  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = static_cast<int>(i % folds);
  return fold_of;
}

CrossValidation cross_validate(const std::vector<ClassifierSpec>& grid,
                               const Dataset& data, int folds, std::uint64_t seed) {
  if (grid.empty()) throw InvalidInputError("cross_validate: empty spec grid");
  if (folds < 2) throw InvalidInputError("cross_validate: need at least 2 folds");
  std::array<std::size_t, 3> class_counts{};
  for (auto label : data.y) ++class_counts[static_cast<int>(label)];
  for (int c = 0; c < 3; ++c) {
    if (class_counts[c] < static_cast<std::size_t>(folds)) {
      throw InvalidInputError("cross_validate: fewer samples than folds for class " +
                              seg::label_name(static_cast<seg::Label>(c)));
    }
  }

  std::map<std::string, int> fold_of = assign_report_folds(data.group, folds, seed);

  CrossValidation result;
  result.mean_accuracy.assign(grid.size(), 0.0);
  double best_acc = -1.0;
  std::size_t best_idx = 0;

  for (std::size_t s = 0; s < grid.size(); ++s) {
    double fold_acc_sum = 0.0;
    int fold_count = 0;
    for (int f = 0; f < folds; ++f) {
      Dataset train_part, val_part;
      train_part.tfidf_dim = val_part.tfidf_dim = data.tfidf_dim;
      for (std::size_t i = 0; i < data.size(); ++i) {
        auto& part = fold_of[data.group[i]] == f ? val_part : train_part;
        part.x.push_back(data.x[i]);
        part.y.push_back(data.y[i]);
        part.group.push_back(data.group[i]);
      }
      if (val_part.x.empty() || train_part.x.empty()) continue;
      const auto model = train(grid[s], train_part, derive_seed(seed, "cv-fold-" + std::to_string(f)));
      std::size_t correct = 0;
      for (std::size_t i = 0; i < val_part.size(); ++i) {
        if (model->predict(val_part.x[i]) == val_part.y[i]) ++correct;
      }
      fold_acc_sum += static_cast<double>(correct) / static_cast<double>(val_part.size());
      ++fold_count;
    }
    const double mean_acc = fold_count ? fold_acc_sum / fold_count : 0.0;
    result.mean_accuracy[s] = mean_acc;
    if (mean_acc > best_acc) {
      best_acc = mean_acc;
      best_idx = s;
    }
  }

  result.best_spec = grid[best_idx];
  result.final_model = train(result.best_spec, data, seed);
  return result;
}

}  // namespace scandoc::cls
