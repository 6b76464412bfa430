#include "scandoc/nn_cbow.hpp"

#include <algorithm>
#include <cmath>

#include "scandoc/errors.hpp"

namespace scandoc::nn {

namespace {

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Unigram^0.75 sampling table (cumulative weights over the vocabulary).
struct NegativeTable {
  std::vector<double> cumulative;
  double total = 0.0;

  explicit NegativeTable(const std::vector<std::size_t>& counts) {
    cumulative.resize(counts.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      acc += std::pow(static_cast<double>(counts[i]), 0.75);
      cumulative[i] = acc;
    }
    total = acc;
  }

  int sample(Rng& rng) const {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<int>(std::distance(cumulative.begin(), it));
  }
};

}  // namespace

double cbow_loss_grad(const Matrix& w_in, const Matrix& w_out, std::span<const int> context,
                      int center, std::span<const int> negatives, Matrix* d_in,
                      Matrix* d_out) {
  if (context.empty()) throw InvalidInputError("cbow: empty context");
  const int dim = w_in.cols;
  std::vector<double> h(static_cast<std::size_t>(dim), 0.0);
  for (int c : context) {
    const double* row = w_in.row(c);
    for (int j = 0; j < dim; ++j) h[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(context.size());
  for (double& v : h) v *= inv;

  std::vector<double> dh(static_cast<std::size_t>(dim), 0.0);
  double loss = 0.0;
  const auto accumulate = [&](int word, double target) {
    const double* u = w_out.row(word);
    double score = 0.0;
    for (int j = 0; j < dim; ++j) score += u[j] * h[j];
    const double p = sigmoid_scalar(score);
    loss -= target > 0.5 ? std::log(std::max(p, 1e-300))
                         : std::log(std::max(1.0 - p, 1e-300));
    const double g = p - target;  // d loss / d score
    if (d_out) {
      double* du = d_out->row(word);
      for (int j = 0; j < dim; ++j) du[j] += g * h[j];
    }
    for (int j = 0; j < dim; ++j) dh[j] += g * u[j];
  };

  accumulate(center, 1.0);
  for (int neg : negatives) accumulate(neg, 0.0);

  if (d_in) {
    for (int c : context) {
      double* row = d_in->row(c);
      for (int j = 0; j < dim; ++j) row[j] += dh[j] * inv;
    }
  }
  return loss;
}

CbowResult pretrain_cbow(const std::vector<std::vector<int>>& corpus, int vocab_size,
                         const CbowConfig& config) {
  if (corpus.empty()) throw InvalidInputError("pretrain_cbow: empty corpus");
  bool any = false;
  for (const auto& s : corpus) any = any || !s.empty();
  if (!any) throw InvalidInputError("pretrain_cbow: empty corpus");

  Rng rng(derive_seed(config.seed, "cbow"));
  CbowResult result;
  result.embeddings = Matrix(vocab_size, config.dim);
  for (double& v : result.embeddings.a) v = rng.normal(0.0, 0.01);
  // PAD embedding stays zero.
  for (int j = 0; j < config.dim; ++j) result.embeddings.at(TokenCodec::kPad, j) = 0.0;

  if (config.epochs == 0) return result;

  std::vector<std::size_t> counts(static_cast<std::size_t>(vocab_size), 0);
  std::vector<std::pair<int, int>> positions;  // (sentence, index)
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (std::size_t i = 0; i < corpus[s].size(); ++i) {
      const int id = corpus[s][i];
      if (id < 0 || id >= vocab_size) throw InvalidInputError("pretrain_cbow: id out of range");
      ++counts[static_cast<std::size_t>(id)];
      if (corpus[s].size() > 1) positions.emplace_back(static_cast<int>(s), static_cast<int>(i));
    }
  }
  counts[TokenCodec::kPad] = 0;  // never sampled as a negative
  const NegativeTable table(counts);

  Matrix w_out(vocab_size, config.dim);  // output embeddings start at zero (word2vec)

  std::vector<int> context;
  std::vector<int> negatives;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(positions);
    double epoch_loss = 0.0;
    std::size_t examples = 0;
    for (const auto& [s, i] : positions) {
      const auto& sentence = corpus[static_cast<std::size_t>(s)];
      const int n = static_cast<int>(sentence.size());
      context.clear();
      for (int k = std::max(0, i - config.window); k < std::min(n, i + config.window + 1); ++k) {
        if (k != i) context.push_back(sentence[static_cast<std::size_t>(k)]);
      }
      if (context.empty()) continue;
      const int center = sentence[static_cast<std::size_t>(i)];
      negatives.clear();
      int attempts = 0;
      while (static_cast<int>(negatives.size()) < config.negatives) {
        const int neg = table.sample(rng);
        if (neg != center || ++attempts > 10 * config.negatives) negatives.push_back(neg);
      }

      // SGD with gradients applied immediately (standard word2vec flow).
      const int dim = config.dim;
      std::vector<double> h(static_cast<std::size_t>(dim), 0.0);
      for (int c : context) {
        const double* row = result.embeddings.row(c);
        for (int j = 0; j < dim; ++j) h[j] += row[j];
      }
      const double inv = 1.0 / static_cast<double>(context.size());
      for (double& v : h) v *= inv;

      std::vector<double> dh(static_cast<std::size_t>(dim), 0.0);
      const auto update_out = [&](int word, double target) {
        double* u = w_out.row(word);
        double score = 0.0;
        for (int j = 0; j < dim; ++j) score += u[j] * h[j];
        const double p = sigmoid_scalar(score);
        epoch_loss -= target > 0.5 ? std::log(std::max(p, 1e-300))
                                   : std::log(std::max(1.0 - p, 1e-300));
        const double g = (p - target) * config.learning_rate;
        for (int j = 0; j < dim; ++j) {
          dh[j] += (p - target) * u[j];
          u[j] -= g * h[j];
        }
      };
      update_out(center, 1.0);
      for (int neg : negatives) update_out(neg, 0.0);
      for (int c : context) {
        double* row = result.embeddings.row(c);
        for (int j = 0; j < dim; ++j) row[j] -= config.learning_rate * dh[j] * inv;
      }
      ++examples;
    }
    result.epoch_loss.push_back(examples ? epoch_loss / static_cast<double>(examples) : 0.0);
  }
  return result;
}

}  // namespace scandoc::nn
