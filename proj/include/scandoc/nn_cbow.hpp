#pragma once

#include <span>

#include "scandoc/nn_core.hpp"

namespace scandoc::nn {

struct CbowConfig {
  int dim = 100;
  int window = 5;      // context radius
  int negatives = 5;   // negative samples per center word
  int epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 0;
};

struct CbowResult {
  Matrix embeddings;              // vocab x dim input embeddings
  std::vector<double> epoch_loss; // mean loss per epoch
};

// Negative-sampling CBOW loss for one (context, center, negatives) example:
//   h = mean of context input-embedding rows
//   L = -log sigmoid(u_center . h) - sum_k log sigmoid(-u_neg_k . h)
// Gradients are accumulated into d_in/d_out when non-null.
double cbow_loss_grad(const Matrix& w_in, const Matrix& w_out, std::span<const int> context,
                      int center, std::span<const int> negatives, Matrix* d_in, Matrix* d_out);

// Word2vec CBOW pretraining over the training corpus only. Deterministic per
// seed; 0 epochs returns the seeded random initialization.
CbowResult pretrain_cbow(const std::vector<std::vector<int>>& corpus, int vocab_size,
                         const CbowConfig& config);

}  // namespace scandoc::nn
