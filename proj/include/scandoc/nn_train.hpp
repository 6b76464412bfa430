#pragma once

#include "scandoc/nn.hpp"

namespace scandoc::nn {

// Vectorized dataset for the neural path: raw structured features (the
// in-network batch norm does the scaling) plus unpadded token id rows.
struct NnDataset {
  std::vector<std::array<double, 6>> structured;
  std::vector<std::vector<int>> token_ids;  // truncated to max_len, unpadded
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

// Assembles a padded batch from dataset rows [begin, end) in `order`.
Batch make_batch(const NnDataset& data, const std::vector<std::size_t>& order,
                 std::size_t begin, std::size_t end, int max_len, bool with_structured);

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
  std::string to_csv() const;
};

struct TrainResult {
  Checkpoint best;
  TrainHistory history;
  bool diverged = false;
};

// Epoch loop with seeded shuffling, a checkpoint per epoch, and best-checkpoint
// selection by validation cross-entropy (earlier epoch wins ties). On a
// non-finite loss the run aborts and returns the best checkpoint so far with
// the divergence flag set.
TrainResult train_network(ParentNetwork& net, const TrainConfig& config,
                          const NnDataset& train_set, const NnDataset& val_set);

// Mean loss over a dataset in infer mode (dropout off, running batch-norm stats).
double evaluate_loss(ParentNetwork& net, const NnDataset& data, int batch_size = 256);

// Test-time probabilities, one row per dataset entry, in dataset order.
Matrix predict_probabilities(ParentNetwork& net, const NnDataset& data, int batch_size = 256);

}  // namespace scandoc::nn
