#pragma once

#include <memory>
#include <optional>

#include "scandoc/nn_layers.hpp"

namespace scandoc::nn {

enum class SeqEncoder { kMeanPool, kBiLstm };
enum class OutputMode { kSoftmax, kSigmoid };

std::string encoder_name(SeqEncoder e);
SeqEncoder encoder_from_name(const std::string& name);
std::string output_name(OutputMode m);
OutputMode output_from_name(const std::string& name);

struct NetworkConfig {
  bool include_structured = true;
  // structured branch
  int structured_ffnn_layers = 2;
  int structured_width = 100;
  double structured_dropout = 0.20;
  // sequence branch
  SeqEncoder encoder = SeqEncoder::kMeanPool;
  int max_len = 32;
  int embed_dim = 100;
  int lstm_layers = 2;
  int lstm_hidden = 100;
  // classifier layers
  int classifier_width = 200;
  double classifier_dropout = 0.20;
  OutputMode output = OutputMode::kSoftmax;
  int classes = 3;

  void validate() const;
  std::string to_json() const;
  static NetworkConfig from_json(const std::string& json_text);
};

struct Batch {
  Matrix structured;  // B x 6 (may be empty when the branch is off)
  TokenBatch tokens;
  std::vector<int> labels;  // empty at inference
};

struct Checkpoint {
  int epoch = 0;
  std::vector<double> parameters;
  std::vector<double> buffers;
  std::vector<ParamStore::Slot> slots;
  double validation_loss = 0.0;
  std::string rng_state;  // opaque
  bool diverged = false;
};

// The dual-branch parent architecture: a batch-normalized structured branch,
// a pluggable sequence-encoder branch over token embeddings, concatenated
// into shared classifier layers.
class ParentNetwork {
 public:
  ParentNetwork(const NetworkConfig& config, int vocab_size, std::uint64_t init_seed);

  // Returns B x classes probabilities (softmax rows or per-entry sigmoid).
  Matrix forward(const Batch& batch, Mode mode, Rng& rng);
  double loss(const Matrix& probs, const std::vector<int>& labels) const;
  // Accumulates gradients for the last train-mode forward pass.
  void backward(const Matrix& probs, const std::vector<int>& labels);

  void set_embeddings(const Matrix& pretrained);  // vocab x embed_dim

  ParamStore& params() { return params_; }
  BufferStore& buffers() { return buffers_; }
  const NetworkConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }

  Checkpoint snapshot(int epoch, double val_loss, const Rng& rng) const;
  void restore(const Checkpoint& checkpoint);

 private:
  Matrix forward_structured(const Matrix& x, Mode mode, Rng& rng);
  Matrix forward_sequence(const TokenBatch& tokens, Mode mode);

  NetworkConfig config_;
  int vocab_size_ = 0;
  ParamStore params_;
  BufferStore buffers_;

  // structured branch
  std::optional<BatchNorm> bn_;
  std::vector<Dense> s_dense_;
  std::vector<Relu> s_relu_;
  std::vector<Dropout> s_drop_;
  // sequence branch
  std::optional<Embedding> embedding_;
  std::optional<MeanPool> mean_pool_;
  std::optional<LstmStack> lstm_;
  // classifier
  std::optional<Dense> c_hidden_;
  Relu c_relu_;
  std::optional<Dropout> c_drop_;
  std::optional<Dense> c_out_;

  int seq_out_dim_ = 0;
  int structured_out_dim_ = 0;
  Matrix logits_cache_;
};

// Checkpoint persistence: JSON metadata plus a little-endian double blob.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& json_path,
                     const std::string& blob_path);
Checkpoint load_checkpoint(const std::string& json_path, const std::string& blob_path);

}  // namespace scandoc::nn
