#pragma once

#include <array>
#include <optional>

#include "scandoc/nn_core.hpp"

namespace scandoc::nn {

// A batch of padded token-id rows. ids is B x T row-major; lengths hold the
// count of non-PAD (leading) positions per row.
struct TokenBatch {
  int batch = 0;
  int max_len = 0;
  std::vector<int> ids;      // batch * max_len
  std::vector<int> lengths;  // per row, <= max_len

  int id_at(int b, int t) const { return ids[static_cast<std::size_t>(b) * max_len + t]; }
};

class Dense {
 public:
  Dense(ParamStore& ps, const std::string& name, int in_dim, int out_dim, Rng& init);
  Matrix forward(const Matrix& x, ParamStore& ps);
  Matrix backward(const Matrix& dy, ParamStore& ps);
  int in_dim() const { return in_; }
  int out_dim() const { return out_; }

 private:
  int in_ = 0, out_ = 0;
  std::size_t w_ = 0, b_ = 0;
  Matrix x_cache_;
};

class Relu {
 public:
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy) const;

 private:
  Matrix x_cache_;
};

// Inverted dropout: kept activations are scaled by 1/(1-p) at train time.
class Dropout {
 public:
  explicit Dropout(double p) : p_(p) {}
  Matrix forward(const Matrix& x, Mode mode, Rng& rng);
  Matrix backward(const Matrix& dy) const;

 private:
  double p_;
  Matrix mask_;
  bool identity_ = true;
};

// Batch normalization over features. Train mode normalizes with biased batch
// statistics; infer mode uses the running estimates kept in the buffer store.
class BatchNorm {
 public:
  BatchNorm(ParamStore& ps, BufferStore& bs, const std::string& name, int dim,
            double momentum = 0.1, double eps = 1e-9);
  Matrix forward(const Matrix& x, Mode mode, ParamStore& ps, BufferStore& bs);
  Matrix backward(const Matrix& dy, ParamStore& ps);

 private:
  int dim_ = 0;
  double momentum_;
  double eps_;
  std::size_t gamma_ = 0, beta_ = 0;      // params
  std::size_t run_mean_ = 0, run_var_ = 0;  // buffers
  Matrix xhat_cache_;
  std::vector<double> invstd_cache_;
};

// Embedding lookup producing a (B*T) x E sequence matrix; PAD rows stay zero.
class Embedding {
 public:
  Embedding(ParamStore& ps, const std::string& name, int vocab, int dim, Rng& init);
  Matrix forward(const TokenBatch& tokens, ParamStore& ps);
  void backward(const Matrix& d_seq, ParamStore& ps);
  int dim() const { return dim_; }
  std::size_t weight_offset() const { return w_; }
  int vocab() const { return vocab_; }

 private:
  int vocab_ = 0, dim_ = 0;
  std::size_t w_ = 0;
  TokenBatch tokens_cache_;
};

// Mean over non-PAD positions; all-PAD rows yield zeros.
class MeanPool {
 public:
  Matrix forward(const Matrix& seq, const TokenBatch& tokens);
  Matrix backward(const Matrix& dy) const;

 private:
  TokenBatch tokens_cache_;
};

// Stacked bidirectional LSTM. The encoder output is the concatenation of the
// top layer's final forward state (at t=len-1) and final backward state
// (after processing t=0). Padded steps carry state through unchanged.
class LstmStack {
 public:
  LstmStack(ParamStore& ps, const std::string& name, int input_dim, int hidden, int layers,
            Rng& init);
  Matrix forward(const Matrix& seq, const TokenBatch& tokens, ParamStore& ps);
  Matrix backward(const Matrix& d_final, ParamStore& ps);  // returns d_seq
  int out_dim() const { return 2 * hidden_; }

 private:
  struct DirParams {
    std::size_t w_ih = 0, w_hh = 0, b = 0;
    int in_dim = 0;
  };
  struct StepCache {
    Matrix x;        // B x in_dim (input at this step)
    Matrix h_prev, c_prev;
    Matrix gi, gf, gg, go;   // post-activation gates
    Matrix c_new, h_new;
  };
  struct DirCache {
    std::vector<StepCache> steps;  // in processing order
    Matrix h_final, c_final;
  };

  DirCache run_direction(const Matrix& seq_in, const TokenBatch& tokens, const DirParams& dp,
                         bool backward_dir, Matrix* out_seq, ParamStore& ps) const;
  // Backprop through one direction; d_out_seq may be empty (top layer).
  Matrix backprop_direction(const DirParams& dp, const DirCache& cache,
                            const TokenBatch& tokens, bool backward_dir,
                            const Matrix& d_out_seq, const Matrix& d_h_final,
                            ParamStore& ps) const;

  int hidden_ = 0;
  int layers_ = 0;
  std::vector<std::array<DirParams, 2>> dirs_;  // [layer][0=fwd,1=bwd]
  std::vector<std::array<DirCache, 2>> caches_;
  std::vector<Matrix> layer_inputs_;  // input sequence per layer
  TokenBatch tokens_cache_;
};

// Softmax probabilities per row (max-subtracted).
Matrix softmax_rows(const Matrix& logits);
// Elementwise logistic sigmoid.
Matrix sigmoid(const Matrix& logits);

// Mean categorical cross-entropy of softmax probabilities.
double cross_entropy_softmax(const Matrix& probs, const std::vector<int>& labels);
// Mean (over rows) summed binary cross-entropy of sigmoid outputs against
// one-hot targets.
double cross_entropy_sigmoid(const Matrix& probs, const std::vector<int>& labels);
// Both losses share d_logits = (probs - onehot) / batch.
Matrix output_grad(const Matrix& probs, const std::vector<int>& labels);

}  // namespace scandoc::nn
