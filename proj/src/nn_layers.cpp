#include "scandoc/nn_layers.hpp"

#include <cmath>

#include "scandoc/errors.hpp"

namespace scandoc::nn {

namespace {

double glorot_limit(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
}

void fill_uniform(std::span<double> dst, double limit, Rng& rng) {
  for (double& v : dst) v = rng.uniform(-limit, limit);
}

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense::Dense(ParamStore& ps, const std::string& name, int in_dim, int out_dim, Rng& init)
    : in_(in_dim), out_(out_dim) {
  w_ = ps.add(name + ".W", static_cast<std::size_t>(in_dim) * out_dim);
  b_ = ps.add(name + ".b", static_cast<std::size_t>(out_dim));
  fill_uniform(ps.value_span(w_, static_cast<std::size_t>(in_dim) * out_dim),
               glorot_limit(in_dim, out_dim), init);
}

Matrix Dense::forward(const Matrix& x, ParamStore& ps) {
  if (x.cols != in_) throw InvalidInputError("dense: input width mismatch");
  x_cache_ = x;
  Matrix y(x.rows, out_);
  const double* w = ps.values.data() + w_;   // out_ x in_ row-major
  const double* b = ps.values.data() + b_;
  for (int r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double* yr = y.row(r);
    for (int o = 0; o < out_; ++o) {
      double acc = b[o];
      const double* wo = w + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) acc += wo[i] * xr[i];
      yr[o] = acc;
    }
  }
  return y;
}

Matrix Dense::backward(const Matrix& dy, ParamStore& ps) {
  Matrix dx(x_cache_.rows, in_);
  double* dw = ps.grads.data() + w_;
  double* db = ps.grads.data() + b_;
  const double* w = ps.values.data() + w_;
  for (int r = 0; r < dy.rows; ++r) {
    const double* dyr = dy.row(r);
    const double* xr = x_cache_.row(r);
    double* dxr = dx.row(r);
    for (int o = 0; o < out_; ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      db[o] += g;
      double* dwo = dw + static_cast<std::size_t>(o) * in_;
      const double* wo = w + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) {
        dwo[i] += g * xr[i];
        dxr[i] += g * wo[i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Relu / Dropout
// ---------------------------------------------------------------------------

Matrix Relu::forward(const Matrix& x) {
  x_cache_ = x;
  Matrix y = x;
  for (double& v : y.a) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix Relu::backward(const Matrix& dy) const {
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.a.size(); ++i) {
    if (x_cache_.a[i] <= 0.0) dx.a[i] = 0.0;
  }
  return dx;
}

Matrix Dropout::forward(const Matrix& x, Mode mode, Rng& rng) {
  if (mode == Mode::kInfer || p_ == 0.0) {
    identity_ = true;
    return x;
  }
  identity_ = false;
  mask_ = Matrix(x.rows, x.cols);
  const double keep = 1.0 - p_;
  Matrix y = x;
  for (std::size_t i = 0; i < y.a.size(); ++i) {
    const double m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    mask_.a[i] = m;
    y.a[i] *= m;
  }
  return y;
}

Matrix Dropout::backward(const Matrix& dy) const {
  if (identity_) return dy;
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.a.size(); ++i) dx.a[i] *= mask_.a[i];
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm
// ---------------------------------------------------------------------------

BatchNorm::BatchNorm(ParamStore& ps, BufferStore& bs, const std::string& name, int dim,
                     double momentum, double eps)
    : dim_(dim), momentum_(momentum), eps_(eps) {
  gamma_ = ps.add(name + ".gamma", static_cast<std::size_t>(dim));
  beta_ = ps.add(name + ".beta", static_cast<std::size_t>(dim));
  for (double& g : ps.value_span(gamma_, static_cast<std::size_t>(dim))) g = 1.0;
  run_mean_ = bs.add(name + ".running_mean", static_cast<std::size_t>(dim), 0.0);
  run_var_ = bs.add(name + ".running_var", static_cast<std::size_t>(dim), 1.0);
}

Matrix BatchNorm::forward(const Matrix& x, Mode mode, ParamStore& ps, BufferStore& bs) {
  if (x.cols != dim_) throw InvalidInputError("batchnorm: input width mismatch");
  const double* gamma = ps.values.data() + gamma_;
  const double* beta = ps.values.data() + beta_;
  Matrix y(x.rows, x.cols);
  xhat_cache_ = Matrix(x.rows, x.cols);
  invstd_cache_.assign(static_cast<std::size_t>(dim_), 0.0);

  const double n = static_cast<double>(x.rows);
  for (int f = 0; f < dim_; ++f) {
    double mean, var;
    if (mode == Mode::kTrain) {
      mean = 0.0;
      for (int r = 0; r < x.rows; ++r) mean += x.at(r, f);
      mean /= n;
      var = 0.0;
      for (int r = 0; r < x.rows; ++r) {
        const double d = x.at(r, f) - mean;
        var += d * d;
      }
      var /= n;  // biased
      bs.values[run_mean_ + f] = (1.0 - momentum_) * bs.values[run_mean_ + f] + momentum_ * mean;
      bs.values[run_var_ + f] = (1.0 - momentum_) * bs.values[run_var_ + f] + momentum_ * var;
    } else {
      mean = bs.values[run_mean_ + f];
      var = bs.values[run_var_ + f];
    }
    const double invstd = 1.0 / std::sqrt(var + eps_);
    invstd_cache_[f] = invstd;
    for (int r = 0; r < x.rows; ++r) {
      const double xhat = (x.at(r, f) - mean) * invstd;
      xhat_cache_.at(r, f) = xhat;
      y.at(r, f) = gamma[f] * xhat + beta[f];
    }
  }
  return y;
}

Matrix BatchNorm::backward(const Matrix& dy, ParamStore& ps) {
  const double* gamma = ps.values.data() + gamma_;
  double* dgamma = ps.grads.data() + gamma_;
  double* dbeta = ps.grads.data() + beta_;
  const double n = static_cast<double>(dy.rows);
  Matrix dx(dy.rows, dy.cols);
  for (int f = 0; f < dim_; ++f) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int r = 0; r < dy.rows; ++r) {
      sum_dy += dy.at(r, f);
      sum_dy_xhat += dy.at(r, f) * xhat_cache_.at(r, f);
    }
    dgamma[f] += sum_dy_xhat;
    dbeta[f] += sum_dy;
    const double scale = gamma[f] * invstd_cache_[f];
    for (int r = 0; r < dy.rows; ++r) {
      dx.at(r, f) = scale * (dy.at(r, f) - sum_dy / n -
                             xhat_cache_.at(r, f) * sum_dy_xhat / n);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Embedding / MeanPool
// ---------------------------------------------------------------------------

Embedding::Embedding(ParamStore& ps, const std::string& name, int vocab, int dim, Rng& init)
    : vocab_(vocab), dim_(dim) {
  w_ = ps.add(name + ".W", static_cast<std::size_t>(vocab) * dim);
  auto span = ps.value_span(w_, static_cast<std::size_t>(vocab) * dim);
  for (double& v : span) v = init.normal(0.0, 0.01);
  // PAD row stays zero so padded positions cannot leak signal.
  for (int j = 0; j < dim; ++j) span[static_cast<std::size_t>(TokenCodec::kPad) * dim + j] = 0.0;
}

Matrix Embedding::forward(const TokenBatch& tokens, ParamStore& ps) {
  tokens_cache_ = tokens;
  Matrix seq(tokens.batch * tokens.max_len, dim_);
  const double* w = ps.values.data() + w_;
  for (int b = 0; b < tokens.batch; ++b) {
    for (int t = 0; t < tokens.lengths[b]; ++t) {
      const int id = tokens.id_at(b, t);
      if (id < 0 || id >= vocab_) throw InvalidInputError("embedding: token id out of range");
      const double* row = w + static_cast<std::size_t>(id) * dim_;
      double* dst = seq.row(b * tokens.max_len + t);
      for (int j = 0; j < dim_; ++j) dst[j] = row[j];
    }
  }
  return seq;
}

void Embedding::backward(const Matrix& d_seq, ParamStore& ps) {
  double* dw = ps.grads.data() + w_;
  for (int b = 0; b < tokens_cache_.batch; ++b) {
    for (int t = 0; t < tokens_cache_.lengths[b]; ++t) {
      const int id = tokens_cache_.id_at(b, t);
      const double* src = d_seq.row(b * tokens_cache_.max_len + t);
      double* dst = dw + static_cast<std::size_t>(id) * dim_;
      for (int j = 0; j < dim_; ++j) dst[j] += src[j];
    }
  }
}

Matrix MeanPool::forward(const Matrix& seq, const TokenBatch& tokens) {
  tokens_cache_ = tokens;
  const int dim = seq.cols;
  Matrix y(tokens.batch, dim);
  for (int b = 0; b < tokens.batch; ++b) {
    const int len = tokens.lengths[b];
    if (len == 0) continue;
    double* yr = y.row(b);
    for (int t = 0; t < len; ++t) {
      const double* sr = seq.row(b * tokens.max_len + t);
      for (int j = 0; j < dim; ++j) yr[j] += sr[j];
    }
    for (int j = 0; j < dim; ++j) yr[j] /= static_cast<double>(len);
  }
  return y;
}

Matrix MeanPool::backward(const Matrix& dy) const {
  const int dim = dy.cols;
  Matrix d_seq(tokens_cache_.batch * tokens_cache_.max_len, dim);
  for (int b = 0; b < tokens_cache_.batch; ++b) {
    const int len = tokens_cache_.lengths[b];
    if (len == 0) continue;
    const double* dyr = dy.row(b);
    for (int t = 0; t < len; ++t) {
      double* dst = d_seq.row(b * tokens_cache_.max_len + t);
      for (int j = 0; j < dim; ++j) dst[j] = dyr[j] / static_cast<double>(len);
    }
  }
  return d_seq;
}

// ---------------------------------------------------------------------------
// LstmStack
// ---------------------------------------------------------------------------

LstmStack::LstmStack(ParamStore& ps, const std::string& name, int input_dim, int hidden,
                     int layers, Rng& init)
    : hidden_(hidden), layers_(layers) {
  for (int l = 0; l < layers; ++l) {
    const int in_dim = l == 0 ? input_dim : 2 * hidden;
    std::array<DirParams, 2> pair;
    for (int d = 0; d < 2; ++d) {
      const std::string base =
          name + ".l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      DirParams dp;
      dp.in_dim = in_dim;
      dp.w_ih = ps.add(base + ".W_ih", static_cast<std::size_t>(4 * hidden) * in_dim);
      dp.w_hh = ps.add(base + ".W_hh", static_cast<std::size_t>(4 * hidden) * hidden);
      dp.b = ps.add(base + ".b", static_cast<std::size_t>(4 * hidden));
      fill_uniform(ps.value_span(dp.w_ih, static_cast<std::size_t>(4 * hidden) * in_dim),
                   glorot_limit(in_dim, hidden), init);
      fill_uniform(ps.value_span(dp.w_hh, static_cast<std::size_t>(4 * hidden) * hidden),
                   glorot_limit(hidden, hidden), init);
      // Forget-gate bias starts at 1 (gate order: i, f, g, o).
      auto bias = ps.value_span(dp.b, static_cast<std::size_t>(4 * hidden));
      for (int j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;
      pair[d] = dp;
    }
    dirs_.push_back(pair);
  }
}

LstmStack::DirCache LstmStack::run_direction(const Matrix& seq_in, const TokenBatch& tokens,
                                             const DirParams& dp, bool backward_dir,
                                             Matrix* out_seq, ParamStore& ps) const {
  const int batch = tokens.batch;
  const int max_len = tokens.max_len;
  const int h = hidden_;
  const double* w_ih = ps.values.data() + dp.w_ih;
  const double* w_hh = ps.values.data() + dp.w_hh;
  const double* bias = ps.values.data() + dp.b;

  DirCache cache;
  Matrix h_state(batch, h);
  Matrix c_state(batch, h);
  cache.steps.reserve(static_cast<std::size_t>(max_len));

  for (int step = 0; step < max_len; ++step) {
    const int t = backward_dir ? max_len - 1 - step : step;
    StepCache sc;
    sc.x = Matrix(batch, dp.in_dim);
    for (int b = 0; b < batch; ++b) {
      const double* src = seq_in.row(b * max_len + t);
      double* dst = sc.x.row(b);
      for (int j = 0; j < dp.in_dim; ++j) dst[j] = src[j];
    }
    sc.h_prev = h_state;
    sc.c_prev = c_state;
    sc.gi = Matrix(batch, h);
    sc.gf = Matrix(batch, h);
    sc.gg = Matrix(batch, h);
    sc.go = Matrix(batch, h);
    sc.c_new = Matrix(batch, h);
    sc.h_new = Matrix(batch, h);

    for (int b = 0; b < batch; ++b) {
      if (t >= tokens.lengths[b]) continue;  // padded step, carry state
      const double* xb = sc.x.row(b);
      const double* hb = sc.h_prev.row(b);
      for (int j = 0; j < h; ++j) {
        double pre[4];
        for (int gate = 0; gate < 4; ++gate) {
          const int row_idx = gate * h + j;
          double acc = bias[row_idx];
          const double* wi = w_ih + static_cast<std::size_t>(row_idx) * dp.in_dim;
          for (int k = 0; k < dp.in_dim; ++k) acc += wi[k] * xb[k];
          const double* wh = w_hh + static_cast<std::size_t>(row_idx) * h;
          for (int k = 0; k < h; ++k) acc += wh[k] * hb[k];
          pre[gate] = acc;
        }
        const double gi = sigmoid_scalar(pre[0]);
        const double gf = sigmoid_scalar(pre[1]);
        const double gg = std::tanh(pre[2]);
        const double go = sigmoid_scalar(pre[3]);
        const double c_new = gf * sc.c_prev.at(b, j) + gi * gg;
        const double h_new = go * std::tanh(c_new);
        sc.gi.at(b, j) = gi;
        sc.gf.at(b, j) = gf;
        sc.gg.at(b, j) = gg;
        sc.go.at(b, j) = go;
        sc.c_new.at(b, j) = c_new;
        sc.h_new.at(b, j) = h_new;
        h_state.at(b, j) = h_new;
        c_state.at(b, j) = c_new;
      }
      if (out_seq) {
        double* dst = out_seq->row(b * max_len + t) + (backward_dir ? h : 0);
        for (int j = 0; j < h; ++j) dst[j] = h_state.at(b, j);
      }
    }
    cache.steps.push_back(std::move(sc));
  }
  cache.h_final = h_state;
  cache.c_final = c_state;
  return cache;
}

Matrix LstmStack::forward(const Matrix& seq, const TokenBatch& tokens, ParamStore& ps) {
  tokens_cache_ = tokens;
  caches_.assign(static_cast<std::size_t>(layers_), {});
  layer_inputs_.assign(static_cast<std::size_t>(layers_), Matrix());

  Matrix current = seq;
  for (int l = 0; l < layers_; ++l) {
    layer_inputs_[l] = current;
    Matrix out_seq(tokens.batch * tokens.max_len, 2 * hidden_);
    caches_[l][0] = run_direction(current, tokens, dirs_[l][0], false, &out_seq, ps);
    caches_[l][1] = run_direction(current, tokens, dirs_[l][1], true, &out_seq, ps);
    current = std::move(out_seq);
  }

  // Final states of the top layer.
  Matrix out(tokens.batch, 2 * hidden_);
  const auto& top_fwd = caches_[layers_ - 1][0];
  const auto& top_bwd = caches_[layers_ - 1][1];
  for (int b = 0; b < tokens.batch; ++b) {
    for (int j = 0; j < hidden_; ++j) {
      out.at(b, j) = top_fwd.h_final.at(b, j);
      out.at(b, hidden_ + j) = top_bwd.h_final.at(b, j);
    }
  }
  return out;
}

Matrix LstmStack::backprop_direction(const DirParams& dp, const DirCache& cache,
                                     const TokenBatch& tokens, bool backward_dir,
                                     const Matrix& d_out_seq, const Matrix& d_h_final,
                                     ParamStore& ps) const {
  const int batch = tokens.batch;
  const int max_len = tokens.max_len;
  const int h = hidden_;
  const double* w_ih = ps.values.data() + dp.w_ih;
  const double* w_hh = ps.values.data() + dp.w_hh;
  double* dw_ih = ps.grads.data() + dp.w_ih;
  double* dw_hh = ps.grads.data() + dp.w_hh;
  double* db = ps.grads.data() + dp.b;

  Matrix d_seq(batch * max_len, dp.in_dim);
  Matrix dh = d_h_final.rows ? d_h_final : Matrix(batch, h);
  Matrix dc(batch, h);

  for (int step = max_len - 1; step >= 0; --step) {
    const int t = backward_dir ? max_len - 1 - step : step;
    const StepCache& sc = cache.steps[static_cast<std::size_t>(step)];
    Matrix dh_prev(batch, h);
    Matrix dc_prev(batch, h);

    for (int b = 0; b < batch; ++b) {
      const bool active = t < tokens.lengths[b];
      if (!active) {
        // Carried state: gradients flow through untouched.
        for (int j = 0; j < h; ++j) {
          dh_prev.at(b, j) = dh.at(b, j);
          dc_prev.at(b, j) = dc.at(b, j);
        }
        continue;
      }
      const double* xb = sc.x.row(b);
      const double* hb = sc.h_prev.row(b);
      for (int j = 0; j < h; ++j) {
        double dh_bj = dh.at(b, j);
        if (d_out_seq.rows) {
          dh_bj += d_out_seq.at(b * max_len + t, (backward_dir ? h : 0) + j);
        }
        const double gi = sc.gi.at(b, j);
        const double gf = sc.gf.at(b, j);
        const double gg = sc.gg.at(b, j);
        const double go = sc.go.at(b, j);
        const double c_new = sc.c_new.at(b, j);
        const double tanh_c = std::tanh(c_new);

        const double d_o = dh_bj * tanh_c;
        double d_c = dc.at(b, j) + dh_bj * go * (1.0 - tanh_c * tanh_c);
        const double d_f = d_c * sc.c_prev.at(b, j);
        const double d_i = d_c * gg;
        const double d_g = d_c * gi;
        dc_prev.at(b, j) = d_c * gf;

        const double dpre[4] = {d_i * gi * (1.0 - gi), d_f * gf * (1.0 - gf),
                                d_g * (1.0 - gg * gg), d_o * go * (1.0 - go)};
        for (int gate = 0; gate < 4; ++gate) {
          const int row_idx = gate * h + j;
          const double g = dpre[gate];
          if (g == 0.0) continue;
          db[row_idx] += g;
          double* dwi = dw_ih + static_cast<std::size_t>(row_idx) * dp.in_dim;
          double* dst_x = d_seq.row(b * max_len + t);
          const double* wi = w_ih + static_cast<std::size_t>(row_idx) * dp.in_dim;
          for (int k = 0; k < dp.in_dim; ++k) {
            dwi[k] += g * xb[k];
            dst_x[k] += g * wi[k];
          }
          double* dwh = dw_hh + static_cast<std::size_t>(row_idx) * h;
          const double* wh = w_hh + static_cast<std::size_t>(row_idx) * h;
          for (int k = 0; k < h; ++k) {
            dwh[k] += g * hb[k];
            dh_prev.at(b, k) += g * wh[k];
          }
        }
      }
    }
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
  return d_seq;
}

Matrix LstmStack::backward(const Matrix& d_final, ParamStore& ps) {
  const int batch = tokens_cache_.batch;
  const int max_len = tokens_cache_.max_len;

  // Split the final-state gradient into the two top-layer directions.
  Matrix d_h_fwd(batch, hidden_);
  Matrix d_h_bwd(batch, hidden_);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < hidden_; ++j) {
      d_h_fwd.at(b, j) = d_final.at(b, j);
      d_h_bwd.at(b, j) = d_final.at(b, hidden_ + j);
    }
  }

  const Matrix empty;
  Matrix d_layer_out;  // gradient w.r.t. a layer's output sequence
  for (int l = layers_ - 1; l >= 0; --l) {
    const bool top = l == layers_ - 1;
    Matrix d_in_fwd = backprop_direction(dirs_[l][0], caches_[l][0], tokens_cache_, false,
                                         top ? empty : d_layer_out,
                                         top ? d_h_fwd : empty, ps);
    Matrix d_in_bwd = backprop_direction(dirs_[l][1], caches_[l][1], tokens_cache_, true,
                                         top ? empty : d_layer_out,
                                         top ? d_h_bwd : empty, ps);
    Matrix d_in(batch * max_len, dirs_[l][0].in_dim);
    for (std::size_t i = 0; i < d_in.a.size(); ++i) {
      d_in.a[i] = d_in_fwd.a[i] + d_in_bwd.a[i];
    }
    d_layer_out = std::move(d_in);
  }
  return d_layer_out;
}

// ---------------------------------------------------------------------------
// Output activations and losses
// ---------------------------------------------------------------------------

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (int r = 0; r < logits.rows; ++r) {
    const double* zr = logits.row(r);
    double m = zr[0];
    for (int c = 1; c < logits.cols; ++c) m = std::max(m, zr[c]);
    double z = 0.0;
    double* pr = p.row(r);
    for (int c = 0; c < logits.cols; ++c) {
      pr[c] = std::exp(zr[c] - m);
      z += pr[c];
    }
    for (int c = 0; c < logits.cols; ++c) pr[c] /= z;
  }
  return p;
}

Matrix sigmoid(const Matrix& logits) {
  Matrix p = logits;
  for (double& v : p.a) v = sigmoid_scalar(v);
  return p;
}

double cross_entropy_softmax(const Matrix& probs, const std::vector<int>& labels) {
  double loss = 0.0;
  for (int r = 0; r < probs.rows; ++r) {
    loss -= std::log(std::max(probs.at(r, labels[static_cast<std::size_t>(r)]), 1e-300));
  }
  return loss / static_cast<double>(probs.rows);
}

double cross_entropy_sigmoid(const Matrix& probs, const std::vector<int>& labels) {
  double loss = 0.0;
  for (int r = 0; r < probs.rows; ++r) {
    for (int c = 0; c < probs.cols; ++c) {
      const double y = labels[static_cast<std::size_t>(r)] == c ? 1.0 : 0.0;
      const double p = std::clamp(probs.at(r, c), 1e-300, 1.0 - 1e-16);
      loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
  }
  return loss / static_cast<double>(probs.rows);
}

Matrix output_grad(const Matrix& probs, const std::vector<int>& labels) {
  Matrix d(probs.rows, probs.cols);
  const double inv_n = 1.0 / static_cast<double>(probs.rows);
  for (int r = 0; r < probs.rows; ++r) {
    for (int c = 0; c < probs.cols; ++c) {
      const double y = labels[static_cast<std::size_t>(r)] == c ? 1.0 : 0.0;
      d.at(r, c) = (probs.at(r, c) - y) * inv_n;
    }
  }
  return d;
}

}  // namespace scandoc::nn
