#include "scandoc/nn.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "scandoc/errors.hpp"
#include "scandoc/hash.hpp"
#include "scandoc/text.hpp"

namespace scandoc::nn {

using nlohmann::json;

std::string encoder_name(SeqEncoder e) {
  return e == SeqEncoder::kMeanPool ? "mean_pool" : "bilstm";
}

SeqEncoder encoder_from_name(const std::string& name) {
  if (name == "mean_pool") return SeqEncoder::kMeanPool;
  if (name == "bilstm") return SeqEncoder::kBiLstm;
  throw InvalidInputError("unknown sequence encoder: " + name);
}

std::string output_name(OutputMode m) {
  return m == OutputMode::kSoftmax ? "softmax" : "sigmoid";
}

OutputMode output_from_name(const std::string& name) {
  if (name == "softmax") return OutputMode::kSoftmax;
  if (name == "sigmoid") return OutputMode::kSigmoid;
  throw InvalidInputError("unknown output mode: " + name);
}

void NetworkConfig::validate() const {
  if (structured_width <= 0 || classifier_width <= 0 || embed_dim <= 0 || lstm_hidden <= 0) {
    throw InvalidInputError("network config: widths must be positive");
  }
  if (structured_dropout < 0.0 || structured_dropout >= 1.0 || classifier_dropout < 0.0 ||
      classifier_dropout >= 1.0) {
    throw InvalidInputError("network config: dropout must be in [0,1)");
  }
  if (max_len < 21) {
    throw InvalidInputError("network config: max_len must hold a full 21-word segment");
  }
  if (structured_ffnn_layers < 1 || lstm_layers < 1 || classes < 2) {
    throw InvalidInputError("network config: bad layer/class counts");
  }
}

std::string NetworkConfig::to_json() const {
  json j;
  j["include_structured"] = include_structured;
  j["structured_ffnn_layers"] = structured_ffnn_layers;
  j["structured_width"] = structured_width;
  j["structured_dropout"] = structured_dropout;
  j["encoder"] = encoder_name(encoder);
  j["max_len"] = max_len;
  j["embed_dim"] = embed_dim;
  j["lstm_layers"] = lstm_layers;
  j["lstm_hidden"] = lstm_hidden;
  j["classifier_width"] = classifier_width;
  j["classifier_dropout"] = classifier_dropout;
  j["output"] = output_name(output);
  j["classes"] = classes;
  return j.dump();
}

NetworkConfig NetworkConfig::from_json(const std::string& json_text) {
  const auto j = json::parse(json_text);
  NetworkConfig c;
  c.include_structured = j.value("include_structured", true);
  c.structured_ffnn_layers = j.value("structured_ffnn_layers", 2);
  c.structured_width = j.value("structured_width", 100);
  c.structured_dropout = j.value("structured_dropout", 0.20);
  c.encoder = encoder_from_name(j.value("encoder", "mean_pool"));
  c.max_len = j.value("max_len", 32);
  c.embed_dim = j.value("embed_dim", 100);
  c.lstm_layers = j.value("lstm_layers", 2);
  c.lstm_hidden = j.value("lstm_hidden", 100);
  c.classifier_width = j.value("classifier_width", 200);
  c.classifier_dropout = j.value("classifier_dropout", 0.20);
  c.output = output_from_name(j.value("output", "softmax"));
  c.classes = j.value("classes", 3);
  c.validate();
  return c;
}

ParentNetwork::ParentNetwork(const NetworkConfig& config, int vocab_size,
                             std::uint64_t init_seed)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size < 2) throw InvalidInputError("network: vocabulary too small");
  Rng init(derive_seed(init_seed, "net-init"));

  constexpr int kStructuredDim = 6;
  if (config_.include_structured) {
    bn_.emplace(params_, buffers_, "structured.bn", kStructuredDim);
    int in_dim = kStructuredDim;
    for (int l = 0; l < config_.structured_ffnn_layers; ++l) {
      s_dense_.emplace_back(params_, "structured.fc" + std::to_string(l), in_dim,
                            config_.structured_width, init);
      s_relu_.emplace_back();
      s_drop_.emplace_back(config_.structured_dropout);
      in_dim = config_.structured_width;
    }
    structured_out_dim_ = in_dim;
  }

  embedding_.emplace(params_, "sequence.embedding", vocab_size, config_.embed_dim, init);
  if (config_.encoder == SeqEncoder::kMeanPool) {
    mean_pool_.emplace();
    seq_out_dim_ = config_.embed_dim;
  } else {
    lstm_.emplace(params_, "sequence.bilstm", config_.embed_dim, config_.lstm_hidden,
                  config_.lstm_layers, init);
    seq_out_dim_ = lstm_->out_dim();
  }

  const int concat_dim = structured_out_dim_ + seq_out_dim_;
  c_hidden_.emplace(params_, "classifier.fc", concat_dim, config_.classifier_width, init);
  c_drop_.emplace(config_.classifier_dropout);
  c_out_.emplace(params_, "classifier.out", config_.classifier_width, config_.classes, init);
}

void ParentNetwork::set_embeddings(const Matrix& pretrained) {
  if (pretrained.rows != vocab_size_ || pretrained.cols != config_.embed_dim) {
    throw InvalidInputError("set_embeddings: shape mismatch");
  }
  auto dst = params_.value_span(embedding_->weight_offset(),
                                static_cast<std::size_t>(vocab_size_) * config_.embed_dim);
  std::copy(pretrained.a.begin(), pretrained.a.end(), dst.begin());
  // PAD row must stay silent.
  for (int j = 0; j < config_.embed_dim; ++j) dst[static_cast<std::size_t>(TokenCodec::kPad) * config_.embed_dim + j] = 0.0;
}

Matrix ParentNetwork::forward_structured(const Matrix& x, Mode mode, Rng& rng) {
  Matrix h = bn_->forward(x, mode, params_, buffers_);
  for (std::size_t l = 0; l < s_dense_.size(); ++l) {
    h = s_dense_[l].forward(h, params_);
    h = s_relu_[l].forward(h);
    h = s_drop_[l].forward(h, mode, rng);
  }
  return h;
}

Matrix ParentNetwork::forward_sequence(const TokenBatch& tokens, Mode mode) {
  (void)mode;
  Matrix seq = embedding_->forward(tokens, params_);
  if (config_.encoder == SeqEncoder::kMeanPool) {
    return mean_pool_->forward(seq, tokens);
  }
  return lstm_->forward(seq, tokens, params_);
}

Matrix ParentNetwork::forward(const Batch& batch, Mode mode, Rng& rng) {
  if (batch.tokens.max_len != config_.max_len) {
    throw InvalidInputError("forward: token rows must be padded to max_len");
  }
  if (batch.tokens.batch <= 0) throw InvalidInputError("forward: empty batch");
  Matrix seq_out = forward_sequence(batch.tokens, mode);

  Matrix joined;
  if (config_.include_structured) {
    if (batch.structured.rows != batch.tokens.batch || batch.structured.cols != 6) {
      throw InvalidInputError("forward: structured block must be batch x 6");
    }
    Matrix s_out = forward_structured(batch.structured, mode, rng);
    joined = Matrix(s_out.rows, structured_out_dim_ + seq_out_dim_);
    for (int r = 0; r < s_out.rows; ++r) {
      std::memcpy(joined.row(r), s_out.row(r), sizeof(double) * structured_out_dim_);
      std::memcpy(joined.row(r) + structured_out_dim_, seq_out.row(r),
                  sizeof(double) * seq_out_dim_);
    }
  } else {
    joined = std::move(seq_out);
  }

  Matrix h = c_hidden_->forward(joined, params_);
  h = c_relu_.forward(h);
  h = c_drop_->forward(h, mode, rng);
  logits_cache_ = c_out_->forward(h, params_);
  return config_.output == OutputMode::kSoftmax ? softmax_rows(logits_cache_)
                                                : sigmoid(logits_cache_);
}

double ParentNetwork::loss(const Matrix& probs, const std::vector<int>& labels) const {
  if (static_cast<int>(labels.size()) != probs.rows) {
    throw InvalidInputError("loss: label count mismatch");
  }
  return config_.output == OutputMode::kSoftmax ? cross_entropy_softmax(probs, labels)
                                                : cross_entropy_sigmoid(probs, labels);
}

void ParentNetwork::backward(const Matrix& probs, const std::vector<int>& labels) {
  Matrix d = output_grad(probs, labels);
  d = c_out_->backward(d, params_);
  d = c_drop_->backward(d);
  d = c_relu_.backward(d);
  d = c_hidden_->backward(d, params_);

  Matrix d_seq_out;
  if (config_.include_structured) {
    Matrix d_struct(d.rows, structured_out_dim_);
    d_seq_out = Matrix(d.rows, seq_out_dim_);
    for (int r = 0; r < d.rows; ++r) {
      std::memcpy(d_struct.row(r), d.row(r), sizeof(double) * structured_out_dim_);
      std::memcpy(d_seq_out.row(r), d.row(r) + structured_out_dim_,
                  sizeof(double) * seq_out_dim_);
    }
    for (std::size_t l = s_dense_.size(); l-- > 0;) {
      d_struct = s_drop_[l].backward(d_struct);
      d_struct = s_relu_[l].backward(d_struct);
      d_struct = s_dense_[l].backward(d_struct, params_);
    }
    bn_->backward(d_struct, params_);
  } else {
    d_seq_out = std::move(d);
  }

  Matrix d_emb_seq;
  if (config_.encoder == SeqEncoder::kMeanPool) {
    d_emb_seq = mean_pool_->backward(d_seq_out);
  } else {
    d_emb_seq = lstm_->backward(d_seq_out, params_);
  }
  embedding_->backward(d_emb_seq, params_);
}

Checkpoint ParentNetwork::snapshot(int epoch, double val_loss, const Rng& rng) const {
  Checkpoint cp;
  cp.epoch = epoch;
  cp.parameters = params_.values;
  cp.buffers = buffers_.values;
  cp.slots = params_.slots;
  cp.validation_loss = val_loss;
  const auto state = rng.state();
  cp.rng_state = hex64(state[0]) + hex64(state[1]) + hex64(state[2]) + hex64(state[3]);
  return cp;
}

void ParentNetwork::restore(const Checkpoint& checkpoint) {
  if (checkpoint.parameters.size() != params_.values.size() ||
      checkpoint.buffers.size() != buffers_.values.size()) {
    throw InvalidInputError("restore: checkpoint does not match this architecture");
  }
  params_.values = checkpoint.parameters;
  buffers_.values = checkpoint.buffers;
}

namespace {

void append_doubles(std::string& blob, const std::vector<double>& v) {
  // Little-endian doubles; all supported targets are little-endian.
  const auto* bytes = reinterpret_cast<const char*>(v.data());
  blob.append(bytes, v.size() * sizeof(double));
}

std::vector<double> read_doubles(const std::string& blob, std::size_t offset_bytes,
                                 std::size_t count) {
  std::vector<double> out(count);
  std::memcpy(out.data(), blob.data() + offset_bytes, count * sizeof(double));
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& json_path,
                     const std::string& blob_path) {
  json j;
  j["format_version"] = "1";
  j["epoch"] = checkpoint.epoch;
  j["validation_loss"] = checkpoint.validation_loss;
  j["rng_state"] = checkpoint.rng_state;
  j["diverged"] = checkpoint.diverged;
  j["parameter_count"] = checkpoint.parameters.size();
  j["buffer_count"] = checkpoint.buffers.size();
  json slots = json::array();
  for (const auto& s : checkpoint.slots) {
    slots.push_back({{"name", s.name}, {"offset", s.offset}, {"size", s.size}});
  }
  j["slots"] = std::move(slots);
  write_file(json_path, j.dump(2));

  std::string blob;
  append_doubles(blob, checkpoint.parameters);
  append_doubles(blob, checkpoint.buffers);
  write_file(blob_path, blob);
}

Checkpoint load_checkpoint(const std::string& json_path, const std::string& blob_path) {
  const auto j = json::parse(read_file(json_path));
  Checkpoint cp;
  cp.epoch = j.at("epoch").get<int>();
  cp.validation_loss = j.at("validation_loss").get<double>();
  cp.rng_state = j.at("rng_state").get<std::string>();
  cp.diverged = j.at("diverged").get<bool>();
  const auto n_params = j.at("parameter_count").get<std::size_t>();
  const auto n_buffers = j.at("buffer_count").get<std::size_t>();
  for (const auto& s : j.at("slots")) {
    cp.slots.push_back({s.at("name").get<std::string>(), s.at("offset").get<std::size_t>(),
                        s.at("size").get<std::size_t>()});
  }
  const std::string blob = read_file(blob_path);
  if (blob.size() != (n_params + n_buffers) * sizeof(double)) {
    throw ParseError("checkpoint blob size mismatch: " + blob_path);
  }
  cp.parameters = read_doubles(blob, 0, n_params);
  cp.buffers = read_doubles(blob, n_params * sizeof(double), n_buffers);
  return cp;
}

}  // namespace scandoc::nn
