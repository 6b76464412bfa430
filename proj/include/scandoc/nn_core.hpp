#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "scandoc/rng.hpp"

namespace scandoc::nn {

// Dense row-major matrix of doubles; the only tensor type the net uses.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
};

// Flat parameter/gradient arena. Layers allocate named slots at build time;
// a checkpoint is a copy of `values` plus the slot table.
class ParamStore {
 public:
  struct Slot {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  std::size_t add(const std::string& name, std::size_t count) {
    const std::size_t offset = values.size();
    slots.push_back({name, offset, count});
    values.resize(offset + count, 0.0);
    grads.resize(offset + count, 0.0);
    return offset;
  }

  std::span<double> value_span(std::size_t offset, std::size_t count) {
    return {values.data() + offset, count};
  }
  std::span<double> grad_span(std::size_t offset, std::size_t count) {
    return {grads.data() + offset, count};
  }

  void zero_grad() { std::fill(grads.begin(), grads.end(), 0.0); }

  std::vector<double> values;
  std::vector<double> grads;
  std::vector<Slot> slots;
};

// Non-trainable state (batch-norm running statistics).
class BufferStore {
 public:
  std::size_t add(const std::string& name, std::size_t count, double fill = 0.0) {
    const std::size_t offset = values.size();
    slots.push_back({name, offset, count});
    values.resize(offset + count, fill);
    return offset;
  }
  std::vector<double> values;
  std::vector<ParamStore::Slot> slots;
};

enum class Mode { kTrain, kInfer };

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 2e-4;
  int epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

// One bias-corrected Adam update over the whole parameter vector.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& config);

// Token ids for the sequence branch. PAD=0, UNK=1, then the training
// vocabulary in lexicographic order.
struct TokenCodec {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::unordered_map<std::string, int> to_id;
  std::vector<std::string> to_token;  // index -> token, [0]="<pad>", [1]="<unk>"

  static TokenCodec build(const std::vector<std::vector<std::string>>& corpus);
  int vocab_size() const { return static_cast<int>(to_token.size()); }
  int id_of(const std::string& token) const {
    const auto it = to_id.find(token);
    return it == to_id.end() ? kUnk : it->second;
  }
  // Encode, truncating the tail at max_len. No padding here.
  std::vector<int> encode(const std::vector<std::string>& tokens, int max_len) const;

  std::string to_json() const;
  static TokenCodec from_json(const std::string& json_text);
};

}  // namespace scandoc::nn
