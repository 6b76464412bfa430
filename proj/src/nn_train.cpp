#include "scandoc/nn_train.hpp"

#include <cmath>
#include <numeric>

#include "scandoc/errors.hpp"
#include "scandoc/text.hpp"

namespace scandoc::nn {

Batch make_batch(const NnDataset& data, const std::vector<std::size_t>& order,
                 std::size_t begin, std::size_t end, int max_len, bool with_structured) {
  const int b = static_cast<int>(end - begin);
  Batch batch;
  batch.tokens.batch = b;
  batch.tokens.max_len = max_len;
  batch.tokens.ids.assign(static_cast<std::size_t>(b) * max_len, TokenCodec::kPad);
  batch.tokens.lengths.resize(static_cast<std::size_t>(b));
  if (with_structured) batch.structured = Matrix(b, 6);
  batch.labels.resize(static_cast<std::size_t>(b));

  for (int r = 0; r < b; ++r) {
    const std::size_t i = order[begin + static_cast<std::size_t>(r)];
    const auto& ids = data.token_ids[i];
    const int len = std::min<int>(static_cast<int>(ids.size()), max_len);
    batch.tokens.lengths[static_cast<std::size_t>(r)] = len;
    for (int t = 0; t < len; ++t) {
      batch.tokens.ids[static_cast<std::size_t>(r) * max_len + t] = ids[static_cast<std::size_t>(t)];
    }
    if (with_structured) {
      for (int f = 0; f < 6; ++f) batch.structured.at(r, f) = data.structured[i][static_cast<std::size_t>(f)];
    }
    batch.labels[static_cast<std::size_t>(r)] = data.labels[i];
  }
  return batch;
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    out += std::to_string(e + 1) + "," + format_double(train_loss[e]) + "," +
           format_double(val_loss[e]) + "\n";
  }
  return out;
}

double evaluate_loss(ParentNetwork& net, const NnDataset& data, int batch_size) {
  if (data.size() == 0) throw InvalidInputError("evaluate_loss: empty dataset");
  Rng rng(0);  // unused in infer mode
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const bool with_structured = net.config().include_structured;
  double total = 0.0;
  for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(batch_size));
    const Batch batch = make_batch(data, order, begin, end, net.config().max_len, with_structured);
    const Matrix probs = net.forward(batch, Mode::kInfer, rng);
    total += net.loss(probs, batch.labels) * static_cast<double>(end - begin);
  }
  return total / static_cast<double>(data.size());
}

Matrix predict_probabilities(ParentNetwork& net, const NnDataset& data, int batch_size) {
  Rng rng(0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const bool with_structured = net.config().include_structured;
  Matrix out(static_cast<int>(data.size()), net.config().classes);
  for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(batch_size));
    const Batch batch = make_batch(data, order, begin, end, net.config().max_len, with_structured);
    const Matrix probs = net.forward(batch, Mode::kInfer, rng);
    for (int r = 0; r < probs.rows; ++r) {
      for (int c = 0; c < probs.cols; ++c) {
        out.at(static_cast<int>(begin) + r, c) = probs.at(r, c);
      }
    }
  }
  return out;
}

TrainResult train_network(ParentNetwork& net, const TrainConfig& config,
                          const NnDataset& train_set, const NnDataset& val_set) {
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw InvalidInputError("train_network: train and validation sets must be nonempty");
  }
  if (config.batch_size < 1 || config.learning_rate <= 0.0) {
    throw InvalidInputError("train_network: bad batch size or learning rate");
  }

  Rng rng(derive_seed(config.seed, "train"));
  AdamState adam;
  TrainResult result;
  bool have_best = false;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const bool with_structured = net.config().include_structured;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    bool diverged = false;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const Batch batch =
          make_batch(train_set, order, begin, end, net.config().max_len, with_structured);
      net.params().zero_grad();
      const Matrix probs = net.forward(batch, Mode::kTrain, rng);
      const double batch_loss = net.loss(probs, batch.labels);
      if (!std::isfinite(batch_loss)) {
        diverged = true;
        break;
      }
      net.backward(probs, batch.labels);
      adam_step(std::span<double>(net.params().values),
                std::span<const double>(net.params().grads), adam, config);
      epoch_loss += batch_loss * static_cast<double>(end - begin);
    }
    if (diverged) {
      result.diverged = true;
      if (have_best) result.best.diverged = true;
      break;
    }
    epoch_loss /= static_cast<double>(train_set.size());
    const double val_loss = evaluate_loss(net, val_set);
    result.history.train_loss.push_back(epoch_loss);
    result.history.val_loss.push_back(val_loss);

    if (!have_best || val_loss < result.best.validation_loss) {
      result.best = net.snapshot(epoch, val_loss, rng);
      have_best = true;
    }
  }
  if (!have_best) throw NumericError("train_network: diverged before completing one epoch");
  return result;
}

}  // namespace scandoc::nn
