#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "scandoc/errors.hpp"
#include "scandoc/nn.hpp"
#include "scandoc/nn_cbow.hpp"
#include "scandoc/nn_train.hpp"

using namespace scandoc;
using namespace scandoc::nn;

namespace {

// Tiny separable task: class 0 speaks tokens {2,3}, class 1 {4,5}, class 2 {6,7},
// and the structured block nudges the same way.
NnDataset toy_dataset(int per_class, std::uint64_t seed, int max_len = 21) {
  Rng rng(seed);
  NnDataset data;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_class; ++i) {
      std::array<double, 6> s{};
      s[0] = c * 10.0 + rng.normal(0.0, 0.5);
      s[5] = c == 0 ? rng.uniform(0.5, 30.0) : (c == 1 ? rng.uniform(60.0, 100.0) : rng.uniform(100.0, 400.0));
      data.structured.push_back(s);
      std::vector<int> ids;
      const int len = 3 + static_cast<int>(rng.below(4));
      for (int t = 0; t < len && t < max_len; ++t) {
        ids.push_back(2 + 2 * c + static_cast<int>(rng.below(2)));
      }
      data.token_ids.push_back(ids);
      data.labels.push_back(c);
    }
  }
  return data;
}

NetworkConfig tiny_config() {
  NetworkConfig config;
  config.structured_width = 12;
  config.classifier_width = 16;
  config.embed_dim = 8;
  config.max_len = 21;
  return config;
}

}  // namespace

TEST_CASE("adam closed-form steps") {
  TrainConfig config;
  config.learning_rate = 0.01;

  AdamState state;
  std::vector<double> params = {1.0, -2.0};
  std::vector<double> grads = {0.0, 0.0};
  adam_step(params, grads, state, config);
  CHECK(params[0] == 1.0);
  CHECK(params[1] == -2.0);

  // Step 1 with g=1: m_hat = 1, v_hat = 1 -> update = lr / (1 + eps).
  AdamState s2;
  std::vector<double> p2 = {0.0};
  std::vector<double> g2 = {1.0};
  adam_step(p2, g2, s2, config);
  CHECK(p2[0] == doctest::Approx(-config.learning_rate / (1.0 + config.eps)).epsilon(1e-12));

  // Gradients g and 2g produce equal step-1 magnitudes.
  AdamState s3;
  std::vector<double> p3 = {0.0, 0.0};
  std::vector<double> g3 = {0.5, 1.0};
  adam_step(p3, g3, s3, config);
  CHECK(std::fabs(p3[0]) == doctest::Approx(std::fabs(p3[1])).epsilon(1e-9));

  CHECK_THROWS_AS(adam_step(p3, std::vector<double>{1.0}, s3, config), InvalidInputError);
}

TEST_CASE("token codec") {
  const TokenCodec codec = TokenCodec::build({{"apnea", "index"}, {"index", "sleep"}});
  CHECK(codec.vocab_size() == 5);  // pad, unk, apnea, index, sleep
  CHECK(codec.id_of("apnea") >= 2);
  CHECK(codec.id_of("never-seen") == TokenCodec::kUnk);
  const auto ids = codec.encode({"apnea", "index", "apnea", "sleep"}, 3);
  CHECK(ids.size() == 3);  // tail truncation

  const TokenCodec back = TokenCodec::from_json(codec.to_json());
  CHECK(back.to_token == codec.to_token);
}

TEST_CASE("CBOW pretraining behavior") {
  Rng rng(3);
  std::vector<std::vector<int>> corpus;
  for (int s = 0; s < 60; ++s) {
    std::vector<int> sentence;
    // Two topic clusters force informative embeddings.
    const int base = s % 2 == 0 ? 2 : 7;
    for (int t = 0; t < 17; ++t) sentence.push_back(base + static_cast<int>(rng.below(5)));
    corpus.push_back(std::move(sentence));
  }
  CbowConfig config;
  config.dim = 8;
  config.window = 3;
  config.negatives = 4;
  config.seed = 11;

  CbowConfig zero = config;
  zero.epochs = 0;
  const auto init_a = pretrain_cbow(corpus, 12, zero);
  const auto init_b = pretrain_cbow(corpus, 12, zero);
  CHECK(init_a.embeddings.a == init_b.embeddings.a);
  CHECK(init_a.epoch_loss.empty());

  config.epochs = 5;
  const auto trained = pretrain_cbow(corpus, 12, config);
  REQUIRE(trained.epoch_loss.size() == 5);
  CHECK(trained.epoch_loss[4] < trained.epoch_loss[0]);

  const auto again = pretrain_cbow(corpus, 12, config);
  CHECK(trained.embeddings.a == again.embeddings.a);

  CHECK_THROWS_AS(pretrain_cbow({}, 12, config), InvalidInputError);
  CHECK_THROWS_AS(pretrain_cbow({{}}, 12, config), InvalidInputError);
}

TEST_CASE("train_network selects the best checkpoint and is reproducible") {
  const NnDataset train = toy_dataset(18, 21);
  const NnDataset val = toy_dataset(5, 22);

  TrainConfig tconfig;
  tconfig.batch_size = 16;
  tconfig.learning_rate = 5e-3;
  tconfig.epochs = 30;
  tconfig.seed = 77;

  ParentNetwork net(tiny_config(), 10, 5);
  const auto result = train_network(net, tconfig, train, val);
  REQUIRE(result.history.val_loss.size() == 30);
  CHECK_FALSE(result.diverged);

  // Validation loss halves on the separable toy task.
  CHECK(result.history.val_loss[29] < 0.5 * result.history.val_loss[0]);
  // Best checkpoint attains the minimum.
  double best = result.history.val_loss[0];
  for (double v : result.history.val_loss) best = std::min(best, v);
  CHECK(result.best.validation_loss == doctest::Approx(best));

  // Single epoch: that checkpoint wins by construction.
  ParentNetwork net1(tiny_config(), 10, 5);
  TrainConfig one = tconfig;
  one.epochs = 1;
  const auto single = train_network(net1, one, train, val);
  CHECK(single.best.epoch == 1);

  // Bit-identical reruns.
  ParentNetwork net_a(tiny_config(), 10, 5);
  ParentNetwork net_b(tiny_config(), 10, 5);
  const auto run_a = train_network(net_a, tconfig, train, val);
  const auto run_b = train_network(net_b, tconfig, train, val);
  CHECK(run_a.history.train_loss == run_b.history.train_loss);
  CHECK(run_a.history.val_loss == run_b.history.val_loss);
  CHECK(run_a.best.parameters == run_b.best.parameters);
}

TEST_CASE("divergence aborts with the flag set") {
  const NnDataset train = toy_dataset(10, 31);
  const NnDataset val = toy_dataset(3, 32);
  TrainConfig tconfig;
  tconfig.batch_size = 8;
  tconfig.learning_rate = 1e150;  // drives parameters to overflow
  tconfig.epochs = 10;
  tconfig.seed = 1;
  ParentNetwork net(tiny_config(), 10, 2);
  try {
    const auto result = train_network(net, tconfig, train, val);
    CHECK(result.diverged);
    CHECK(result.history.val_loss.size() < 10);
  } catch (const NumericError&) {
    // Diverged inside the first epoch: also a legal outcome.
    CHECK(true);
  }
}

TEST_CASE("checkpoint restore and persistence round trip") {
  namespace fs = std::filesystem;
  const NnDataset train = toy_dataset(12, 41);
  const NnDataset val = toy_dataset(4, 42);
  TrainConfig tconfig;
  tconfig.batch_size = 8;
  tconfig.learning_rate = 5e-3;
  tconfig.epochs = 8;
  tconfig.seed = 9;
  ParentNetwork net(tiny_config(), 10, 7);
  const auto result = train_network(net, tconfig, train, val);

  net.restore(result.best);
  const Matrix probs = predict_probabilities(net, val);

  const fs::path dir = fs::temp_directory_path() / "scandoc_ckpt_test";
  fs::create_directories(dir);
  save_checkpoint(result.best, (dir / "c.json").string(), (dir / "c.bin").string());
  const Checkpoint loaded = load_checkpoint((dir / "c.json").string(), (dir / "c.bin").string());
  CHECK(loaded.parameters == result.best.parameters);
  CHECK(loaded.buffers == result.best.buffers);
  CHECK(loaded.epoch == result.best.epoch);
  CHECK(loaded.validation_loss == doctest::Approx(result.best.validation_loss));

  ParentNetwork fresh(tiny_config(), 10, 999);  // different init seed
  fresh.restore(loaded);
  const Matrix probs2 = predict_probabilities(fresh, val);
  CHECK(probs.a == probs2.a);
  fs::remove_all(dir);

  Checkpoint wrong = loaded;
  wrong.parameters.pop_back();
  CHECK_THROWS_AS(fresh.restore(wrong), InvalidInputError);
}

TEST_CASE("empty and padded rows are handled") {
  NnDataset data;
  data.structured.push_back({1, 2, 3, 4, 5, 6});
  data.token_ids.push_back({});  // empty segment
  data.labels.push_back(2);
  data.structured.push_back({0, 0, 0, 0, 1, 19.5});
  data.token_ids.push_back({2, 3});
  data.labels.push_back(0);

  ParentNetwork net(tiny_config(), 10, 3);
  const Matrix probs = predict_probabilities(net, data);
  REQUIRE(probs.rows == 2);
  for (int r = 0; r < 2; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) sum += probs.at(r, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}
