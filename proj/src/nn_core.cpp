#include "scandoc/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "scandoc/errors.hpp"

namespace scandoc::nn {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& config) {
  if (params.size() != grads.size()) {
    throw InvalidInputError("adam_step: parameter/gradient size mismatch");
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

TokenCodec TokenCodec::build(const std::vector<std::vector<std::string>>& corpus) {
  std::set<std::string> unique;
  for (const auto& tokens : corpus) unique.insert(tokens.begin(), tokens.end());
  TokenCodec codec;
  codec.to_token = {"<pad>", "<unk>"};
  codec.to_id = {{"<pad>", kPad}, {"<unk>", kUnk}};
  for (const auto& token : unique) {
    codec.to_id.emplace(token, static_cast<int>(codec.to_token.size()));
    codec.to_token.push_back(token);
  }
  return codec;
}

std::vector<int> TokenCodec::encode(const std::vector<std::string>& tokens, int max_len) const {
  std::vector<int> ids;
  ids.reserve(std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_len)));
  for (const auto& t : tokens) {
    if (static_cast<int>(ids.size()) >= max_len) break;
    ids.push_back(id_of(t));
  }
  return ids;
}

std::string TokenCodec::to_json() const {
  nlohmann::json j;
  j["tokens"] = to_token;
  return j.dump();
}

TokenCodec TokenCodec::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  TokenCodec codec;
  codec.to_token = j.at("tokens").get<std::vector<std::string>>();
  if (codec.to_token.size() < 2 || codec.to_token[0] != "<pad>" || codec.to_token[1] != "<unk>") {
    throw ParseError("token codec JSON: missing <pad>/<unk> ids");
  }
  for (std::size_t i = 0; i < codec.to_token.size(); ++i) {
    codec.to_id.emplace(codec.to_token[i], static_cast<int>(i));
  }
  return codec;
}

}  // namespace scandoc::nn
