#include "synergy/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "synergy/errors.hpp"
#include "synergy/init.hpp"
#include "synergy/ops.hpp"

namespace synergy {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials = {"PAD", "UNK", "START", "END"};
  return specials;
}

bool is_special(std::string_view token) {
  const auto& s = special_tokens();
  return std::find(s.begin(), s.end(), token) != s.end();
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Vocabulary::Vocabulary() : tokens_(special_tokens()) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

Vocabulary Vocabulary::build(std::span<const TokenSeq> corpus, std::size_t min_count) {
  if (corpus.empty()) throw ValueError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpus)
    for (const auto& tok : seq)
      if (!is_special(tok)) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n > min_count) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return from_tokens(tokens, min_count);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens, std::size_t min_count) {
  Vocabulary v;
  v.min_count_ = min_count;
  for (const auto& tok : tokens) {
    if (is_special(tok)) throw DataError("vocabulary token '" + tok + "' collides with a special");
    if (!v.index_.emplace(tok, v.tokens_.size()).second)
      throw DataError("duplicate vocabulary token '" + tok + "'");
    v.tokens_.push_back(tok);
  }
  return v;
}

std::size_t Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size())
    throw ShapeError("token index " + std::to_string(index) + " out of vocabulary of " +
                     std::to_string(tokens_.size()));
  return tokens_[index];
}

TokenIds Vocabulary::encode(const TokenSeq& tokens) const {
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

TokenSeq Vocabulary::decode(std::span<const std::size_t> ids) const {
  TokenSeq out;
  for (auto id : ids) out.push_back(token(id));
  return out;
}

nlohmann::json Vocabulary::to_json() const {
  std::vector<std::string> regular(tokens_.begin() + kNumSpecials, tokens_.end());
  return {{"tokens", regular}, {"min_count", min_count_}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  try {
    return from_tokens(j.at("tokens").get<std::vector<std::string>>(), j.value("min_count", 0));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed vocabulary: ") + e.what());
  }
}

EmbeddingTable EmbeddingTable::create(std::size_t vocab_size, std::size_t emb_dim, std::mt19937_64& rng) {
  return {uniform_param(Shape{vocab_size, emb_dim}, rng)};
}

Tensor embed_tokens(std::span<const std::size_t> tokens, const EmbeddingTable& table) {
  return ops::gather_rows(table.weights, tokens);
}

LstmParams LstmParams::create(std::size_t input_dim, std::size_t hidden, std::size_t num_layers,
                              std::mt19937_64& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t in = l == 0 ? input_dim : hidden;
    p.layers.push_back({uniform_param(Shape{4 * hidden, in + hidden}, rng),
                        Tensor(Shape{4 * hidden}, 0.0, true)});
  }
  return p;
}

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden, std::size_t num_layers) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t in = l == 0 ? input_dim : hidden;
    p.layers.push_back({Tensor(Shape{4 * hidden, in + hidden}, 0.0, true), Tensor(Shape{4 * hidden}, 0.0, true)});
  }
  return p;
}

LstmState lstm_step(const LstmLayer& layer, const Tensor& x, const LstmState& prev) {
  const std::size_t d = prev.h.numel();
  if (layer.weights.rows() != 4 * d || layer.weights.cols() != x.numel() + d)
    throw ShapeError("lstm_step: weights " + shape_to_string(layer.weights.shape()) +
                     " do not fit input " + shape_to_string(x.shape()) + " and hidden " +
                     std::to_string(d));
  Tensor gates = ops::add(ops::matvec(layer.weights, ops::concat(x, prev.h)), layer.bias);
  Tensor i = ops::sigmoid(ops::slice(gates, 0, d));
  Tensor f = ops::sigmoid(ops::slice(gates, d, d));
  Tensor g = ops::tanh(ops::slice(gates, 2 * d, d));
  Tensor o = ops::sigmoid(ops::slice(gates, 3 * d, d));
  Tensor c = ops::add(ops::mul(f, prev.c), ops::mul(i, g));
  Tensor h = ops::mul(o, ops::tanh(c));
  return {h, c};
}

RoleConfig role_config(TextRole role) {
  switch (role) {
    case TextRole::Question: return {2, 20};
    case TextRole::HistoryItem: return {2, 40};
    case TextRole::Answer: return {1, 20};
    case TextRole::QAPair: return {1, 40};
  }
  return {1, 20};
}

std::string_view role_name(TextRole role) {
  switch (role) {
    case TextRole::Question: return "question";
    case TextRole::HistoryItem: return "history";
    case TextRole::Answer: return "answer";
    case TextRole::QAPair: return "qa_pair";
  }
  return "unknown";
}

namespace {

TokenIds take(std::span<const std::size_t> tokens, std::size_t n) {
  return TokenIds(tokens.begin(), tokens.begin() + std::min(n, tokens.size()));
}

}  // namespace

TokenIds question_tokens(std::span<const std::size_t> question) {
  return take(question, role_config(TextRole::Question).max_length);
}

TokenIds history_tokens(std::span<const std::size_t> question, std::span<const std::size_t> answer) {
  TokenIds out(question.begin(), question.end());
  out.insert(out.end(), answer.begin(), answer.end());
  return take(out, role_config(TextRole::HistoryItem).max_length);
}

TokenIds answer_tokens(std::span<const std::size_t> answer) {
  const std::size_t room = role_config(TextRole::Answer).max_length - 2;
  TokenIds out{Vocabulary::kStart};
  auto body = take(answer, room);
  out.insert(out.end(), body.begin(), body.end());
  out.push_back(Vocabulary::kEnd);
  return out;
}

TokenIds qa_pair_tokens(std::span<const std::size_t> question, std::span<const std::size_t> answer) {
  TokenIds out = question_tokens(question);
  const auto a = answer_tokens(answer);
  out.insert(out.end(), a.begin(), a.end());
  return take(out, role_config(TextRole::QAPair).max_length);
}

TextEncoder::TextEncoder(TextRole role, LstmParams params) : role_(role), params_(std::move(params)) {
  const auto cfg = role_config(role);
  if (params_.layers.size() != cfg.layers)
    throw ValueError(std::string(role_name(role)) + " encoder needs " + std::to_string(cfg.layers) +
                     " LSTM layers, got " + std::to_string(params_.layers.size()));
}

Tensor TextEncoder::encode(std::span<const std::size_t> tokens, const EmbeddingTable& table) const {
  TokenIds real;
  for (auto t : tokens)
    if (t != Vocabulary::kPad) real.push_back(t);
  const auto cfg = role_config(role_);
  if (real.size() > cfg.max_length) real.resize(cfg.max_length);
  if (real.empty()) throw ValueError(std::string(role_name(role_)) + " sequence is empty after truncation");
  if (table.dim() != params_.input_dim)
    throw ShapeError("embedding dim " + std::to_string(table.dim()) + " does not match LSTM input " +
                     std::to_string(params_.input_dim));

  const Tensor embedded = embed_tokens(real, table);
  std::vector<Tensor> inputs;
  inputs.reserve(real.size());
  for (std::size_t t = 0; t < real.size(); ++t) inputs.push_back(ops::row(embedded, t));

  const std::size_t d = params_.hidden;
  for (const auto& layer : params_.layers) {
    LstmState state{Tensor(Shape{d}), Tensor(Shape{d})};
    std::vector<Tensor> outputs;
    outputs.reserve(inputs.size());
    for (const auto& x : inputs) {
      state = lstm_step(layer, x, state);
      outputs.push_back(state.h);
    }
    inputs = std::move(outputs);
  }
  return inputs.back();
}

}  // namespace synergy
