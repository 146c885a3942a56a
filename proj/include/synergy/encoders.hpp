#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "synergy/tensor.hpp"

namespace synergy {

using TokenIds = std::vector<std::size_t>;
using TokenSeq = std::vector<std::string>;

// Lowercased whitespace split.
TokenSeq tokenize(std::string_view text);

// Token <-> index table. Indices 0..3 are PAD, UNK, START, END.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kStart = 2;
  static constexpr std::size_t kEnd = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocabulary();

  // Keeps tokens seen strictly more than `min_count` times, ordered by
  // frequency (descending) then lexicographically.
  static Vocabulary build(std::span<const TokenSeq> corpus, std::size_t min_count);
  // Specials followed by `tokens` in the given order.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens, std::size_t min_count);

  std::size_t size() const { return tokens_.size(); }
  std::size_t min_count() const { return min_count_; }
  // UNK for unknown tokens.
  std::size_t index(std::string_view token) const;
  const std::string& token(std::size_t index) const;
  TokenIds encode(const TokenSeq& tokens) const;
  TokenSeq decode(std::span<const std::size_t> ids) const;

  // {tokens: [...non-special...], min_count}
  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && min_count_ == other.min_count_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t min_count_ = 0;
};

// Word embeddings shared by every text role.
struct EmbeddingTable {
  Tensor weights;  // [vocab × emb_dim]

  static EmbeddingTable create(std::size_t vocab_size, std::size_t emb_dim, std::mt19937_64& rng);
  std::size_t vocab_size() const { return weights.rows(); }
  std::size_t dim() const { return weights.cols(); }
};

// Rows of the table for each token, as [T × emb_dim].
Tensor embed_tokens(std::span<const std::size_t> tokens, const EmbeddingTable& table);

struct LstmLayer {
  Tensor weights;  // [4d × (input + d)], gate blocks i, f, g, o
  Tensor bias;     // [4d]
};

struct LstmParams {
  std::vector<LstmLayer> layers;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;

  // Weights uniform(-0.08, 0.08), zero biases.
  static LstmParams create(std::size_t input_dim, std::size_t hidden, std::size_t num_layers,
                           std::mt19937_64& rng);
  static LstmParams zeros(std::size_t input_dim, std::size_t hidden, std::size_t num_layers);
};

struct LstmState {
  Tensor h;
  Tensor c;
};

// One cell update: gates = W·[x; h] + b.
LstmState lstm_step(const LstmLayer& layer, const Tensor& x, const LstmState& prev);

enum class TextRole { Question, HistoryItem, Answer, QAPair };

struct RoleConfig {
  std::size_t layers;
  std::size_t max_length;
};

RoleConfig role_config(TextRole role);
std::string_view role_name(TextRole role);

// Question truncated to its maximum length.
TokenIds question_tokens(std::span<const std::size_t> question);
// Caption, or question followed by its ground-truth answer.
TokenIds history_tokens(std::span<const std::size_t> question, std::span<const std::size_t> answer);
// START answer END.
TokenIds answer_tokens(std::span<const std::size_t> answer);
// question START answer END.
TokenIds qa_pair_tokens(std::span<const std::size_t> question, std::span<const std::size_t> answer);

// LSTM stack bound to a text role; the role fixes the layer count.
class TextEncoder {
 public:
  TextEncoder(TextRole role, LstmParams params);

  TextRole role() const { return role_; }
  const LstmParams& params() const { return params_; }

  // Last hidden state of the top layer. PAD tokens are skipped and the input is
  // truncated to the role's maximum length.
  Tensor encode(std::span<const std::size_t> tokens, const EmbeddingTable& table) const;

 private:
  TextRole role_;
  LstmParams params_;
};

}  // namespace synergy
