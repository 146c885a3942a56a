#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "synergy/config.hpp"
#include "synergy/encoders.hpp"

namespace synergy {

struct DialogTurn {
  TokenSeq question;
  TokenSeq answer;  // ground truth, identical to candidates[gt_index]
  std::vector<TokenSeq> candidates;
  std::size_t gt_index = 0;
  std::vector<double> relevance;
};

struct DialogRecord {
  std::string dialog_id;
  std::vector<std::vector<double>> object_features;  // n rows of feature_dim
  TokenSeq caption;
  std::vector<DialogTurn> turns;

  std::size_t feature_dim() const { return object_features.empty() ? 0 : object_features.front().size(); }
  // Throws DataError when the record breaks its invariants.
  void validate() const;

  nlohmann::json to_json() const;
  static DialogRecord from_json(const nlohmann::json& j);
};

// Scene vocabulary of the synthetic world. Object features are the
// concatenated one-hot codes [color | kind | count] plus Gaussian noise.
namespace world {
const std::vector<std::string>& colors();
const std::vector<std::string>& kinds();
const std::vector<std::string>& count_words();  // index i names count i+1
std::size_t feature_dim();
}  // namespace world

// Deterministic in (config, seed).
std::vector<DialogRecord> generate_synthetic_dataset(const DataConfig& config, std::uint64_t seed);

void write_dataset(const std::string& path, const std::vector<DialogRecord>& dialogs);
std::vector<DialogRecord> read_dataset(const std::string& path);

// Questions, ground-truth answers and captions: the text the vocabulary is built from.
std::vector<TokenSeq> vocabulary_corpus(const std::vector<DialogRecord>& dialogs);

// Token ids and feature tensor of one dialog.
struct EncodedTurn {
  TokenIds question;
  TokenIds answer;
  std::vector<TokenIds> candidates;
  std::size_t gt_index = 0;
  std::vector<double> relevance;
};

struct EncodedDialog {
  std::string dialog_id;
  Tensor features;  // [feature_dim × n]
  TokenIds caption;
  std::vector<EncodedTurn> turns;
};

EncodedDialog encode_dialog(const DialogRecord& record, const Vocabulary& vocab);
std::vector<EncodedDialog> encode_dataset(const std::vector<DialogRecord>& dialogs, const Vocabulary& vocab);

}  // namespace synergy
