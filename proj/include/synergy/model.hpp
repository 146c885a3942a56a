#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "synergy/config.hpp"
#include "synergy/dataset.hpp"
#include "synergy/encoders.hpp"
#include "synergy/generative.hpp"
#include "synergy/ranking.hpp"

namespace synergy {

using NamedTensor = std::pair<std::string, Tensor>;

// The full two-stage ranker: shared embeddings and encoders, the primary
// scorer (discriminative projection or generative decoder) and the
// synergistic re-ranker.
class Model {
 public:
  // `config.dims.feature_dim` must be set.
  static Model create(const RunConfig& config, Vocabulary vocab, std::mt19937_64& rng);

  const RunConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ModelKind kind() const { return config_.kind; }

  // Every trainable tensor under a stable dotted name, in a fixed order.
  std::vector<NamedTensor> parameters() const;
  // Parameters reached by the primary loss alone.
  std::vector<NamedTensor> primary_parameters() const;

  // Object features [feature_dim × n] -> V [d × n].
  Tensor project_image(const Tensor& features) const;
  // Question, history (caption then earlier question/answer pairs) and image
  // for turn `t`, fused.
  EncodedContext encode_turn(const EncodedDialog& dialog, std::size_t t) const;

  // Score of every candidate, [C].
  Tensor primary_scores(const EncodedContext& ctx, const EncodedTurn& turn) const;
  // N-pair loss with temperature (discriminative) or the negative
  // log-likelihood of the ground truth (generative).
  Tensor primary_loss(const Tensor& scores, const EncodedTurn& turn) const;
  // Re-scores `selected` candidates, [N].
  Tensor synergy_scores(const EncodedContext& ctx, const EncodedTurn& turn,
                        std::span<const std::size_t> selected) const;
  // One-hot on the ground truth, or normalized relevance when soft labels are on.
  Tensor synergy_labels(const EncodedTurn& turn, std::span<const std::size_t> selected) const;

  std::vector<BeamHypothesis> generate(const EncodedContext& ctx, std::size_t width, std::size_t max_len) const;

  // {config, vocab, params: {name: {shape, data}}}
  nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& j);

 private:
  Model() = default;

  RunConfig config_;
  Vocabulary vocab_;
  EmbeddingTable embedding_;
  std::optional<TextEncoder> question_encoder_;
  std::optional<TextEncoder> history_encoder_;
  std::optional<TextEncoder> answer_encoder_;
  std::optional<TextEncoder> qa_encoder_;
  Tensor image_w_;  // [d × feature_dim]
  Tensor image_b_;  // [d]
  ContextParams context_;
  AnswerProjection answer_projection_;
  DecoderParams decoder_;
  SynergyParams synergy_;
};

}  // namespace synergy
