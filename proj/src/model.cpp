#include "synergy/model.hpp"

#include <algorithm>

#include "synergy/errors.hpp"
#include "synergy/init.hpp"
#include "synergy/ops.hpp"

namespace synergy {

namespace {

void add_lstm(std::vector<NamedTensor>& out, const std::string& prefix, const LstmParams& p) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    out.emplace_back(prefix + ".layer" + std::to_string(l) + ".weights", p.layers[l].weights);
    out.emplace_back(prefix + ".layer" + std::to_string(l) + ".bias", p.layers[l].bias);
  }
}

void add_mfb(std::vector<NamedTensor>& out, const std::string& prefix, const MfbParams& p) {
  out.emplace_back(prefix + ".u", p.u);
  out.emplace_back(prefix + ".v", p.v);
}

}  // namespace

Model Model::create(const RunConfig& config, Vocabulary vocab, std::mt19937_64& rng) {
  config.validate();
  const auto& dims = config.dims;
  if (dims.feature_dim == 0) throw ValueError("model needs a positive object feature width");
  Model m;
  m.config_ = config;
  m.vocab_ = std::move(vocab);
  const std::size_t d = dims.hidden;
  m.embedding_ = EmbeddingTable::create(m.vocab_.size(), dims.emb_dim, rng);
  auto encoder = [&](TextRole role) {
    return TextEncoder(role, LstmParams::create(dims.emb_dim, d, role_config(role).layers, rng));
  };
  m.question_encoder_.emplace(encoder(TextRole::Question));
  m.history_encoder_.emplace(encoder(TextRole::HistoryItem));
  m.image_w_ = uniform_param(Shape{d, dims.feature_dim}, rng);
  m.image_b_ = Tensor(Shape{d}, 0.0, true);
  m.context_ = ContextParams::create(d, dims.factors, dims.fused, rng);
  if (config.kind == ModelKind::Discriminative) {
    m.answer_encoder_.emplace(encoder(TextRole::Answer));
    m.answer_projection_ = AnswerProjection::create(d, dims.fused, rng);
  } else {
    m.decoder_ = DecoderParams::create(m.embedding_, d, dims.factors, dims.fused, rng);
  }
  m.qa_encoder_.emplace(encoder(TextRole::QAPair));
  m.synergy_ = SynergyParams::create(d, dims.factors, dims.fused, rng);
  return m;
}

std::vector<NamedTensor> Model::primary_parameters() const {
  std::vector<NamedTensor> out;
  out.emplace_back("embedding.weights", embedding_.weights);
  add_lstm(out, "question_encoder", question_encoder_->params());
  add_lstm(out, "history_encoder", history_encoder_->params());
  out.emplace_back("image.w", image_w_);
  out.emplace_back("image.b", image_b_);
  add_mfb(out, "context.history_mfb", context_.history_mfb);
  out.emplace_back("context.history_att.w", context_.history_att.w);
  add_mfb(out, "context.image_mfb", context_.image_mfb);
  out.emplace_back("context.image_att.w", context_.image_att.w);
  add_mfb(out, "context.embed_mfb", context_.embed_mfb);
  if (config_.kind == ModelKind::Discriminative) {
    add_lstm(out, "answer_encoder", answer_encoder_->params());
    out.emplace_back("answer_projection.w", answer_projection_.w);
    out.emplace_back("answer_projection.b", answer_projection_.b);
  } else {
    add_lstm(out, "decoder.lstm", decoder_.lstm);
    add_mfb(out, "decoder.mfb", decoder_.mfb);
    out.emplace_back("decoder.out_w", decoder_.out_w);
    out.emplace_back("decoder.out_b", decoder_.out_b);
  }
  return out;
}

std::vector<NamedTensor> Model::parameters() const {
  auto out = primary_parameters();
  add_lstm(out, "qa_encoder", qa_encoder_->params());
  add_mfb(out, "synergy.image_mfb", synergy_.image_mfb);
  out.emplace_back("synergy.image_att.w", synergy_.image_att.w);
  add_mfb(out, "synergy.embed_mfb", synergy_.embed_mfb);
  out.emplace_back("synergy.score_w", synergy_.score_w);
  out.emplace_back("synergy.score_b", synergy_.score_b);
  return out;
}

Tensor Model::project_image(const Tensor& features) const {
  if (features.rank() != 2 || features.rows() != image_w_.cols())
    throw DataError("object features " + shape_to_string(features.shape()) + " do not match the model's feature width " +
                    std::to_string(image_w_.cols()));
  return ops::tanh(ops::add_col_broadcast(ops::matmul(image_w_, features), image_b_));
}

EncodedContext Model::encode_turn(const EncodedDialog& dialog, std::size_t t) const {
  if (t >= dialog.turns.size()) throw ValueError("turn " + std::to_string(t) + " out of range");
  const auto& turn = dialog.turns[t];
  Tensor question = question_encoder_->encode(question_tokens(turn.question), embedding_);
  std::vector<Tensor> history;
  history.reserve(t + 1);
  history.push_back(history_encoder_->encode(dialog.caption, embedding_));
  for (std::size_t i = 0; i < t; ++i)
    history.push_back(
        history_encoder_->encode(history_tokens(dialog.turns[i].question, dialog.turns[i].answer), embedding_));
  return encode_context(question, ops::stack_columns(history), project_image(dialog.features), context_);
}

Tensor Model::primary_scores(const EncodedContext& ctx, const EncodedTurn& turn) const {
  if (config_.kind == ModelKind::Discriminative) {
    std::vector<Tensor> encoded;
    encoded.reserve(turn.candidates.size());
    for (const auto& c : turn.candidates) encoded.push_back(answer_encoder_->encode(answer_tokens(c), embedding_));
    return primary_score(ctx, ops::stack_columns(encoded), answer_projection_);
  }
  std::vector<Tensor> scores;
  scores.reserve(turn.candidates.size());
  for (const auto& c : turn.candidates) scores.push_back(answer_log_prob(c, ctx.question, ctx.fused, decoder_));
  return ops::concat(scores);
}

Tensor Model::primary_loss(const Tensor& scores, const EncodedTurn& turn) const {
  if (config_.kind == ModelKind::Discriminative) return npair_temperature_loss(scores, turn.gt_index, config_.tau);
  return ops::scale(ops::pick(scores, turn.gt_index), -1.0);
}

Tensor Model::synergy_scores(const EncodedContext& ctx, const EncodedTurn& turn,
                             std::span<const std::size_t> selected) const {
  std::vector<Tensor> encoded;
  encoded.reserve(selected.size());
  for (std::size_t i : selected)
    encoded.push_back(qa_encoder_->encode(qa_pair_tokens(turn.question, turn.candidates.at(i)), embedding_));
  return synergistic_score(ops::stack_columns(encoded), ctx.attended_history(), ctx.image, synergy_);
}

Tensor Model::synergy_labels(const EncodedTurn& turn, std::span<const std::size_t> selected) const {
  std::vector<double> y(selected.size(), 0.0);
  if (config_.soft_labels) {
    double total = 0.0;
    for (std::size_t j = 0; j < selected.size(); ++j) total += y[j] = turn.relevance.at(selected[j]);
    if (total > 0.0) {
      for (auto& v : y) v /= total;
      return Tensor::vector(std::move(y));
    }
    std::fill(y.begin(), y.end(), 0.0);
  }
  const auto it = std::find(selected.begin(), selected.end(), turn.gt_index);
  if (it == selected.end()) throw ValueError("ground truth is not among the selected candidates");
  y[static_cast<std::size_t>(it - selected.begin())] = 1.0;
  return Tensor::vector(std::move(y));
}

std::vector<BeamHypothesis> Model::generate(const EncodedContext& ctx, std::size_t width, std::size_t max_len) const {
  if (config_.kind != ModelKind::Generative) throw ValueError("beam search needs a generative model");
  return beam_search(ctx.question, ctx.fused, width, max_len, decoder_);
}

nlohmann::json Model::to_json() const {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : parameters()) params[name] = {{"shape", t.shape()}, {"data", t.values()}};
  return {{"config", config_.to_json()}, {"vocab", vocab_.to_json()}, {"params", params}};
}

Model Model::from_json(const nlohmann::json& j) {
  try {
    const RunConfig config = RunConfig::from_json(j.at("config"));
    std::mt19937_64 rng(0);
    Model m = create(config, Vocabulary::from_json(j.at("vocab")), rng);
    const auto& params = j.at("params");
    for (auto& [name, t] : m.parameters()) {
      if (!params.contains(name)) throw DataError("checkpoint lacks parameter " + name);
      const auto& p = params.at(name);
      const auto shape = p.at("shape").get<Shape>();
      if (shape != t.shape())
        throw DataError("parameter " + name + " has shape " + shape_to_string(shape) + ", expected " +
                        shape_to_string(t.shape()));
      const auto data = p.at("data").get<std::vector<double>>();
      if (data.size() != t.numel()) throw DataError("parameter " + name + " has the wrong number of values");
      std::copy(data.begin(), data.end(), t.mutable_data().begin());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
}

}  // namespace synergy
