#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "synergy/fusion.hpp"
#include "synergy/tensor.hpp"

namespace synergy {

// Fusion weights of the input encoder: history attention, image attention and
// the final question/history/image embedding.
struct ContextParams {
  MfbParams history_mfb;        // (m_q, U)
  AttentionParams history_att;
  MfbParams image_mfb;          // ([m_q : m_h], V)
  AttentionParams image_att;
  MfbParams embed_mfb;          // ([m_q : m_h], m_v)

  static ContextParams create(std::size_t d, std::size_t factors, std::size_t fused, std::mt19937_64& rng);
};

struct EncodedContext {
  Tensor question;   // m_q [d]
  Tensor history;    // U [d × t]
  Attended history_attention;  // α_h [t], m_h [d]
  Tensor image;      // V [d × n]
  Attended image_attention;    // α_v [n], m_v [d]
  Tensor fused;      // e_p [l]

  std::size_t turn() const { return history.cols(); }
  std::size_t objects() const { return image.cols(); }
  const Tensor& attended_history() const { return history_attention.attended; }
};

// History attention, image attention with [m_q : m_h] as the query, then the
// final fusion with the attended image.
EncodedContext encode_context(const Tensor& question, const Tensor& history, const Tensor& image,
                              const ContextParams& p);

// One-layer tanh projection of answer encodings into the fused space.
struct AnswerProjection {
  Tensor w;  // [l × d]
  Tensor b;  // [l]

  static AnswerProjection create(std::size_t d, std::size_t fused, std::mt19937_64& rng);
};

// s_i = e_pᵀ tanh(W m_a,i + b) for answer encodings [d × C].
Tensor primary_score(const EncodedContext& ctx, const Tensor& answer_encodings, const AnswerProjection& f);

// log Σᵢ exp((sᵢ − s_gt)/τ).
Tensor npair_temperature_loss(const Tensor& scores, std::size_t gt, double tau);

enum class SelectionMode { Train, Test };

// Test: top-N by score. Train: the ground truth plus N−1 distinct candidates
// drawn uniformly from the top-M, excluding the ground truth. Output is in
// primary rank order either way.
std::vector<std::size_t> select_candidates(std::span<const double> scores, std::size_t n, std::size_t m,
                                           SelectionMode mode, std::optional<std::size_t> gt,
                                           std::mt19937_64& rng);

struct SynergyParams {
  MfbParams image_mfb;    // ([m_b : m_h], V)
  AttentionParams image_att;
  MfbParams embed_mfb;    // ([m_b : m_h], m_r)
  Tensor score_w;         // [l]
  Tensor score_b;         // [1]

  static SynergyParams create(std::size_t d, std::size_t factors, std::size_t fused, std::mt19937_64& rng);
};

// Re-scores question-answer encodings [d × N]. Each pair attends the image on
// its own; the attended history and image features come from the primary stage.
Tensor synergistic_score(const Tensor& qa_encodings, const Tensor& attended_history, const Tensor& image,
                         const SynergyParams& p);

// −Σ y_j log softmax(s)_j.
Tensor synergy_cross_entropy(const Tensor& scores, const Tensor& labels);

// Selected candidates in synergy order, then the rest in primary order.
std::vector<std::size_t> fuse_rankings(std::span<const double> primary, std::span<const std::size_t> selected,
                                       std::span<const double> synergy);

}  // namespace synergy
