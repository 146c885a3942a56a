#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "synergy/encoders.hpp"
#include "synergy/fusion.hpp"
#include "synergy/tensor.hpp"

namespace synergy {

// Answer decoder: a one-layer LSTM whose hidden state is fused with the fixed
// context vector e_p at every step, then projected onto the vocabulary.
struct DecoderParams {
  EmbeddingTable embedding;  // shared with the encoders
  LstmParams lstm;           // emb_dim -> d, one layer
  MfbParams mfb;             // (h_j [d], e_p [l]) -> [l]
  Tensor out_w;              // [vocab × l]
  Tensor out_b;              // [vocab]
  std::size_t start_token = Vocabulary::kStart;
  std::size_t end_token = Vocabulary::kEnd;

  static DecoderParams create(EmbeddingTable embedding, std::size_t d, std::size_t factors, std::size_t fused,
                              std::mt19937_64& rng);
  std::size_t vocab_size() const { return out_w.rows(); }
};

struct DecodeStep {
  Tensor distribution;  // softmax over the vocabulary
  Tensor log_probs;
  Tensor h;
  Tensor c;
};

DecodeStep decode_step(const Tensor& h_prev, const Tensor& c_prev, std::size_t w_prev, const Tensor& context,
                       const DecoderParams& p);

// Σⱼ log p(wⱼ | w<ⱼ, e_p) over the answer followed by END, decoding from START
// with h₀ = `initial_hidden` and a zero cell.
Tensor answer_log_prob(std::span<const std::size_t> answer, const Tensor& initial_hidden, const Tensor& context,
                       const DecoderParams& p);

struct BeamHypothesis {
  TokenIds tokens;  // without START; complete hypotheses end with END
  double log_prob = 0.0;
  bool complete = false;
};

// Keeps the `width` best partial sequences per step, moving END-terminated
// ones to the complete list. Partials alive after `max_len` steps top up the
// result when fewer than `width` sequences completed. Sorted by log-prob desc.
std::vector<BeamHypothesis> beam_search(const Tensor& initial_hidden, const Tensor& context, std::size_t width,
                                        std::size_t max_len, const DecoderParams& p);

// Ordering used by beam_search: higher log-prob first, then lexicographic tokens.
bool beam_before(const BeamHypothesis& a, const BeamHypothesis& b);

}  // namespace synergy
