#include "synergy/generative.hpp"

#include <algorithm>

#include "synergy/errors.hpp"
#include "synergy/init.hpp"
#include "synergy/ops.hpp"

namespace synergy {

DecoderParams DecoderParams::create(EmbeddingTable embedding, std::size_t d, std::size_t factors,
                                    std::size_t fused, std::mt19937_64& rng) {
  DecoderParams p;
  const std::size_t vocab = embedding.vocab_size();
  p.lstm = LstmParams::create(embedding.dim(), d, 1, rng);
  p.mfb = MfbParams::create(d, fused, factors, fused, rng);
  p.out_w = uniform_param(Shape{vocab, fused}, rng);
  p.out_b = Tensor(Shape{vocab}, 0.0, true);
  p.embedding = std::move(embedding);
  return p;
}

namespace {

struct StepCore {
  Tensor logits;
  Tensor h;
  Tensor c;
};

StepCore step_core(const Tensor& h_prev, const Tensor& c_prev, std::size_t w_prev, const Tensor& context,
                   const DecoderParams& p) {
  if (p.lstm.layers.size() != 1) throw ValueError("decoder LSTM must have one layer");
  const Tensor x = ops::row(p.embedding.weights, w_prev);
  const LstmState s = lstm_step(p.lstm.layers.front(), x, {h_prev, c_prev});
  const Tensor fused = mfb_fuse(s.h, context, p.mfb);
  return {ops::add(ops::matvec(p.out_w, fused), p.out_b), s.h, s.c};
}

}  // namespace

DecodeStep decode_step(const Tensor& h_prev, const Tensor& c_prev, std::size_t w_prev, const Tensor& context,
                       const DecoderParams& p) {
  auto core = step_core(h_prev, c_prev, w_prev, context, p);
  return {ops::softmax(core.logits), ops::log_softmax(core.logits), core.h, core.c};
}

Tensor answer_log_prob(std::span<const std::size_t> answer, const Tensor& initial_hidden, const Tensor& context,
                       const DecoderParams& p) {
  if (answer.empty()) throw ValueError("answer_log_prob: empty answer");
  TokenIds seq = answer_tokens(answer);
  seq.front() = p.start_token;
  seq.back() = p.end_token;
  Tensor h = initial_hidden;
  Tensor c(Shape{initial_hidden.numel()});
  std::vector<Tensor> terms;
  terms.reserve(seq.size() - 1);
  for (std::size_t j = 1; j < seq.size(); ++j) {
    auto core = step_core(h, c, seq[j - 1], context, p);
    terms.push_back(ops::pick(ops::log_softmax(core.logits), seq[j]));
    h = core.h;
    c = core.c;
  }
  return ops::sum(ops::concat(terms));
}

bool beam_before(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

std::vector<BeamHypothesis> beam_search(const Tensor& initial_hidden, const Tensor& context, std::size_t width,
                                        std::size_t max_len, const DecoderParams& p) {
  if (width == 0) throw ValueError("beam_search: width must be positive");
  if (max_len == 0) throw ValueError("beam_search: max_len must be positive");

  struct Partial {
    BeamHypothesis hyp;
    Tensor h, c;
  };
  struct Extension {
    BeamHypothesis hyp;
    std::size_t parent;
  };

  std::vector<Partial> partials{{BeamHypothesis{}, initial_hidden.detach(), Tensor(Shape{initial_hidden.numel()})}};
  std::vector<BeamHypothesis> complete;

  for (std::size_t step = 0; step < max_len && !partials.empty(); ++step) {
    std::vector<Extension> extensions;
    std::vector<DecodeStep> decoded;
    decoded.reserve(partials.size());
    for (std::size_t i = 0; i < partials.size(); ++i) {
      const auto& part = partials[i];
      const std::size_t prev = part.hyp.tokens.empty() ? p.start_token : part.hyp.tokens.back();
      decoded.push_back(decode_step(part.h, part.c, prev, context, p));
      const auto lp = decoded.back().log_probs.data();
      for (std::size_t w = 0; w < lp.size(); ++w) {
        Extension e{part.hyp, i};
        e.hyp.tokens.push_back(w);
        e.hyp.log_prob += lp[w];
        extensions.push_back(std::move(e));
      }
    }
    const std::size_t keep = std::min(width, extensions.size());
    std::partial_sort(extensions.begin(), extensions.begin() + static_cast<std::ptrdiff_t>(keep), extensions.end(),
                      [](const Extension& a, const Extension& b) { return beam_before(a.hyp, b.hyp); });

    std::vector<Partial> next;
    for (std::size_t k = 0; k < keep; ++k) {
      auto& e = extensions[k];
      if (e.hyp.tokens.back() == p.end_token) {
        e.hyp.complete = true;
        complete.push_back(std::move(e.hyp));
      } else {
        next.push_back({std::move(e.hyp), decoded[e.parent].h.detach(), decoded[e.parent].c.detach()});
      }
    }
    partials = std::move(next);
  }

  std::sort(complete.begin(), complete.end(), beam_before);
  if (complete.size() > width) complete.resize(width);
  std::vector<BeamHypothesis> leftovers;
  for (auto& part : partials) leftovers.push_back(std::move(part.hyp));
  std::sort(leftovers.begin(), leftovers.end(), beam_before);
  for (auto& hyp : leftovers) {
    if (complete.size() >= width) break;
    complete.push_back(std::move(hyp));
  }
  std::sort(complete.begin(), complete.end(), beam_before);
  return complete;
}

}  // namespace synergy
