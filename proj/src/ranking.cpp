#include "synergy/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "synergy/errors.hpp"
#include "synergy/init.hpp"
#include "synergy/metrics.hpp"
#include "synergy/ops.hpp"

namespace synergy {

ContextParams ContextParams::create(std::size_t d, std::size_t factors, std::size_t fused, std::mt19937_64& rng) {
  ContextParams p;
  p.history_mfb = MfbParams::create(d, d, factors, fused, rng);
  p.history_att = AttentionParams::create(fused, rng);
  p.image_mfb = MfbParams::create(2 * d, d, factors, fused, rng);
  p.image_att = AttentionParams::create(fused, rng);
  p.embed_mfb = MfbParams::create(2 * d, d, factors, fused, rng);
  return p;
}

EncodedContext encode_context(const Tensor& question, const Tensor& history, const Tensor& image,
                              const ContextParams& p) {
  if (history.rank() != 2 || image.rank() != 2)
    throw ShapeError("encode_context: history " + shape_to_string(history.shape()) + " and image " +
                     shape_to_string(image.shape()) + " must be matrices");
  EncodedContext ctx;
  ctx.question = question;
  ctx.history = history;
  ctx.image = image;
  ctx.history_attention = attend(mfb_fuse_multi(question, history, p.history_mfb), history, p.history_att);
  const Tensor query = ops::concat(question, ctx.history_attention.attended);
  ctx.image_attention = attend(mfb_fuse_multi(query, image, p.image_mfb), image, p.image_att);
  ctx.fused = mfb_fuse(query, ctx.image_attention.attended, p.embed_mfb);
  return ctx;
}

AnswerProjection AnswerProjection::create(std::size_t d, std::size_t fused, std::mt19937_64& rng) {
  return {uniform_param(Shape{fused, d}, rng), Tensor(Shape{fused}, 0.0, true)};
}

Tensor primary_score(const EncodedContext& ctx, const Tensor& answer_encodings, const AnswerProjection& f) {
  const Tensor projected = ops::tanh(ops::add_col_broadcast(ops::matmul(f.w, answer_encodings), f.b));
  return ops::matvec(ops::transpose(projected), ctx.fused);
}

Tensor npair_temperature_loss(const Tensor& scores, std::size_t gt, double tau) {
  if (!(tau > 0.0)) throw ValueError("npair_temperature_loss: tau must be positive");
  if (scores.rank() != 1 || scores.numel() < 2)
    throw ShapeError("npair_temperature_loss: need at least two scores, got " + shape_to_string(scores.shape()));
  if (gt >= scores.numel()) throw ShapeError("npair_temperature_loss: ground truth out of range");
  const double inv = 1.0 / tau;
  return ops::sub(ops::logsumexp(ops::scale(scores, inv)), ops::scale(ops::pick(scores, gt), inv));
}

std::vector<std::size_t> select_candidates(std::span<const double> scores, std::size_t n, std::size_t m,
                                           SelectionMode mode, std::optional<std::size_t> gt,
                                           std::mt19937_64& rng) {
  const std::size_t c = scores.size();
  if (n == 0) throw ValueError("select_candidates: N must be positive");
  if (n > m) throw ValueError("select_candidates: N=" + std::to_string(n) + " exceeds M=" + std::to_string(m));
  if (m > c) throw ValueError("select_candidates: M=" + std::to_string(m) + " exceeds C=" + std::to_string(c));
  const auto order = descending_order(scores);
  if (mode == SelectionMode::Test) return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n)};

  if (!gt) throw ValueError("select_candidates: train mode needs the ground truth");
  if (*gt >= c) throw ShapeError("select_candidates: ground truth out of range");

  std::vector<std::size_t> pool;
  for (std::size_t r = 0; r < m; ++r)
    if (order[r] != *gt) pool.push_back(order[r]);
  // Partial Fisher-Yates over the pool; the pool keeps rank order so sampled
  // prefixes are reproducible given the generator state.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<bool> chosen(c, false);
  chosen[*gt] = true;
  for (std::size_t i = 0; i + 1 < n; ++i) chosen[pool[i]] = true;
  std::vector<std::size_t> out;
  for (auto idx : order)
    if (chosen[idx]) out.push_back(idx);
  return out;
}

SynergyParams SynergyParams::create(std::size_t d, std::size_t factors, std::size_t fused, std::mt19937_64& rng) {
  SynergyParams p;
  p.image_mfb = MfbParams::create(2 * d, d, factors, fused, rng);
  p.image_att = AttentionParams::create(fused, rng);
  p.embed_mfb = MfbParams::create(2 * d, d, factors, fused, rng);
  p.score_w = uniform_param(Shape{fused}, rng);
  p.score_b = Tensor(Shape{1}, 0.0, true);
  return p;
}

Tensor synergistic_score(const Tensor& qa_encodings, const Tensor& attended_history, const Tensor& image,
                         const SynergyParams& p) {
  if (qa_encodings.rank() != 2)
    throw ShapeError("synergistic_score: QA encodings must be [d×N], got " + shape_to_string(qa_encodings.shape()));
  std::vector<Tensor> scores;
  scores.reserve(qa_encodings.cols());
  for (std::size_t j = 0; j < qa_encodings.cols(); ++j) {
    const Tensor query = ops::concat(ops::column(qa_encodings, j), attended_history);
    const Attended att = attend(mfb_fuse_multi(query, image, p.image_mfb), image, p.image_att);
    const Tensor fused = mfb_fuse(query, att.attended, p.embed_mfb);
    scores.push_back(ops::add(ops::dot(p.score_w, fused), p.score_b));
  }
  return ops::concat(scores);
}

Tensor synergy_cross_entropy(const Tensor& scores, const Tensor& labels) {
  if (scores.rank() != 1 || scores.shape() != labels.shape())
    throw ShapeError("synergy_cross_entropy: scores " + shape_to_string(scores.shape()) + " vs labels " +
                     shape_to_string(labels.shape()));
  double total = 0.0;
  for (double y : labels.data()) {
    if (y < 0.0) throw ValueError("synergy_cross_entropy: negative label");
    total += y;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ValueError("synergy_cross_entropy: labels sum to " + std::to_string(total));
  return ops::scale(ops::dot(labels, ops::log_softmax(scores)), -1.0);
}

std::vector<std::size_t> fuse_rankings(std::span<const double> primary, std::span<const std::size_t> selected,
                                       std::span<const double> synergy) {
  if (selected.size() != synergy.size())
    throw ShapeError("fuse_rankings: " + std::to_string(selected.size()) + " selected vs " +
                     std::to_string(synergy.size()) + " synergy scores");
  std::vector<bool> taken(primary.size(), false);
  for (auto idx : selected) {
    if (idx >= primary.size()) throw ShapeError("fuse_rankings: selected index out of range");
    if (taken[idx]) throw ValueError("fuse_rankings: candidate " + std::to_string(idx) + " selected twice");
    taken[idx] = true;
  }
  std::vector<std::size_t> out;
  out.reserve(primary.size());
  // Ties in synergy score fall back to ascending candidate index.
  std::vector<std::size_t> sel(selected.begin(), selected.end());
  std::vector<std::size_t> pos(sel.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
    if (synergy[a] != synergy[b]) return synergy[a] > synergy[b];
    return sel[a] < sel[b];
  });
  for (auto p : pos) out.push_back(sel[p]);
  for (auto idx : descending_order(primary))
    if (!taken[idx]) out.push_back(idx);
  return out;
}

}  // namespace synergy
