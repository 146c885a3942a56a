// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance [criterion ids...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "synergy/config.hpp"
#include "synergy/dataset.hpp"
#include "synergy/encoders.hpp"
#include "synergy/fusion.hpp"
#include "synergy/generative.hpp"
#include "synergy/metrics.hpp"
#include "synergy/ops.hpp"
#include "synergy/ranking.hpp"
#include "synergy/train.hpp"

using namespace synergy;
using synergy::testing::check_gradients;
using synergy::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Scalar probe Σ out ∘ weights for any output shape.
Tensor probe(const Tensor& out, const Tensor& weights) { return ops::sum(ops::mul(out, weights)); }

Tensor constant_like(const Tensor& t, std::mt19937_64& rng) {
  Tensor r = random_tensor(t.shape(), rng);
  r.set_requires_grad(false);
  return r;
}

// ---------------------------------------------------------------- 1

Outcome gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  std::map<std::string, double> worst;
  std::size_t checks = 0;
  auto run = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> inputs) {
    const auto r = check_gradients(f, std::move(inputs));
    worst[name] = std::max(worst[name], r.max_rel_error);
    checks += r.checked;
  };

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    {
      auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
      auto w = constant_like(Tensor(Shape{3, 2}), rng);
      run("matmul", [&] { return probe(ops::matmul(a, b), w); }, {a, b});
    }
    {
      auto x = random_tensor({3, 4}, rng, -2.0, 2.0);
      auto w = constant_like(x, rng);
      auto v = random_tensor({5}, rng, -2.0, 2.0);
      auto wv = constant_like(v, rng);
      run("softmax", [&] { return probe(ops::softmax(x, 0), w); }, {x});
      run("softmax", [&] { return probe(ops::softmax(x, 1), w); }, {x});
      run("softmax", [&] { return probe(ops::softmax(v), wv); }, {v});
    }
    {
      auto v = random_tensor({5}, rng);
      auto wv = constant_like(v, rng);
      auto m = random_tensor({4, 3}, rng);
      auto wm = constant_like(m, rng);
      run("normalize_power_l2", [&] { return probe(ops::normalize_power_l2(v), wv); }, {v});
      run("normalize_power_l2", [&] { return probe(ops::normalize_power_l2(m), wm); }, {m});
    }
    {
      const std::size_t in = 3, d = 4;
      LstmLayer layer{random_tensor({4 * d, in + d}, rng, -0.5, 0.5), random_tensor({4 * d}, rng, -0.5, 0.5)};
      auto x = random_tensor({in}, rng), h = random_tensor({d}, rng), c = random_tensor({d}, rng);
      auto wh = constant_like(h, rng), wc = constant_like(c, rng);
      run(
          "lstm_step",
          [&] {
            const auto s = lstm_step(layer, x, {h, c});
            return ops::add(probe(s.h, wh), probe(s.c, wc));
          },
          {layer.weights, layer.bias, x, h, c});
    }
    {
      auto p = MfbParams::create(3, 4, 2, 5, rng);
      p.u = random_tensor(p.u.shape(), rng);
      p.v = random_tensor(p.v.shape(), rng);
      auto x = random_tensor({3}, rng), y = random_tensor({4}, rng), ym = random_tensor({4, 3}, rng);
      auto w = constant_like(Tensor(Shape{5}), rng);
      auto wm = constant_like(Tensor(Shape{5, 3}), rng);
      run("mfb_fuse", [&] { return probe(mfb_fuse(x, y, p), w); }, {x, y, p.u, p.v});
      run("mfb_fuse_multi", [&] { return probe(mfb_fuse_multi(x, ym, p), wm); }, {x, ym, p.u, p.v});
    }
    {
      AttentionParams p{random_tensor({5}, rng)};
      auto z = random_tensor({5, 3}, rng), feats = random_tensor({4, 3}, rng);
      auto wa = constant_like(Tensor(Shape{4}), rng), ww = constant_like(Tensor(Shape{3}), rng);
      run(
          "attend",
          [&] {
            const auto a = attend(z, feats, p);
            return ops::add(probe(a.attended, wa), probe(a.weights, ww));
          },
          {z, feats, p.w});
    }
    {
      auto s = random_tensor({6}, rng, -2.0, 2.0);
      const std::size_t gt = std::uniform_int_distribution<std::size_t>(0, 5)(rng);
      const double tau = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
      run("npair_temperature_loss", [&] { return npair_temperature_loss(s, gt, tau); }, {s});
    }
    {
      auto s = random_tensor({5}, rng, -2.0, 2.0);
      std::vector<double> y(5);
      for (auto& v : y) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const double total = std::accumulate(y.begin(), y.end(), 0.0);
      for (auto& v : y) v /= total;
      const auto labels = Tensor::vector(y);
      run("synergy_cross_entropy", [&] { return synergy_cross_entropy(s, labels); }, {s});
    }
    {
      auto table = EmbeddingTable::create(5, 3, rng);
      auto p = DecoderParams::create(table, 4, 2, 5, rng);
      p.out_w = random_tensor(p.out_w.shape(), rng);
      p.lstm.layers[0].weights = random_tensor(p.lstm.layers[0].weights.shape(), rng, -0.5, 0.5);
      auto h = random_tensor({4}, rng), c = random_tensor({4}, rng), ctx = random_tensor({5}, rng);
      const std::size_t prev = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
      const std::size_t target = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
      auto wd = constant_like(Tensor(Shape{5}), rng), wh = constant_like(h, rng), wc = constant_like(c, rng);
      run(
          "decode_step",
          [&] {
            const auto s = decode_step(h, c, prev, ctx, p);
            Tensor total = ops::add(ops::pick(s.log_probs, target), probe(s.distribution, wd));
            return ops::add(total, ops::add(probe(s.h, wh), probe(s.c, wc)));
          },
          {h, c, ctx, p.out_w, p.out_b, p.mfb.u, p.mfb.v, p.lstm.layers[0].weights, p.lstm.layers[0].bias,
           p.embedding.weights});
    }
  }

  const double elapsed = seconds_since(start);
  double max_err = 0.0;
  std::string worst_op;
  for (const auto& [name, err] : worst)
    if (err >= max_err) {
      max_err = err;
      worst_op = name;
    }
  return {max_err < 1e-4 && elapsed < 60.0,
          fmt("%zu ops x 100 seeds, %zu partials, max rel err %.2e (%s), %.1fs", worst.size(), checks, max_err,
              worst_op.c_str(), elapsed)};
}

// ---------------------------------------------------------------- 2

Outcome closed_form_losses() {
  const auto s = Tensor::vector({2, 1, 0});
  const std::vector<std::pair<double, double>> cases = {
      {npair_temperature_loss(s, 0, 1.0).item(), std::log(1 + std::exp(-1.0) + std::exp(-2.0))},
      {npair_temperature_loss(s, 0, 0.25).item(), std::log(1 + std::exp(-4.0) + std::exp(-8.0))},
      {npair_temperature_loss(Tensor::vector({0.3, 0.3, 0.3}), 1, 0.4).item(), std::log(3.0)},
      {synergy_cross_entropy(Tensor(Shape{10}, 0.7), Tensor::vector({0, 0, 1, 0, 0, 0, 0, 0, 0, 0})).item(),
       std::log(10.0)},
      {synergy_cross_entropy(Tensor::vector({1, 1}), Tensor::vector({0.5, 0.5})).item(), std::log(2.0)},
  };
  double exact = 0.0;
  for (const auto& [got, want] : cases) exact = std::max(exact, std::abs(got - want));
  // The printed values are rounded to five digits.
  const bool printed = std::abs(cases[0].first - 0.40761) < 5e-6 && std::abs(cases[1].first - 0.01848) < 5e-6;

  // Contribution of a single margin of -1 at each temperature: exp(L) - 1.
  auto contribution = [](double tau) {
    return std::expm1(npair_temperature_loss(Tensor::vector({0.0, -1.0}), 0, tau).item());
  };
  const double ratio = contribution(1.0) / contribution(0.25);
  const double ratio_err = std::abs(ratio - std::exp(3.0)) / std::exp(3.0);
  const bool about_twenty = std::abs(ratio - 20.1) < 0.05;

  // Shifting every score leaves the loss unchanged.
  const double shift = std::abs(npair_temperature_loss(Tensor::vector({5, 4, 3}), 0, 0.25).item() -
                                npair_temperature_loss(s, 0, 0.25).item());

  return {exact < 1e-9 && printed && ratio_err < 1e-6 && about_twenty && shift < 1e-12,
          fmt("max abs err %.1e, e^3 ratio %.6f (rel err %.1e), shift invariance %.1e", exact, ratio, ratio_err,
              shift)};
}

// ---------------------------------------------------------------- 3

// DCG over the first k positions with k = #relevant, divided by the ideal.
double direct_ndcg(const std::vector<std::size_t>& order, const std::vector<double>& rel) {
  std::size_t k = 0;
  for (double r : rel) k += r > 0.0 ? 1 : 0;
  if (k == 0) return 1.0;
  std::vector<double> sorted = rel;
  std::sort(sorted.rbegin(), sorted.rend());
  double dcg = 0.0, ideal = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double discount = std::log2(static_cast<double>(i) + 2.0);
    dcg += rel[order[i]] / discount;
    ideal += sorted[i] / discount;
  }
  return dcg / ideal;
}

Outcome ndcg_oracle() {
  std::mt19937_64 rng(2024);
  const std::vector<double> levels = {0.0, 0.0, 0.25, 0.5, 0.5, 1.0};
  double err = 0.0;
  for (int c = 0; c < 200; ++c) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    std::vector<double> rel(n);
    const bool continuous = c % 2 == 0;
    for (auto& r : rel)
      r = continuous ? std::uniform_real_distribution<double>(0.0, 1.0)(rng)
                     : levels[std::uniform_int_distribution<std::size_t>(0, levels.size() - 1)(rng)];
    if (c % 17 == 0) std::fill(rel.begin(), rel.end(), 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    err = std::max(err, std::abs(ndcg({order, order.front(), rel}) - direct_ndcg(order, rel)));
  }

  // Every permutation, grouped by the relevance sequence it produces.
  std::size_t permutations = 0, violations = 0;
  for (std::size_t n = 1; n <= 6; ++n)
    for (int rep = 0; rep < 4; ++rep) {
      std::vector<double> rel(n);
      for (auto& r : rel) r = levels[std::uniform_int_distribution<std::size_t>(0, 3)(rng) + 2 * (rep % 2)];
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::map<std::vector<double>, double> seen;
      do {
        ++permutations;
        std::vector<double> key;
        for (auto i : order) key.push_back(rel[i]);
        const double value = ndcg({order, order.front(), rel});
        const auto [it, inserted] = seen.emplace(key, value);
        if (!inserted && it->second != value) ++violations;
      } while (std::next_permutation(order.begin(), order.end()));
    }
  return {err < 1e-12 && violations == 0,
          fmt("200 cases max err %.1e; %zu permutations, %zu equal-relevance violations", err, permutations,
              violations)};
}

// ---------------------------------------------------------------- 4, 5

struct ToyDecoder {
  DecoderParams params;
  Tensor h0;
  Tensor context;
};

ToyDecoder toy_decoder(std::uint64_t seed, std::size_t vocab) {
  std::mt19937_64 rng(seed);
  auto table = EmbeddingTable::create(vocab, 3, rng);
  ToyDecoder t{DecoderParams::create(table, 4, 2, 5, rng), random_tensor({4}, rng), random_tensor({5}, rng)};
  t.params.out_w = random_tensor(t.params.out_w.shape(), rng, -2.0, 2.0);
  t.params.out_b = random_tensor(t.params.out_b.shape(), rng);
  t.params.end_token = vocab - 1;
  t.params.start_token = 0;
  return t;
}

double replay_log_prob(const ToyDecoder& t, const TokenIds& tokens) {
  Tensor h = t.h0.detach();
  Tensor c(Shape{h.numel()});
  std::size_t prev = t.params.start_token;
  double total = 0.0;
  for (auto w : tokens) {
    const auto step = decode_step(h, c, prev, t.context, t.params);
    total += step.log_probs[w];
    h = step.h;
    c = step.c;
    prev = w;
  }
  return total;
}

// Every END-terminated sequence of at most max_len tokens and every
// END-free sequence of exactly max_len tokens, best first.
std::vector<BeamHypothesis> enumerate_all(const ToyDecoder& t, std::size_t max_len) {
  const std::size_t vocab = t.params.vocab_size();
  std::vector<BeamHypothesis> out;
  std::function<void(TokenIds)> grow = [&](TokenIds prefix) {
    for (std::size_t w = 0; w < vocab; ++w) {
      TokenIds seq = prefix;
      seq.push_back(w);
      if (w == t.params.end_token)
        out.push_back({seq, replay_log_prob(t, seq), true});
      else if (seq.size() == max_len)
        out.push_back({seq, replay_log_prob(t, seq), false});
      else
        grow(seq);
    }
  };
  grow({});
  std::sort(out.begin(), out.end(), [](const BeamHypothesis& a, const BeamHypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  });
  return out;
}

TokenIds greedy_decode(const ToyDecoder& t, std::size_t max_len) {
  TokenIds out;
  Tensor h = t.h0.detach();
  Tensor c(Shape{h.numel()});
  std::size_t prev = t.params.start_token;
  for (std::size_t s = 0; s < max_len; ++s) {
    const auto step = decode_step(h, c, prev, t.context, t.params);
    const auto lp = step.log_probs.values();
    prev = static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    out.push_back(prev);
    h = step.h;
    c = step.c;
    if (prev == t.params.end_token) break;
  }
  return out;
}

Outcome beam_exactness() {
  std::size_t cases = 0, failures = 0;
  double lp_err = 0.0;
  std::string first_failure;
  auto fail = [&](const std::string& what) {
    if (failures++ == 0) first_failure = what;
  };
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    for (std::size_t vocab : {3, 4})
      for (std::size_t len = 1; len <= 4; ++len) {
        const auto t = toy_decoder(1000 + seed, vocab);
        const auto all = enumerate_all(t, len);
        std::map<TokenIds, std::size_t> position;
        for (std::size_t i = 0; i < all.size(); ++i) position[all[i].tokens] = i;

        std::size_t full = 1;
        for (std::size_t i = 0; i < len; ++i) full *= vocab;
        for (std::size_t width : {full, full + 3}) {
          ++cases;
          const auto beam = beam_search(t.h0, t.context, width, len, t.params);
          const std::size_t want = std::min(width, all.size());
          if (beam.size() != want) {
            fail(fmt("seed %llu: size %zu vs %zu", static_cast<unsigned long long>(seed), beam.size(), want));
            continue;
          }
          for (std::size_t i = 0; i < want; ++i) {
            lp_err = std::max(lp_err, std::abs(beam[i].log_prob - all[i].log_prob));
            if (beam[i].tokens != all[i].tokens || beam[i].complete != all[i].complete ||
                std::abs(beam[i].log_prob - all[i].log_prob) > 1e-12)
              fail(fmt("seed %llu: exhaustive mismatch at %zu", static_cast<unsigned long long>(seed), i));
          }
        }

        for (std::size_t width : {1, 2, 5}) {
          ++cases;
          const auto beam = beam_search(t.h0, t.context, width, len, t.params);
          if (width == 1) {
            if (beam.size() != 1 || beam.front().tokens != greedy_decode(t, len)) fail("B=1 is not greedy");
            continue;
          }
          // The returned list is an ordered subsequence of the exhaustive ranking.
          std::optional<std::size_t> last;
          for (const auto& h : beam) {
            const auto it = position.find(h.tokens);
            if (it == position.end()) {
              fail("beam returned a sequence outside the search space");
              break;
            }
            lp_err = std::max(lp_err, std::abs(h.log_prob - all[it->second].log_prob));
            if (last && it->second <= *last) fail(fmt("B=%zu out of order", width));
            last = it->second;
          }
        }
      }
  return {failures == 0 && lp_err < 1e-12,
          fmt("%zu beam runs, %zu failures, max log-prob err %.1e%s", cases, failures, lp_err,
              failures ? (", first: " + first_failure).c_str() : "")};
}

Outcome probability_mass() {
  double worst = 0.0;
  std::size_t sequences = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    for (std::size_t vocab : {3, 4}) {
      const auto t = toy_decoder(5000 + seed, vocab);
      // [END] alone has no answer tokens, so take it from the first step.
      double mass = std::exp(replay_log_prob(t, {t.params.end_token}));
      std::function<void(TokenIds)> grow = [&](TokenIds answer) {
        for (std::size_t w = 0; w < vocab; ++w) {
          if (w == t.params.end_token) continue;
          TokenIds next = answer;
          next.push_back(w);
          mass += std::exp(answer_log_prob(next, t.h0, t.context, t.params).item());
          ++sequences;
          if (next.size() < 3) grow(next);
        }
      };
      grow({});
      worst = std::max(worst, mass);
    }
  return {worst <= 1.0 + 1e-9, fmt("%zu complete sequences of <= 4 tokens, max total mass %.12f", sequences, worst)};
}

// ---------------------------------------------------------------- training helpers

RunConfig toy_run_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.dims.emb_dim = 16;
  cfg.dims.hidden = 32;
  cfg.dims.factors = 2;
  cfg.dims.fused = 32;
  cfg.optimizer.lr = 3e-3;
  cfg.optimizer.decay_every = 0;
  cfg.data.min_count = 0;
  return cfg;
}

struct SplitData {
  std::vector<DialogRecord> train;
  std::vector<DialogRecord> val;
};

SplitData make_split(const DataConfig& data, std::uint64_t seed, std::size_t val_dialogs) {
  DataConfig val_cfg = data;
  val_cfg.dialogs = val_dialogs;
  return {generate_synthetic_dataset(data, seed), generate_synthetic_dataset(val_cfg, seed + 7919)};
}

struct Study {
  Checkpoint checkpoint;
  Evaluation primary;
  Evaluation two_stage;
  double train_seconds = 0.0;
};

Study run_study(const RunConfig& cfg, const SplitData& data) {
  const auto start = std::chrono::steady_clock::now();
  auto result = train(cfg, data.train);
  Study s{std::move(result.checkpoint), {}, {}, seconds_since(start)};
  s.primary = evaluate(s.checkpoint.model, data.val, EvalMode::PrimaryOnly);
  s.two_stage = evaluate(s.checkpoint.model, data.val, EvalMode::TwoStage);
  return s;
}

// Answer style drawn per turn with descriptive answers the majority, so a short
// answer is a plausible but wrong pick.
DataConfig ambiguous_data() {
  DataConfig d;
  d.dialogs = 150;
  d.turns = 5;
  d.candidates = 15;
  d.objects = 3;
  d.descriptive_fraction = 0.7;
  d.style_per_dialog = false;
  d.hard_distractors = 0;
  d.min_count = 0;
  return d;
}

constexpr std::size_t kValidationDialogs = 80;

// Discriminative runs shared by the loss-share, two-stage and ensemble criteria.
RunConfig discriminative_config(std::uint64_t seed) {
  auto cfg = toy_run_config(seed);
  cfg.optimizer.lr = 5e-3;
  cfg.data = ambiguous_data();
  cfg.select_n = 5;
  cfg.select_m = 10;
  cfg.epochs_primary = 5;
  cfg.epochs_joint = 15;
  return cfg;
}

const std::vector<Study>& discriminative_studies() {
  static std::optional<std::vector<Study>> studies;
  if (!studies) {
    studies.emplace();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto cfg = discriminative_config(seed);
      studies->push_back(run_study(cfg, make_split(cfg.data, 100 + seed, kValidationDialogs)));
    }
  }
  return *studies;
}

// ---------------------------------------------------------------- 6

Outcome overfit() {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = toy_run_config(11);
  cfg.data.dialogs = 32;
  cfg.data.candidates = 8;
  cfg.data.objects = 4;
  cfg.select_n = 4;
  cfg.select_m = 8;
  cfg.epochs_primary = 100;
  cfg.epochs_joint = 200;
  const auto dialogs = generate_synthetic_dataset(cfg.data, 11);
  const auto result = train(cfg, dialogs);
  const auto eval = evaluate(result.checkpoint.model, dialogs, EvalMode::TwoStage);
  const double elapsed = seconds_since(start);
  return {eval.report.r1 >= 0.95 && eval.report.mrr >= 0.97 && elapsed < 600.0,
          fmt("%zu epochs on %zu turns: R@1 %.4f, MRR %.4f, %.0fs", cfg.total_epochs(), eval.report.turns,
              eval.report.r1, eval.report.mrr, elapsed)};
}

// ---------------------------------------------------------------- 7

Outcome loss_share_direction() {
  const auto& studies = discriminative_studies();
  std::size_t lower = 0;
  std::string detail;
  for (const auto& s : studies) {
    double at_one = -1.0, at_quarter = -1.0;
    for (const auto& curve : s.primary.loss_share) {
      if (curve.tau == 1.0) at_one = curve.easy_share;
      if (curve.tau == 0.25) at_quarter = curve.easy_share;
    }
    lower += at_quarter < at_one ? 1 : 0;
    detail += fmt("%s%.3f->%.3f", detail.empty() ? "" : ", ", at_one, at_quarter);
  }
  return {lower == studies.size(), "easy share tau 1 -> 0.25 per seed: " + detail};
}

// ---------------------------------------------------------------- 8

Outcome discriminative_two_stage() {
  const auto& studies = discriminative_studies();
  double gain = 0.0;
  std::size_t not_worse = 0;
  std::string detail;
  for (const auto& s : studies) {
    const double d = s.two_stage.report.mrr - s.primary.report.mrr;
    gain += d;
    not_worse += d >= 0.0 ? 1 : 0;
    detail += fmt("%s%.3f/%.3f", detail.empty() ? "" : ", ", s.primary.report.mrr, s.two_stage.report.mrr);
  }
  gain /= static_cast<double>(studies.size());
  return {gain > 0.0,
          fmt("mean MRR gain %+.4f, %zu/%zu seeds not worse (primary/two-stage: ", gain, not_worse, studies.size()) +
              detail + ")"};
}

// ---------------------------------------------------------------- 9

Outcome generative_two_stage() {
  double mrr_gain = 0.0, r5_gain = 0.0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = toy_run_config(seed);
    cfg.kind = ModelKind::Generative;
    cfg.optimizer.lr = 5e-3;
    cfg.data = ambiguous_data();
    // Several descriptive phrasings spread likelihood mass and favour short answers.
    cfg.data.descriptive_wordings = 3;
    cfg.select_n = 10;
    cfg.select_m = 15;
    cfg.epochs_primary = 5;
    cfg.epochs_joint = 15;
    const auto s = run_study(cfg, make_split(cfg.data, 300 + seed, kValidationDialogs));
    mrr_gain += s.two_stage.report.mrr - s.primary.report.mrr;
    r5_gain += s.two_stage.report.r5 - s.primary.report.r5;
    detail += fmt("%sMRR %.3f/%.3f R@5 %.3f/%.3f", detail.empty() ? "" : "; ", s.primary.report.mrr,
                  s.two_stage.report.mrr, s.primary.report.r5, s.two_stage.report.r5);
  }
  mrr_gain /= 5.0;
  r5_gain /= 5.0;
  return {mrr_gain > 0.0 && r5_gain > 0.0,
          fmt("mean gain MRR %+.4f, R@5 %+.4f (primary/two-stage: ", mrr_gain, r5_gain) + detail + ")"};
}

// ---------------------------------------------------------------- 10

Outcome determinism() {
  auto cfg = toy_run_config(21);
  cfg.data.dialogs = 8;
  cfg.data.turns = 3;
  cfg.data.candidates = 8;
  cfg.select_n = 3;
  cfg.select_m = 6;
  cfg.epochs_primary = 2;
  cfg.epochs_joint = 2;
  const auto data = make_split(cfg.data, 21, 4);
  const auto a = train(cfg, data.train);
  const auto b = train(cfg, data.train);

  bool logs_equal = a.log.size() == b.log.size();
  for (std::size_t i = 0; logs_equal && i < a.log.size(); ++i)
    logs_equal = a.log[i].primary_loss == b.log[i].primary_loss && a.log[i].synergy_loss == b.log[i].synergy_loss &&
                 a.log[i].lr == b.log[i].lr;
  const bool params_equal = a.checkpoint.model.to_json() == b.checkpoint.model.to_json();

  const auto path = (std::filesystem::temp_directory_path() / "synergy_acceptance_ckpt.json").string();
  a.checkpoint.save(path);
  const auto loaded = Checkpoint::load(path);
  std::filesystem::remove(path);
  bool eval_equal = true;
  for (auto mode : {EvalMode::PrimaryOnly, EvalMode::TwoStage}) {
    const auto before = evaluate(a.checkpoint.model, data.val, mode);
    const auto after = evaluate(loaded.model, data.val, mode);
    eval_equal = eval_equal && before.to_json() == after.to_json() && before.turns.size() == after.turns.size();
    for (std::size_t i = 0; eval_equal && i < before.turns.size(); ++i)
      eval_equal = before.turns[i].primary_scores == after.turns[i].primary_scores &&
                   before.turns[i].synergy_scores == after.turns[i].synergy_scores &&
                   before.turns[i].ranking == after.turns[i].ranking;
  }
  const bool resumable = loaded.rng_state == a.checkpoint.rng_state && loaded.optimizer == a.checkpoint.optimizer;
  return {logs_equal && params_equal && eval_equal && resumable,
          fmt("loss logs %s, parameters %s, evaluation after reload %s, rng/optimizer state %s",
              logs_equal ? "identical" : "DIFFER", params_equal ? "identical" : "DIFFER",
              eval_equal ? "identical" : "DIFFERS", resumable ? "preserved" : "LOST")};
}

// ---------------------------------------------------------------- 11

Outcome ensemble_sanity() {
  const auto& studies = discriminative_studies();
  const auto cfg = discriminative_config(1);
  const auto split = make_split(cfg.data, 101, kValidationDialogs);
  // A second, independently seeded model trained and scored on the same dialogs.
  const auto second = run_study(discriminative_config(2), split);
  const std::vector<std::vector<TurnScores>> runs = {scores_of(studies[0].two_stage), scores_of(second.two_stage)};
  const auto merged = evaluate_scores(split.val, ensemble_score_files(runs));
  const double a = studies[0].two_stage.report.ndcg, b = second.two_stage.report.ndcg;
  return {merged.ndcg >= std::min(a, b), fmt("NDCG %.4f and %.4f -> ensemble %.4f", a, b, merged.ndcg)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"closed-form losses", closed_form_losses},
      {"ndcg oracle", ndcg_oracle},
      {"beam search exactness", beam_exactness},
      {"probability mass", probability_mass},
      {"overfit", overfit},
      {"loss share falls with tau", loss_share_direction},
      {"discriminative two-stage", discriminative_two_stage},
      {"generative two-stage", generative_two_stage},
      {"determinism and persistence", determinism},
      {"ensemble sanity", ensemble_sanity},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const std::size_t id = i + 1;
    if (!only.empty() && !only.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%-4s criterion %2zu  %-28s %s  [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
