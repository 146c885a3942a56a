#include "synergy/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synergy/errors.hpp"

namespace synergy {

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

RankStats rank_metrics(const TurnRanking& ranking) {
  auto it = std::find(ranking.order.begin(), ranking.order.end(), ranking.gt_index);
  if (it == ranking.order.end())
    throw ValueError("rank_metrics: ground truth " + std::to_string(ranking.gt_index) + " absent from ranking");
  RankStats s;
  s.rank = static_cast<std::size_t>(it - ranking.order.begin()) + 1;
  s.reciprocal_rank = 1.0 / static_cast<double>(s.rank);
  s.hit1 = s.rank <= 1 ? 1.0 : 0.0;
  s.hit5 = s.rank <= 5 ? 1.0 : 0.0;
  s.hit10 = s.rank <= 10 ? 1.0 : 0.0;
  return s;
}

double ndcg(const TurnRanking& ranking) {
  if (!ranking.relevance) throw ValueError("ndcg: relevance vector missing");
  const auto& rel = *ranking.relevance;
  if (rel.size() != ranking.order.size())
    throw ShapeError("ndcg: " + std::to_string(rel.size()) + " relevances for " +
                     std::to_string(ranking.order.size()) + " ranked candidates");
  std::size_t k = 0;
  for (double r : rel) {
    if (r < 0.0 || r > 1.0) throw ValueError("ndcg: relevance outside [0,1]");
    if (r > 0.0) ++k;
  }
  if (k == 0) return 1.0;

  std::vector<double> ideal(rel);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double discount = std::log2(static_cast<double>(i) + 2.0);
    dcg += rel.at(ranking.order[i]) / discount;
    idcg += ideal[i] / discount;
  }
  return dcg / idcg;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"ndcg", ndcg}, {"mrr", mrr}, {"r1", r1},       {"r5", r5},
          {"r10", r10},   {"mean_rank", mean_rank},        {"turns", turns}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.ndcg = j.at("ndcg").get<double>();
  r.mrr = j.at("mrr").get<double>();
  r.r1 = j.at("r1").get<double>();
  r.r5 = j.at("r5").get<double>();
  r.r10 = j.at("r10").get<double>();
  r.mean_rank = j.at("mean_rank").get<double>();
  r.turns = j.at("turns").get<std::size_t>();
  return r;
}

void MetricsAccumulator::add(const TurnRanking& ranking) {
  const auto s = rank_metrics(ranking);
  rr_ += s.reciprocal_rank;
  r1_ += s.hit1;
  r5_ += s.hit5;
  r10_ += s.hit10;
  rank_ += static_cast<double>(s.rank);
  if (ranking.relevance) {
    ndcg_ += ndcg(ranking);
    ++ndcg_turns_;
  }
  ++turns_;
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  r.turns = turns_;
  if (turns_ == 0) return r;
  const double n = static_cast<double>(turns_);
  r.ndcg = ndcg_turns_ ? ndcg_ / static_cast<double>(ndcg_turns_) : 0.0;
  r.mrr = rr_ / n;
  r.r1 = r1_ / n;
  r.r5 = r5_ / n;
  r.r10 = r10_ / n;
  r.mean_rank = rank_ / n;
  return r;
}

std::vector<double> ensemble_scores(std::span<const std::vector<double>> score_vectors) {
  if (score_vectors.empty()) throw ValueError("ensemble_scores: no score vectors");
  std::vector<double> total(score_vectors.front().size(), 0.0);
  for (const auto& v : score_vectors) {
    if (v.size() != total.size())
      throw ShapeError("ensemble_scores: length " + std::to_string(v.size()) + " vs " +
                       std::to_string(total.size()));
    for (std::size_t i = 0; i < v.size(); ++i) total[i] += v[i];
  }
  return total;
}

nlohmann::json LossShareCurve::to_json() const {
  return {{"tau", tau}, {"bin_upper", bin_upper}, {"cumulative", cumulative}, {"easy_share", easy_share}};
}

LossShareCurve loss_share_diagnostic(std::span<const double> margins, double tau, double bin_width) {
  if (tau <= 0.0) throw ValueError("loss_share_diagnostic: tau must be positive");
  if (bin_width <= 0.0) throw ValueError("loss_share_diagnostic: bin width must be positive");
  LossShareCurve curve;
  curve.tau = tau;
  if (margins.empty()) return curve;

  std::vector<double> sorted(margins.begin(), margins.end());
  std::sort(sorted.begin(), sorted.end());
  const double top = sorted.back();
  std::vector<double> weight(sorted.size());
  double total = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    weight[i] = std::exp((sorted[i] - top) / tau);
    total += weight[i];
  }

  double easy = 0.0;
  for (std::size_t i = 0; i < sorted.size() && sorted[i] < 0.0; ++i) easy += weight[i];
  curve.easy_share = easy / total;

  const double first_edge = std::ceil(sorted.front() / bin_width) * bin_width;
  double running = 0.0;
  std::size_t i = 0;
  for (std::size_t b = 0;; ++b) {
    const double edge = first_edge + static_cast<double>(b) * bin_width;
    while (i < sorted.size() && sorted[i] <= edge) running += weight[i++];
    curve.bin_upper.push_back(edge);
    curve.cumulative.push_back(running / total);
    if (i == sorted.size()) break;
  }
  return curve;
}

}  // namespace synergy
