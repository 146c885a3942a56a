#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace synergy {

// Candidate indices by descending score; ties keep ascending index order.
std::vector<std::size_t> descending_order(std::span<const double> scores);

struct TurnRanking {
  std::vector<std::size_t> order;  // rank 1 first
  std::size_t gt_index = 0;
  std::optional<std::vector<double>> relevance;
};

struct RankStats {
  double reciprocal_rank = 0.0;
  double hit1 = 0.0;
  double hit5 = 0.0;
  double hit10 = 0.0;
  std::size_t rank = 0;  // 1-based
};

RankStats rank_metrics(const TurnRanking& ranking);

// NDCG@k with k the number of candidates of positive relevance. A turn with no
// relevant candidate scores 1.
double ndcg(const TurnRanking& ranking);

struct MetricsReport {
  double ndcg = 0.0;
  double mrr = 0.0;
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double mean_rank = 0.0;
  std::size_t turns = 0;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

// Per-turn averages, accumulated in insertion order.
class MetricsAccumulator {
 public:
  void add(const TurnRanking& ranking);
  MetricsReport report() const;
  std::size_t turns() const { return turns_; }

 private:
  double ndcg_ = 0.0, rr_ = 0.0, r1_ = 0.0, r5_ = 0.0, r10_ = 0.0, rank_ = 0.0;
  std::size_t turns_ = 0;
  std::size_t ndcg_turns_ = 0;
};

// Elementwise sum of per-model score vectors.
std::vector<double> ensemble_scores(std::span<const std::vector<double>> score_vectors);

struct LossShareCurve {
  double tau = 1.0;
  std::vector<double> bin_upper;   // right edge of each margin bin
  std::vector<double> cumulative;  // share of exp(margin/τ) mass at or below the bin
  double easy_share = 0.0;         // share carried by margins < 0
  nlohmann::json to_json() const;
};

// Normalized loss contributions exp(margin/τ) of non-ground-truth candidates,
// accumulated over margin bins of width `bin_width`.
LossShareCurve loss_share_diagnostic(std::span<const double> margins, double tau, double bin_width = 0.5);

}  // namespace synergy
