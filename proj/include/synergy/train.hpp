#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "synergy/config.hpp"
#include "synergy/dataset.hpp"
#include "synergy/metrics.hpp"
#include "synergy/model.hpp"

namespace synergy {

// Adam with bias-corrected moments. Moments are keyed by parameter name.
class Adam {
 public:
  explicit Adam(OptimizerConfig config = {}) : config_(config) {}

  // One update of every parameter that has a gradient, using learning rate `lr`.
  void step(std::span<const NamedTensor> params, double lr);
  std::size_t steps() const { return steps_; }

  nlohmann::json to_json() const;
  static Adam from_json(const nlohmann::json& j, OptimizerConfig config);

 private:
  OptimizerConfig config_;
  std::size_t steps_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

struct EpochLog {
  std::size_t epoch = 0;  // 0-based over both phases
  std::size_t phase = 1;  // 1 primary only, 2 joint
  double lr = 0.0;
  double primary_loss = 0.0;  // mean per turn
  double synergy_loss = 0.0;  // mean per turn, 0 in phase 1
  std::size_t turns = 0;

  nlohmann::json to_json() const;
};

struct Checkpoint {
  Model model;
  std::size_t epoch = 0;  // epochs completed
  std::string rng_state;
  nlohmann::json optimizer;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

struct TrainOptions {
  // Built from the training dialogs with config.data.min_count when absent.
  std::optional<Vocabulary> vocab;
  std::function<void(const EpochLog&, const Checkpoint&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

// Phase 1 (epochs_primary epochs) minimizes the primary loss; phase 2
// (epochs_joint epochs) adds the synergy loss over train-mode selections.
// One optimizer step per `accumulate_turns` turns; dialogs are visited in a
// freshly shuffled order every epoch. Throws DivergenceError on a non-finite loss.
TrainResult train(const RunConfig& config, const std::vector<DialogRecord>& dialogs, const TrainOptions& options = {});

enum class EvalMode { PrimaryOnly, TwoStage };

std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& s);

struct TurnResult {
  std::string dialog_id;
  std::size_t turn = 0;
  std::vector<double> primary_scores;
  std::vector<std::size_t> selected;    // two-stage only
  std::vector<double> synergy_scores;   // aligned with `selected`
  std::vector<std::size_t> ranking;     // final order, rank 1 first
  // Scores whose descending order is `ranking`: the primary scores in
  // primary-only mode, C − position in two-stage mode.
  std::vector<double> ranking_scores;

  nlohmann::json to_json() const;
};

struct Evaluation {
  MetricsReport report;
  std::vector<TurnResult> turns;
  // Over the margins s_i − s_gt of the primary scores, at several temperatures.
  std::vector<LossShareCurve> loss_share;

  // Report plus diagnostics (per-turn rankings are omitted).
  nlohmann::json to_json() const;
};

// Temperatures the loss-share diagnostic is reported at besides config.tau.
std::vector<double> diagnostic_temperatures(double tau);

Evaluation evaluate(const Model& model, const std::vector<DialogRecord>& dialogs, EvalMode mode);

// Scores for one turn, as stored in score files.
struct TurnScores {
  std::string dialog_id;
  std::size_t turn = 0;
  std::vector<double> scores;

  nlohmann::json to_json() const;
  static TurnScores from_json(const nlohmann::json& j);
};

std::vector<TurnScores> scores_of(const Evaluation& evaluation);
void write_scores(const std::string& path, std::span<const TurnScores> scores);
std::vector<TurnScores> read_scores(const std::string& path);

// Metrics of the rankings induced by `scores`, matched to turns by
// (dialog_id, turn). Every turn of `dialogs` must be scored.
MetricsReport evaluate_scores(const std::vector<DialogRecord>& dialogs, std::span<const TurnScores> scores);

// Elementwise sum over score files that cover the same turns in the same order.
std::vector<TurnScores> ensemble_score_files(std::span<const std::vector<TurnScores>> runs);

}  // namespace synergy
