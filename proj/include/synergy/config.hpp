#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"

namespace synergy {

enum class ModelKind { Discriminative, Generative };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelDims {
  std::size_t emb_dim = 16;
  std::size_t hidden = 32;  // d
  std::size_t factors = 2;  // k
  std::size_t fused = 64;   // l
  std::size_t feature_dim = 0;  // object feature width; 0 = take it from the data
};

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double decay_rate = 0.25;
  std::size_t decay_every = 7;

  // Learning rate in effect during the 0-based `epoch`.
  double lr_at(std::size_t epoch) const;
};

// Synthetic dialog generator settings.
struct DataConfig {
  std::size_t dialogs = 64;
  std::size_t turns = 5;
  std::size_t candidates = 30;  // C
  std::size_t objects = 4;      // n
  double feature_noise = 0.05;
  double pronoun_fraction = 0.3;
  double descriptive_fraction = 0.5;
  // Draw the answer style once per dialog (readable from history) or per turn.
  bool style_per_dialog = true;
  // Number of phrasings a descriptive answer is drawn from (1 to 3).
  std::size_t descriptive_wordings = 1;
  std::size_t hard_distractors = 4;
  double synonym_relevance = 0.5;
  std::size_t min_count = 4;
};

struct RunConfig {
  ModelDims dims;
  double tau = 0.25;
  std::size_t select_n = 10;
  std::size_t select_m = 30;
  std::size_t beam_width = 15;
  std::size_t beam_max_len = 20;
  OptimizerConfig optimizer;
  std::size_t epochs_primary = 7;
  std::size_t epochs_joint = 15;
  std::size_t accumulate_turns = 1;
  bool soft_labels = false;
  std::uint64_t seed = 1;
  ModelKind kind = ModelKind::Discriminative;
  DataConfig data;

  std::size_t total_epochs() const { return epochs_primary + epochs_joint; }

  // Throws ValueError on violated invariants (N ≤ M ≤ C, τ ∈ (0,1], ...).
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  void merge_json(const nlohmann::json& j);
};

RunConfig load_config(const std::string& path);

}  // namespace synergy
