#include "synergy/config.hpp"

#include <cmath>
#include <fstream>

#include "synergy/errors.hpp"

namespace synergy {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::Generative ? "generative" : "discriminative";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "discriminative") return ModelKind::Discriminative;
  if (s == "generative") return ModelKind::Generative;
  throw ValueError("unknown model kind '" + s + "'");
}

double OptimizerConfig::lr_at(std::size_t epoch) const {
  if (decay_every == 0) return lr;
  return lr * std::pow(decay_rate, static_cast<double>(epoch / decay_every));
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValueError("invalid config: " + msg); };
  if (dims.emb_dim == 0 || dims.hidden == 0 || dims.factors == 0 || dims.fused == 0)
    fail("model dimensions must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (select_n == 0) fail("N must be positive");
  if (select_n > select_m) fail("N must not exceed M");
  if (select_m > data.candidates) fail("M must not exceed the candidate count C");
  if (beam_width == 0 || beam_max_len == 0) fail("beam width and length must be positive");
  if (!(optimizer.lr > 0.0)) fail("learning rate must be positive");
  if (optimizer.beta1 < 0.0 || optimizer.beta1 >= 1.0 || optimizer.beta2 < 0.0 || optimizer.beta2 >= 1.0)
    fail("Adam betas must lie in [0, 1)");
  if (accumulate_turns == 0) fail("accumulate_turns must be positive");
  if (data.candidates < 2) fail("need at least two candidates");
  if (data.turns == 0 || data.dialogs == 0) fail("need at least one dialog and turn");
  if (data.objects == 0 || data.objects > 6) fail("object count must lie in [1, 6]");
  if (data.pronoun_fraction < 0.0 || data.pronoun_fraction > 1.0) fail("pronoun_fraction must lie in [0, 1]");
  if (data.descriptive_fraction < 0.0 || data.descriptive_fraction > 1.0)
    fail("descriptive_fraction must lie in [0, 1]");
  if (data.descriptive_wordings < 1 || data.descriptive_wordings > 3) fail("descriptive_wordings must lie in [1, 3]");
  if (data.synonym_relevance < 0.0 || data.synonym_relevance > 1.0) fail("synonym_relevance must lie in [0, 1]");
  if (data.feature_noise < 0.0) fail("feature_noise must be non-negative");
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"dims",
       {{"emb_dim", dims.emb_dim}, {"hidden", dims.hidden}, {"factors", dims.factors}, {"fused", dims.fused},
        {"feature_dim", dims.feature_dim}}},
      {"tau", tau},
      {"select_n", select_n},
      {"select_m", select_m},
      {"beam_width", beam_width},
      {"beam_max_len", beam_max_len},
      {"optimizer",
       {{"lr", optimizer.lr}, {"beta1", optimizer.beta1}, {"beta2", optimizer.beta2}, {"eps", optimizer.eps},
        {"decay_rate", optimizer.decay_rate}, {"decay_every", optimizer.decay_every}}},
      {"epochs_primary", epochs_primary},
      {"epochs_joint", epochs_joint},
      {"accumulate_turns", accumulate_turns},
      {"soft_labels", soft_labels},
      {"seed", seed},
      {"kind", to_string(kind)},
      {"data",
       {{"dialogs", data.dialogs}, {"turns", data.turns}, {"candidates", data.candidates},
        {"objects", data.objects}, {"feature_noise", data.feature_noise},
        {"pronoun_fraction", data.pronoun_fraction}, {"descriptive_fraction", data.descriptive_fraction},
        {"style_per_dialog", data.style_per_dialog}, {"descriptive_wordings", data.descriptive_wordings},
        {"hard_distractors", data.hard_distractors}, {"synonym_relevance", data.synonym_relevance},
        {"min_count", data.min_count}}},
  };
}

namespace {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ValueError("unknown config key '" + where + it.key() + "'");
  }
}

}  // namespace

void RunConfig::merge_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValueError("config must be a JSON object");
  try {
    reject_unknown(j,
                   {"dims", "tau", "select_n", "select_m", "beam_width", "beam_max_len", "optimizer",
                    "epochs_primary", "epochs_joint", "accumulate_turns", "soft_labels", "seed", "kind", "data"},
                   "");
    if (j.contains("dims")) {
      const auto& d = j.at("dims");
      reject_unknown(d, {"emb_dim", "hidden", "factors", "fused", "feature_dim"}, "dims.");
      read(d, "emb_dim", dims.emb_dim);
      read(d, "hidden", dims.hidden);
      read(d, "factors", dims.factors);
      read(d, "fused", dims.fused);
      read(d, "feature_dim", dims.feature_dim);
    }
    read(j, "tau", tau);
    read(j, "select_n", select_n);
    read(j, "select_m", select_m);
    read(j, "beam_width", beam_width);
    read(j, "beam_max_len", beam_max_len);
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      reject_unknown(o, {"lr", "beta1", "beta2", "eps", "decay_rate", "decay_every"}, "optimizer.");
      read(o, "lr", optimizer.lr);
      read(o, "beta1", optimizer.beta1);
      read(o, "beta2", optimizer.beta2);
      read(o, "eps", optimizer.eps);
      read(o, "decay_rate", optimizer.decay_rate);
      read(o, "decay_every", optimizer.decay_every);
    }
    read(j, "epochs_primary", epochs_primary);
    read(j, "epochs_joint", epochs_joint);
    read(j, "accumulate_turns", accumulate_turns);
    read(j, "soft_labels", soft_labels);
    read(j, "seed", seed);
    if (j.contains("kind")) kind = model_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d,
                     {"dialogs", "turns", "candidates", "objects", "feature_noise", "pronoun_fraction",
                      "descriptive_fraction", "style_per_dialog", "descriptive_wordings",
                      "hard_distractors", "synonym_relevance", "min_count"},
                     "data.");
      read(d, "dialogs", data.dialogs);
      read(d, "turns", data.turns);
      read(d, "candidates", data.candidates);
      read(d, "objects", data.objects);
      read(d, "feature_noise", data.feature_noise);
      read(d, "pronoun_fraction", data.pronoun_fraction);
      read(d, "descriptive_fraction", data.descriptive_fraction);
      read(d, "style_per_dialog", data.style_per_dialog);
      read(d, "descriptive_wordings", data.descriptive_wordings);
      read(d, "hard_distractors", data.hard_distractors);
      read(d, "synonym_relevance", data.synonym_relevance);
      read(d, "min_count", data.min_count);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValueError(std::string("malformed config: ") + e.what());
  }
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.merge_json(j);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config " + path + " is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j);
}

}  // namespace synergy
