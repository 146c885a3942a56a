#include "synergy/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>

#include "synergy/errors.hpp"
#include "synergy/ops.hpp"

namespace synergy {

void Adam::step(std::span<const NamedTensor> params, double lr) {
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (const auto& [name, param] : params) {
    if (!param.has_grad()) continue;
    Tensor p = param;
    const auto g = p.grad();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(g.size(), 0.0);
      v.assign(g.size(), 0.0);
    }
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

nlohmann::json Adam::to_json() const { return {{"steps", steps_}, {"m", m_}, {"v", v_}}; }

Adam Adam::from_json(const nlohmann::json& j, OptimizerConfig config) {
  Adam a(config);
  if (j.is_null()) return a;
  a.steps_ = j.at("steps").get<std::size_t>();
  a.m_ = j.at("m").get<std::map<std::string, std::vector<double>>>();
  a.v_ = j.at("v").get<std::map<std::string, std::vector<double>>>();
  return a;
}

nlohmann::json EpochLog::to_json() const {
  return {{"epoch", epoch},       {"phase", phase},         {"lr", lr},
          {"primary_loss", primary_loss}, {"synergy_loss", synergy_loss}, {"turns", turns}};
}

nlohmann::json Checkpoint::to_json() const {
  auto j = model.to_json();
  j["epoch"] = epoch;
  j["rng_state"] = rng_state;
  j["optimizer"] = optimizer;
  return j;
}

Checkpoint Checkpoint::from_json(const nlohmann::json& j) {
  try {
    return Checkpoint{Model::from_json(j), j.at("epoch").get<std::size_t>(), j.at("rng_state").get<std::string>(),
                      j.value("optimizer", nlohmann::json())};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << to_json().dump();
  if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

namespace {

std::size_t common_feature_dim(const std::vector<DialogRecord>& dialogs) {
  const std::size_t f = dialogs.front().feature_dim();
  for (const auto& d : dialogs)
    if (d.feature_dim() != f)
      throw DataError("dialog " + d.dialog_id + " has feature width " + std::to_string(d.feature_dim()) +
                      ", expected " + std::to_string(f));
  return f;
}

// N and M capped by the turn's candidate count.
std::pair<std::size_t, std::size_t> selection_sizes(const RunConfig& cfg, std::size_t candidates) {
  const std::size_t m = std::min(cfg.select_m, candidates);
  return {std::min(cfg.select_n, m), m};
}

void zero_grads(std::span<const NamedTensor> params) {
  for (const auto& [name, t] : params) {
    Tensor p = t;
    p.zero_grad();
  }
}

void scale_grads(std::span<const NamedTensor> params, double factor) {
  for (const auto& [name, t] : params) {
    Tensor p = t;
    for (auto& g : p.mutable_grad()) g *= factor;
  }
}

std::string rng_string(const std::mt19937_64& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

}  // namespace

TrainResult train(const RunConfig& config, const std::vector<DialogRecord>& dialogs, const TrainOptions& options) {
  config.validate();
  if (dialogs.empty()) throw DataError("training set is empty");
  for (const auto& d : dialogs) d.validate();
  RunConfig cfg = config;
  const std::size_t feature_dim = common_feature_dim(dialogs);
  if (cfg.dims.feature_dim != 0 && cfg.dims.feature_dim != feature_dim)
    throw DataError("config feature width " + std::to_string(cfg.dims.feature_dim) + " differs from the data (" +
                    std::to_string(feature_dim) + ")");
  cfg.dims.feature_dim = feature_dim;

  Vocabulary vocab = options.vocab ? *options.vocab
                                   : Vocabulary::build(vocabulary_corpus(dialogs), cfg.data.min_count);
  std::mt19937_64 rng(cfg.seed);
  Model model = Model::create(cfg, vocab, rng);
  const auto encoded = encode_dataset(dialogs, model.vocab());
  const auto params = model.parameters();
  Adam adam(cfg.optimizer);

  TrainResult result{Checkpoint{model, 0, rng_string(rng), adam.to_json()}, {}};
  std::vector<std::size_t> order(encoded.size());

  for (std::size_t epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.phase = epoch < cfg.epochs_primary ? 1 : 2;
    log.lr = cfg.optimizer.lr_at(epoch);

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t pending = 0;
    auto flush = [&] {
      if (pending == 0) return;
      if (pending > 1) scale_grads(params, 1.0 / static_cast<double>(pending));
      adam.step(params, log.lr);
      zero_grads(params);
      pending = 0;
    };

    for (std::size_t di : order) {
      const auto& dialog = encoded[di];
      for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
        const auto& turn = dialog.turns[t];
        Graph graph;
        const EncodedContext ctx = model.encode_turn(dialog, t);
        const Tensor scores = model.primary_scores(ctx, turn);
        const Tensor primary = model.primary_loss(scores, turn);
        Tensor loss = primary;
        double synergy_value = 0.0;
        if (log.phase == 2) {
          const auto [n, m] = selection_sizes(cfg, turn.candidates.size());
          const auto selected =
              select_candidates(scores.data(), n, m, SelectionMode::Train, turn.gt_index, rng);
          const Tensor synergy = synergy_cross_entropy(model.synergy_scores(ctx, turn, selected),
                                                       model.synergy_labels(turn, selected));
          synergy_value = synergy.item();
          loss = ops::add(primary, synergy);
        }
        if (!std::isfinite(loss.item()))
          throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) + " in dialog " +
                                dialog.dialog_id + ", turn " + std::to_string(t));
        graph.backward(loss);
        log.primary_loss += primary.item();
        log.synergy_loss += synergy_value;
        ++log.turns;
        if (++pending == cfg.accumulate_turns) flush();
      }
    }
    flush();
    log.primary_loss /= static_cast<double>(log.turns);
    log.synergy_loss /= static_cast<double>(log.turns);
    result.log.push_back(log);
    result.checkpoint = Checkpoint{model, epoch + 1, rng_string(rng), adam.to_json()};
    if (options.on_epoch) options.on_epoch(log, result.checkpoint);
  }
  return result;
}

std::string to_string(EvalMode mode) { return mode == EvalMode::TwoStage ? "two-stage" : "primary"; }

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "primary" || s == "primary-only") return EvalMode::PrimaryOnly;
  if (s == "two-stage") return EvalMode::TwoStage;
  throw ValueError("unknown evaluation mode '" + s + "'");
}

nlohmann::json TurnResult::to_json() const {
  nlohmann::json j = {{"dialog_id", dialog_id},
                      {"turn", turn},
                      {"ranking", ranking},
                      {"scores", ranking_scores},
                      {"primary_scores", primary_scores}};
  if (!selected.empty()) {
    j["selected"] = selected;
    j["synergy_scores"] = synergy_scores;
  }
  return j;
}

nlohmann::json Evaluation::to_json() const {
  nlohmann::json j = report.to_json();
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& c : loss_share) curves.push_back(c.to_json());
  j["loss_share"] = curves;
  return j;
}

std::vector<double> diagnostic_temperatures(double tau) {
  std::vector<double> out = {1.0, 0.5, 0.25};
  if (std::find(out.begin(), out.end(), tau) == out.end()) out.push_back(tau);
  return out;
}

Evaluation evaluate(const Model& model, const std::vector<DialogRecord>& dialogs, EvalMode mode) {
  if (dialogs.empty()) throw DataError("evaluation set is empty");
  const auto& cfg = model.config();
  const std::size_t feature_dim = common_feature_dim(dialogs);
  if (feature_dim != cfg.dims.feature_dim)
    throw DataError("checkpoint expects object features of width " + std::to_string(cfg.dims.feature_dim) +
                    ", data has " + std::to_string(feature_dim));

  Evaluation out;
  MetricsAccumulator acc;
  std::vector<double> margins;
  std::mt19937_64 unused_rng(0);
  for (const auto& record : dialogs) {
    record.validate();
    const EncodedDialog dialog = encode_dialog(record, model.vocab());
    for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
      const auto& turn = dialog.turns[t];
      const EncodedContext ctx = model.encode_turn(dialog, t);
      TurnResult r;
      r.dialog_id = dialog.dialog_id;
      r.turn = t;
      r.primary_scores = model.primary_scores(ctx, turn).values();
      const double gt_score = r.primary_scores[turn.gt_index];
      for (std::size_t i = 0; i < r.primary_scores.size(); ++i)
        if (i != turn.gt_index) margins.push_back(r.primary_scores[i] - gt_score);

      if (mode == EvalMode::PrimaryOnly) {
        r.ranking = descending_order(r.primary_scores);
        r.ranking_scores = r.primary_scores;
      } else {
        const auto [n, m] = selection_sizes(cfg, turn.candidates.size());
        r.selected = select_candidates(r.primary_scores, n, m, SelectionMode::Test, std::nullopt, unused_rng);
        r.synergy_scores = model.synergy_scores(ctx, turn, r.selected).values();
        r.ranking = fuse_rankings(r.primary_scores, r.selected, r.synergy_scores);
        const std::size_t c = r.ranking.size();
        r.ranking_scores.assign(c, 0.0);
        for (std::size_t pos = 0; pos < c; ++pos) r.ranking_scores[r.ranking[pos]] = static_cast<double>(c - pos);
      }
      acc.add(TurnRanking{r.ranking, turn.gt_index, turn.relevance});
      out.turns.push_back(std::move(r));
    }
  }
  out.report = acc.report();
  for (double tau : diagnostic_temperatures(cfg.tau)) out.loss_share.push_back(loss_share_diagnostic(margins, tau));
  return out;
}

nlohmann::json TurnScores::to_json() const { return {{"dialog_id", dialog_id}, {"turn", turn}, {"scores", scores}}; }

TurnScores TurnScores::from_json(const nlohmann::json& j) {
  try {
    return TurnScores{j.at("dialog_id").get<std::string>(), j.at("turn").get<std::size_t>(),
                      j.at("scores").get<std::vector<double>>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed score record: ") + e.what());
  }
}

std::vector<TurnScores> scores_of(const Evaluation& evaluation) {
  std::vector<TurnScores> out;
  out.reserve(evaluation.turns.size());
  for (const auto& t : evaluation.turns) out.push_back({t.dialog_id, t.turn, t.ranking_scores});
  return out;
}

void write_scores(const std::string& path, std::span<const TurnScores> scores) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& s : scores) out << s.to_json().dump() << '\n';
}

std::vector<TurnScores> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file " + path);
  std::vector<TurnScores> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(TurnScores::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  return out;
}

MetricsReport evaluate_scores(const std::vector<DialogRecord>& dialogs, std::span<const TurnScores> scores) {
  std::map<std::pair<std::string, std::size_t>, const TurnScores*> index;
  for (const auto& s : scores) index[{s.dialog_id, s.turn}] = &s;
  MetricsAccumulator acc;
  for (const auto& d : dialogs) {
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      const auto it = index.find({d.dialog_id, t});
      if (it == index.end())
        throw DataError("no scores for dialog " + d.dialog_id + ", turn " + std::to_string(t));
      const auto& s = it->second->scores;
      if (s.size() != d.turns[t].candidates.size())
        throw DataError("dialog " + d.dialog_id + ", turn " + std::to_string(t) + ": " + std::to_string(s.size()) +
                        " scores for " + std::to_string(d.turns[t].candidates.size()) + " candidates");
      acc.add(TurnRanking{descending_order(s), d.turns[t].gt_index, d.turns[t].relevance});
    }
  }
  return acc.report();
}

std::vector<TurnScores> ensemble_score_files(std::span<const std::vector<TurnScores>> runs) {
  if (runs.empty()) throw ValueError("nothing to ensemble");
  std::vector<TurnScores> out;
  const auto& first = runs.front();
  for (std::size_t i = 0; i < first.size(); ++i) {
    std::vector<std::vector<double>> vectors;
    for (const auto& run : runs) {
      if (run.size() != first.size()) throw DataError("score files cover different numbers of turns");
      if (run[i].dialog_id != first[i].dialog_id || run[i].turn != first[i].turn)
        throw DataError("score files disagree at line " + std::to_string(i + 1));
      vectors.push_back(run[i].scores);
    }
    try {
      out.push_back({first[i].dialog_id, first[i].turn, ensemble_scores(vectors)});
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("score files disagree: ") + e.what());
    }
  }
  return out;
}

}  // namespace synergy
