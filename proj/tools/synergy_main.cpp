// synergy: command-line front end for data generation, training, evaluation,
// beam-search generation and score ensembling.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "synergy/config.hpp"
#include "synergy/dataset.hpp"
#include "synergy/errors.hpp"
#include "synergy/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace synergy;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kDiverged = 3 };

// Flags that override config-file values.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  std::optional<std::string> kind;
  std::optional<std::size_t> epochs_primary, epochs_joint, select_n, select_m, beam_width;
  std::optional<double> lr;
  std::optional<std::size_t> dialogs, turns, candidates, objects;
  std::vector<std::string> set;  // dotted.key=json-value

  void attach(CLI::App& cmd, bool data_flags) {
    cmd.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd.add_option("--seed", seed);
    cmd.add_option("--tau", tau);
    cmd.add_option("--kind", kind, "discriminative | generative");
    cmd.add_option("--epochs-primary", epochs_primary);
    cmd.add_option("--epochs-joint", epochs_joint);
    cmd.add_option("--select-n", select_n);
    cmd.add_option("--select-m", select_m);
    cmd.add_option("--beam-width", beam_width);
    cmd.add_option("--lr", lr);
    if (data_flags) {
      cmd.add_option("--dialogs", dialogs);
      cmd.add_option("--turns", turns);
      cmd.add_option("--candidates", candidates);
      cmd.add_option("--objects", objects);
    }
    cmd.add_option("--set", set, "override any config field, e.g. --set dims.hidden=32");
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    json j = json::object();
    if (seed) j["seed"] = *seed;
    if (tau) j["tau"] = *tau;
    if (kind) j["kind"] = *kind;
    if (epochs_primary) j["epochs_primary"] = *epochs_primary;
    if (epochs_joint) j["epochs_joint"] = *epochs_joint;
    if (select_n) j["select_n"] = *select_n;
    if (select_m) j["select_m"] = *select_m;
    if (beam_width) j["beam_width"] = *beam_width;
    if (lr) j["optimizer"]["lr"] = *lr;
    if (dialogs) j["data"]["dialogs"] = *dialogs;
    if (turns) j["data"]["turns"] = *turns;
    if (candidates) j["data"]["candidates"] = *candidates;
    if (objects) j["data"]["objects"] = *objects;
    for (const auto& kv : set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValueError("--set expects key=value, got '" + kv + "'");
      json value;
      try {
        value = json::parse(kv.substr(eq + 1));
      } catch (const json::exception&) {
        value = kv.substr(eq + 1);
      }
      std::string pointer = "/" + kv.substr(0, eq);
      std::replace(pointer.begin(), pointer.end(), '.', '/');
      j[json::json_pointer(pointer)] = value;
    }
    cfg.merge_json(j);
    cfg.validate();
    return cfg;
  }
};

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string epoch_file(std::size_t epoch) {
  std::ostringstream s;
  s << "checkpoint_epoch" << std::setw(3) << std::setfill('0') << epoch << ".json";
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage visual dialog answer ranking"};
  app.require_subcommand(1);

  Overrides gen_over, train_over;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dialog dataset (JSON lines)");
  gen_over.attach(*gen, true);
  gen->add_option("--out", gen_out)->required();

  std::string vocab_data, vocab_out;
  std::size_t vocab_min_count = 4;
  auto* vocab_cmd = app.add_subcommand("build-vocab", "build a vocabulary from a dataset");
  vocab_cmd->add_option("--data", vocab_data)->required()->check(CLI::ExistingFile);
  vocab_cmd->add_option("--min-count", vocab_min_count, "keep tokens seen more than this many times");
  vocab_cmd->add_option("--out", vocab_out)->required();

  std::string train_data, train_dir, train_vocab;
  bool keep_epochs = true;
  auto* train_cmd = app.add_subcommand("train", "train a model, writing checkpoints and logs to a directory");
  train_over.attach(*train_cmd, false);
  train_cmd->add_option("--data", train_data)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_dir)->required();
  train_cmd->add_option("--vocab", train_vocab, "vocabulary file from build-vocab")->check(CLI::ExistingFile);
  train_cmd->add_flag("!--no-epoch-checkpoints", keep_epochs, "only write the final checkpoint");

  std::string eval_ckpt, eval_data, eval_mode = "two-stage", eval_report;
  auto* eval_cmd = app.add_subcommand("evaluate", "compute ranking metrics for a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--mode", eval_mode)->check(CLI::IsMember({"primary", "two-stage"}));
  eval_cmd->add_option("--report", eval_report, "write the report here instead of stdout");

  std::string rank_ckpt, rank_data, rank_mode = "two-stage", rank_out, rank_scores;
  auto* rank_cmd = app.add_subcommand("rank", "dump per-turn rankings as JSON lines");
  rank_cmd->add_option("--checkpoint", rank_ckpt)->required()->check(CLI::ExistingFile);
  rank_cmd->add_option("--data", rank_data)->required()->check(CLI::ExistingFile);
  rank_cmd->add_option("--mode", rank_mode)->check(CLI::IsMember({"primary", "two-stage"}));
  rank_cmd->add_option("--out", rank_out)->required();
  rank_cmd->add_option("--scores", rank_scores, "also write a score file for ensemble");

  std::string beam_ckpt, beam_data, beam_out;
  std::optional<std::size_t> beam_width, beam_max_len;
  auto* beam_cmd = app.add_subcommand("beam", "generate candidate answers with beam search");
  beam_cmd->add_option("--checkpoint", beam_ckpt)->required()->check(CLI::ExistingFile);
  beam_cmd->add_option("--data", beam_data)->required()->check(CLI::ExistingFile);
  beam_cmd->add_option("--width", beam_width);
  beam_cmd->add_option("--max-len", beam_max_len);
  beam_cmd->add_option("--out", beam_out)->required();

  std::vector<std::string> ens_inputs;
  std::string ens_out, ens_data, ens_report;
  auto* ens_cmd = app.add_subcommand("ensemble", "sum score files and write the merged rankings");
  ens_cmd->add_option("--scores", ens_inputs)->required()->check(CLI::ExistingFile);
  ens_cmd->add_option("--out", ens_out)->required();
  ens_cmd->add_option("--data", ens_data, "dataset for a metrics report")->check(CLI::ExistingFile);
  ens_cmd->add_option("--report", ens_report)->needs("--data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const RunConfig cfg = gen_over.resolve();
      const auto dialogs = generate_synthetic_dataset(cfg.data, cfg.seed);
      write_dataset(gen_out, dialogs);
      std::cout << "wrote " << dialogs.size() << " dialogs to " << gen_out << '\n';
    } else if (*vocab_cmd) {
      const auto dialogs = read_dataset(vocab_data);
      const auto vocab = Vocabulary::build(vocabulary_corpus(dialogs), vocab_min_count);
      write_json(vocab_out, vocab.to_json());
      std::cout << "vocabulary of " << vocab.size() << " tokens written to " << vocab_out << '\n';
    } else if (*train_cmd) {
      const RunConfig cfg = train_over.resolve();
      const auto dialogs = read_dataset(train_data);
      TrainOptions options;
      if (!train_vocab.empty()) {
        std::ifstream in(train_vocab);
        try {
          options.vocab = Vocabulary::from_json(json::parse(in));
        } catch (const json::exception& e) {
          throw DataError("vocabulary " + train_vocab + ": " + e.what());
        }
      }
      fs::create_directories(train_dir);
      const fs::path dir(train_dir);
      std::ofstream loss_log(dir / "loss_log.jsonl");
      if (!loss_log) throw DataError("cannot write into " + train_dir);
      options.on_epoch = [&](const EpochLog& log, const Checkpoint& ckpt) {
        loss_log << log.to_json().dump() << '\n' << std::flush;
        std::cout << "epoch " << log.epoch << " phase " << log.phase << " lr " << log.lr << " primary "
                  << log.primary_loss << " synergy " << log.synergy_loss << '\n';
        if (keep_epochs) ckpt.save((dir / epoch_file(log.epoch)).string());
      };
      const auto result = train(cfg, dialogs, options);
      result.checkpoint.save((dir / "checkpoint.json").string());
      const auto& model = result.checkpoint.model;
      write_json((dir / "manifest.json").string(),
                 {{"config", model.config().to_json()},
                  {"dataset", train_data},
                  {"dialogs", dialogs.size()},
                  {"vocab_size", model.vocab().size()},
                  {"vocab_min_count", model.vocab().min_count()},
                  {"parameters", [&] {
                     std::size_t n = 0;
                     for (const auto& [name, t] : model.parameters()) n += t.numel();
                     return n;
                   }()},
                  {"batch",
                   {{"turns_per_step", cfg.accumulate_turns},
                    {"shuffle", "dialog order reshuffled every epoch; turns of a dialog visited in order"},
                    {"gradient", "mean over the turns of a step"}}},
                  {"epochs", result.log.size()},
                  {"final_checkpoint", "checkpoint.json"},
                  {"loss_log", "loss_log.jsonl"}});
      std::cout << "final checkpoint written to " << (dir / "checkpoint.json").string() << '\n';
    } else if (*eval_cmd) {
      const auto ckpt = Checkpoint::load(eval_ckpt);
      const auto evaluation = evaluate(ckpt.model, read_dataset(eval_data), eval_mode_from_string(eval_mode));
      json report = evaluation.to_json();
      report["mode"] = eval_mode;
      if (eval_report.empty())
        std::cout << report.dump(2) << '\n';
      else
        write_json(eval_report, report);
    } else if (*rank_cmd) {
      const auto ckpt = Checkpoint::load(rank_ckpt);
      const auto evaluation = evaluate(ckpt.model, read_dataset(rank_data), eval_mode_from_string(rank_mode));
      std::ofstream out(rank_out);
      if (!out) throw DataError("cannot write " + rank_out);
      for (const auto& t : evaluation.turns) out << t.to_json().dump() << '\n';
      if (!rank_scores.empty()) write_scores(rank_scores, scores_of(evaluation));
      std::cout << "ranked " << evaluation.turns.size() << " turns\n";
    } else if (*beam_cmd) {
      const auto ckpt = Checkpoint::load(beam_ckpt);
      const auto& model = ckpt.model;
      const std::size_t width = beam_width.value_or(model.config().beam_width);
      const std::size_t max_len = beam_max_len.value_or(model.config().beam_max_len);
      if (width == 0 || max_len == 0) throw ValueError("beam width and length must be positive");
      std::ofstream out(beam_out);
      if (!out) throw DataError("cannot write " + beam_out);
      for (const auto& record : read_dataset(beam_data)) {
        if (record.feature_dim() != model.config().dims.feature_dim)
          throw DataError("dialog " + record.dialog_id + " does not match the checkpoint's feature width");
        const auto dialog = encode_dialog(record, model.vocab());
        for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
          json cands = json::array();
          for (const auto& h : model.generate(model.encode_turn(dialog, t), width, max_len))
            cands.push_back({{"tokens", model.vocab().decode(h.tokens)}, {"log_prob", h.log_prob},
                             {"complete", h.complete}});
          out << json{{"dialog_id", dialog.dialog_id}, {"turn", t}, {"candidates", cands}}.dump() << '\n';
        }
      }
    } else if (*ens_cmd) {
      std::vector<std::vector<TurnScores>> runs;
      for (const auto& f : ens_inputs) runs.push_back(read_scores(f));
      const auto merged = ensemble_score_files(runs);
      std::ofstream out(ens_out);
      if (!out) throw DataError("cannot write " + ens_out);
      for (const auto& s : merged) {
        json j = s.to_json();
        j["ranking"] = descending_order(s.scores);
        out << j.dump() << '\n';
      }
      if (!ens_data.empty()) {
        const json report = evaluate_scores(read_dataset(ens_data), merged).to_json();
        if (ens_report.empty())
          std::cout << report.dump(2) << '\n';
        else
          write_json(ens_report, report);
      }
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
