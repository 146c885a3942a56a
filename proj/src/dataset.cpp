#include "synergy/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "synergy/errors.hpp"

namespace synergy {

namespace world {

const std::vector<std::string>& colors() {
  static const std::vector<std::string> v = {"red", "blue", "green", "yellow", "white", "black"};
  return v;
}

const std::vector<std::string>& kinds() {
  static const std::vector<std::string> v = {"dog", "cat", "car", "ball", "hat", "cup"};
  return v;
}

const std::vector<std::string>& count_words() {
  static const std::vector<std::string> v = {"one", "two", "three", "four"};
  return v;
}

std::size_t feature_dim() { return colors().size() + kinds().size() + count_words().size(); }

}  // namespace world

void DialogRecord::validate() const {
  auto fail = [&](const std::string& msg) { throw DataError("dialog " + dialog_id + ": " + msg); };
  if (object_features.empty()) fail("no object features");
  for (const auto& row : object_features)
    if (row.size() != object_features.front().size() || row.empty()) fail("ragged object features");
  if (caption.empty()) fail("empty caption");
  if (turns.empty()) fail("no turns");
  for (std::size_t t = 0; t < turns.size(); ++t) {
    const auto& turn = turns[t];
    const std::string where = "turn " + std::to_string(t) + ": ";
    if (turn.question.empty()) fail(where + "empty question");
    if (turn.candidates.size() < 2) fail(where + "fewer than two candidates");
    if (turn.gt_index >= turn.candidates.size()) fail(where + "gt_index out of range");
    if (turn.relevance.size() != turn.candidates.size()) fail(where + "relevance length differs from candidates");
    for (double r : turn.relevance)
      if (!(r >= 0.0 && r <= 1.0)) fail(where + "relevance outside [0,1]");
    if (!(turn.relevance[turn.gt_index] > 0.0)) fail(where + "ground truth has zero relevance");
    for (const auto& c : turn.candidates)
      if (c.empty()) fail(where + "empty candidate");
    if (turn.answer != turn.candidates[turn.gt_index]) fail(where + "answer differs from the ground-truth candidate");
  }
}

nlohmann::json DialogRecord::to_json() const {
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& t : turns)
    jt.push_back({{"question", t.question},
                  {"answer", t.answer},
                  {"candidates", t.candidates},
                  {"gt_index", t.gt_index},
                  {"relevance", t.relevance}});
  return {{"dialog_id", dialog_id}, {"object_features", object_features}, {"caption", caption}, {"turns", jt}};
}

DialogRecord DialogRecord::from_json(const nlohmann::json& j) {
  DialogRecord r;
  try {
    r.dialog_id = j.at("dialog_id").get<std::string>();
    r.object_features = j.at("object_features").get<std::vector<std::vector<double>>>();
    r.caption = j.at("caption").get<TokenSeq>();
    for (const auto& jt : j.at("turns")) {
      DialogTurn t;
      t.question = jt.at("question").get<TokenSeq>();
      t.candidates = jt.at("candidates").get<std::vector<TokenSeq>>();
      t.gt_index = jt.at("gt_index").get<std::size_t>();
      if (jt.contains("relevance")) {
        t.relevance = jt.at("relevance").get<std::vector<double>>();
      } else {
        t.relevance.assign(t.candidates.size(), 0.0);
        if (t.gt_index < t.relevance.size()) t.relevance[t.gt_index] = 1.0;
      }
      if (jt.contains("answer"))
        t.answer = jt.at("answer").get<TokenSeq>();
      else if (t.gt_index < t.candidates.size())
        t.answer = t.candidates[t.gt_index];
      r.turns.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed dialog record: ") + e.what());
  }
  r.validate();
  return r;
}

namespace {

struct SceneObject {
  std::size_t color;
  std::size_t kind;
  std::size_t count;  // 1..4
};

enum class QuestionType { Color, Count, Exist, PronounColor, PronounCount };

// What a question asks about and its true value.
struct Query {
  QuestionType type;
  std::size_t kind;
  std::size_t value;  // color index, count, or 1/0 for present/absent
};

constexpr std::size_t kMaxWordings = 3;

// `wording` picks one of the descriptive phrasings; short answers have one.
TokenSeq answer_text(QuestionType type, std::size_t kind, std::size_t value, bool descriptive,
                     std::size_t wording = 0) {
  const auto& K = world::kinds()[kind];
  switch (type) {
    case QuestionType::Color:
    case QuestionType::PronounColor: {
      const auto& c = world::colors()[value];
      if (!descriptive) return {c};
      const TokenSeq forms[kMaxWordings] = {{"the", K, "is", c}, {"it", "is", c}, {"the", K, "looks", c}};
      return forms[wording];
    }
    case QuestionType::Count:
    case QuestionType::PronounCount: {
      const auto& w = world::count_words()[value - 1];
      if (!descriptive) return {w};
      const TokenSeq forms[kMaxWordings] = {{"there", "are", w, K}, {"i", "can", "see", w}, {w, "of", "them"}};
      return forms[wording];
    }
    case QuestionType::Exist: {
      if (!descriptive) return {value ? "yes" : "no"};
      if (value) {
        const TokenSeq forms[kMaxWordings] = {
            {"yes", "there", "is", "a", K}, {"yes", "i", "can", "see", "one"}, {"yes", "there", "is", "one"}};
        return forms[wording];
      }
      const TokenSeq forms[kMaxWordings] = {
          {"no", "there", "is", "no", K}, {"no", "i", "can", "not", "see", "one"}, {"no", "there", "is", "none"}};
      return forms[wording];
    }
  }
  return {};
}

TokenSeq question_text(QuestionType type, std::size_t kind) {
  const auto& K = world::kinds()[kind];
  switch (type) {
    case QuestionType::Color: return {"what", "color", "is", "the", K};
    case QuestionType::Count: return {"how", "many", K, "are", "there"};
    case QuestionType::Exist: return {"is", "there", "a", K};
    case QuestionType::PronounColor: return {"what", "color", "is", "it"};
    case QuestionType::PronounCount: return {"how", "many", "of", "them", "are", "there"};
  }
  return {};
}

std::string join(const TokenSeq& seq) {
  std::string s;
  for (const auto& t : seq) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

class Generator {
 public:
  Generator(const DataConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed), rng_(seed) {}

  DialogRecord dialog(std::size_t index) {
    DialogRecord rec;
    std::ostringstream id;
    id << "dlg-" << seed_ << "-" << std::setw(5) << std::setfill('0') << index;
    rec.dialog_id = id.str();

    std::vector<std::size_t> kind_order(world::kinds().size());
    std::iota(kind_order.begin(), kind_order.end(), std::size_t{0});
    std::shuffle(kind_order.begin(), kind_order.end(), rng_);
    std::vector<SceneObject> scene;
    for (std::size_t i = 0; i < cfg_.objects; ++i)
      scene.push_back({uniform(world::colors().size()), kind_order[i], 1 + uniform(world::count_words().size())});

    std::normal_distribution<double> noise(0.0, cfg_.feature_noise > 0 ? cfg_.feature_noise : 1.0);
    for (const auto& obj : scene) {
      std::vector<double> f(world::feature_dim(), 0.0);
      f[obj.color] = 1.0;
      f[world::colors().size() + obj.kind] = 1.0;
      f[world::colors().size() + world::kinds().size() + obj.count - 1] = 1.0;
      if (cfg_.feature_noise > 0)
        for (auto& v : f) v += noise(rng_);
      rec.object_features.push_back(std::move(f));
    }

    const std::size_t named = std::min<std::size_t>(2, scene.size());
    for (std::size_t i = 0; i < named; ++i) {
      if (i) rec.caption.push_back("and");
      rec.caption.insert(rec.caption.end(),
                         {"a", world::colors()[scene[i].color], world::kinds()[scene[i].kind]});
    }
    std::size_t focus = 0;
    bool descriptive = bernoulli(cfg_.descriptive_fraction);

    for (std::size_t t = 0; t < cfg_.turns; ++t) {
      if (t > 0 && !cfg_.style_per_dialog) descriptive = bernoulli(cfg_.descriptive_fraction);
      const Query q = next_query(scene, focus);
      DialogTurn turn;
      turn.question = question_text(q.type, q.kind);
      const std::size_t wording = descriptive ? pick_wording() : 0;
      turn.answer = answer_text(q.type, q.kind, q.value, descriptive, wording);
      fill_candidates(turn, q, descriptive, wording, scene);
      rec.turns.push_back(std::move(turn));
    }
    return rec;
  }

 private:
  std::size_t uniform(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(rng_); }
  std::size_t pick_wording() { return cfg_.descriptive_wordings > 1 ? uniform(cfg_.descriptive_wordings) : 0; }

  Query next_query(const std::vector<SceneObject>& scene, std::size_t& focus) {
    if (bernoulli(cfg_.pronoun_fraction)) {
      const auto& obj = scene[focus];
      if (bernoulli(0.5)) return {QuestionType::PronounColor, obj.kind, obj.color};
      return {QuestionType::PronounCount, obj.kind, obj.count};
    }
    switch (uniform(3)) {
      case 0: {
        focus = uniform(scene.size());
        return {QuestionType::Color, scene[focus].kind, scene[focus].color};
      }
      case 1: {
        focus = uniform(scene.size());
        return {QuestionType::Count, scene[focus].kind, scene[focus].count};
      }
      default: {
        const std::size_t kind = uniform(world::kinds().size());
        for (std::size_t i = 0; i < scene.size(); ++i)
          if (scene[i].kind == kind) {
            focus = i;
            return {QuestionType::Exist, kind, 1};
          }
        return {QuestionType::Exist, kind, 0};
      }
    }
  }

  TokenSeq random_answer() {
    const auto type = static_cast<QuestionType>(uniform(3));
    const std::size_t kind = uniform(world::kinds().size());
    std::size_t value = 0;
    if (type == QuestionType::Color) value = uniform(world::colors().size());
    if (type == QuestionType::Count) value = 1 + uniform(world::count_words().size());
    if (type == QuestionType::Exist) value = uniform(2);
    const bool descriptive = bernoulli(0.5);
    return answer_text(type, kind, value, descriptive, descriptive ? pick_wording() : 0);
  }

  void fill_candidates(DialogTurn& turn, const Query& q, bool descriptive, std::size_t wording,
                       const std::vector<SceneObject>& scene) {
    struct Entry {
      TokenSeq text;
      double relevance;
    };
    std::vector<Entry> entries;
    std::set<std::string> seen;
    auto add = [&](TokenSeq text, double rel) {
      if (entries.size() >= cfg_.candidates) return;
      if (seen.insert(join(text)).second) entries.push_back({std::move(text), rel});
    };

    add(turn.answer, 1.0);
    add(answer_text(q.type, q.kind, q.value, !descriptive, descriptive ? 0 : pick_wording()), cfg_.synonym_relevance);

    // Same template, wrong value; descriptive answers also get true statements
    // about other objects, which only the question can rule out.
    std::vector<TokenSeq> hard;
    const bool color_q = q.type == QuestionType::Color || q.type == QuestionType::PronounColor;
    const bool count_q = q.type == QuestionType::Count || q.type == QuestionType::PronounCount;
    if (color_q) {
      for (std::size_t c = 0; c < world::colors().size(); ++c)
        if (c != q.value) hard.push_back(answer_text(q.type, q.kind, c, descriptive, wording));
    } else if (count_q) {
      for (std::size_t c = 1; c <= world::count_words().size(); ++c)
        if (c != q.value) hard.push_back(answer_text(q.type, q.kind, c, descriptive, wording));
    } else {
      hard.push_back(answer_text(q.type, q.kind, 1 - q.value, descriptive, wording));
    }
    if (descriptive) {
      for (const auto& obj : scene) {
        if (obj.kind == q.kind) continue;
        if (color_q) hard.push_back(answer_text(q.type, obj.kind, obj.color, true, wording));
        if (count_q) hard.push_back(answer_text(q.type, obj.kind, obj.count, true, wording));
        if (q.type == QuestionType::Exist) hard.push_back(answer_text(q.type, obj.kind, 1, true, wording));
      }
    }
    std::shuffle(hard.begin(), hard.end(), rng_);
    for (std::size_t i = 0; i < hard.size() && i < cfg_.hard_distractors; ++i) add(hard[i], 0.0);

    for (std::size_t attempts = 0; entries.size() < cfg_.candidates; ++attempts) {
      if (attempts > 100000) throw ValueError("cannot draw " + std::to_string(cfg_.candidates) + " distinct candidates");
      add(random_answer(), 0.0);
    }

    std::vector<std::size_t> perm(entries.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng_);
    for (std::size_t slot = 0; slot < perm.size(); ++slot) {
      auto& e = entries[perm[slot]];
      if (perm[slot] == 0) turn.gt_index = slot;
      turn.candidates.push_back(e.text);
      turn.relevance.push_back(e.relevance);
    }
  }

  DataConfig cfg_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<DialogRecord> generate_synthetic_dataset(const DataConfig& config, std::uint64_t seed) {
  RunConfig check;
  check.data = config;
  check.select_n = 1;
  check.select_m = 1;
  check.validate();
  Generator gen(config, seed);
  std::vector<DialogRecord> out;
  out.reserve(config.dialogs);
  for (std::size_t i = 0; i < config.dialogs; ++i) out.push_back(gen.dialog(i));
  return out;
}

void write_dataset(const std::string& path, const std::vector<DialogRecord>& dialogs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& d : dialogs) out << d.to_json().dump() << '\n';
}

std::vector<DialogRecord> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  std::vector<DialogRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(DialogRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("dataset " + path + " is empty");
  return out;
}

std::vector<TokenSeq> vocabulary_corpus(const std::vector<DialogRecord>& dialogs) {
  std::vector<TokenSeq> corpus;
  for (const auto& d : dialogs) {
    corpus.push_back(d.caption);
    for (const auto& t : d.turns) {
      corpus.push_back(t.question);
      corpus.push_back(t.answer);
    }
  }
  return corpus;
}

EncodedDialog encode_dialog(const DialogRecord& record, const Vocabulary& vocab) {
  EncodedDialog out;
  out.dialog_id = record.dialog_id;
  const std::size_t n = record.object_features.size();
  const std::size_t f = record.feature_dim();
  std::vector<double> values(f * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < f; ++i) values[i * n + j] = record.object_features[j][i];
  out.features = Tensor(Shape{f, n}, std::move(values));
  out.caption = vocab.encode(record.caption);
  for (const auto& t : record.turns) {
    EncodedTurn et;
    et.question = vocab.encode(t.question);
    et.answer = vocab.encode(t.answer);
    for (const auto& c : t.candidates) et.candidates.push_back(vocab.encode(c));
    et.gt_index = t.gt_index;
    et.relevance = t.relevance;
    out.turns.push_back(std::move(et));
  }
  return out;
}

std::vector<EncodedDialog> encode_dataset(const std::vector<DialogRecord>& dialogs, const Vocabulary& vocab) {
  std::vector<EncodedDialog> out;
  out.reserve(dialogs.size());
  for (const auto& d : dialogs) out.push_back(encode_dialog(d, vocab));
  return out;
}

}  // namespace synergy
