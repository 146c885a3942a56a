#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "synergy/config.hpp"
#include "synergy/dataset.hpp"
#include "synergy/errors.hpp"

using namespace synergy;

namespace {

struct DecodedObject {
  std::string color;
  std::string kind;
  std::size_t count;
};

std::size_t argmax(const std::vector<double>& v, std::size_t begin, std::size_t len) {
  return static_cast<std::size_t>(std::max_element(v.begin() + begin, v.begin() + begin + len) - v.begin()) - begin;
}

// Reads the scene back out of the noisy one-hot features.
std::vector<DecodedObject> decode_scene(const DialogRecord& d) {
  const auto& colors = world::colors();
  const auto& kinds = world::kinds();
  std::vector<DecodedObject> out;
  for (const auto& f : d.object_features) {
    out.push_back({colors[argmax(f, 0, colors.size())], kinds[argmax(f, colors.size(), kinds.size())],
                   1 + argmax(f, colors.size() + kinds.size(), world::count_words().size())});
  }
  return out;
}

// Both accepted surface forms of the true answer, short first.
std::pair<TokenSeq, TokenSeq> oracle_answers(const std::vector<DecodedObject>& scene, const TokenSeq& q,
                                            std::string& focus) {
  auto find = [&](const std::string& kind) -> const DecodedObject* {
    for (const auto& o : scene)
      if (o.kind == kind) return &o;
    return nullptr;
  };
  auto count_word = [](std::size_t n) { return world::count_words()[n - 1]; };
  if (q.size() == 5 && q[0] == "what" && q[1] == "color") {
    const auto* o = find(q[4]);
    REQUIRE(o != nullptr);
    focus = o->kind;
    return {{o->color}, {"the", o->kind, "is", o->color}};
  }
  if (q == TokenSeq{"what", "color", "is", "it"}) {
    const auto* o = find(focus);
    return {{o->color}, {"the", o->kind, "is", o->color}};
  }
  if (q == TokenSeq{"how", "many", "of", "them", "are", "there"}) {
    const auto* o = find(focus);
    return {{count_word(o->count)}, {"there", "are", count_word(o->count), o->kind}};
  }
  if (q[0] == "how") {
    const auto* o = find(q[2]);
    REQUIRE(o != nullptr);
    focus = o->kind;
    return {{count_word(o->count)}, {"there", "are", count_word(o->count), o->kind}};
  }
  REQUIRE(q.size() == 4);
  const auto* o = find(q[3]);
  if (o) {
    focus = o->kind;
    return {{"yes"}, {"yes", "there", "is", "a", q[3]}};
  }
  return {{"no"}, {"no", "there", "is", "no", q[3]}};
}

DataConfig small_config() {
  DataConfig c;
  c.dialogs = 12;
  c.turns = 6;
  c.candidates = 10;
  c.objects = 3;
  return c;
}

std::string serialize(const std::vector<DialogRecord>& ds) {
  std::string s;
  for (const auto& d : ds) s += d.to_json().dump() + "\n";
  return s;
}

}  // namespace

TEST_CASE("generator is deterministic in its seed") {
  const auto cfg = small_config();
  CHECK(serialize(generate_synthetic_dataset(cfg, 5)) == serialize(generate_synthetic_dataset(cfg, 5)));
  CHECK(serialize(generate_synthetic_dataset(cfg, 5)) != serialize(generate_synthetic_dataset(cfg, 6)));
}

TEST_CASE("generator honours the configured sizes") {
  const auto cfg = small_config();
  const auto ds = generate_synthetic_dataset(cfg, 1);
  REQUIRE(ds.size() == cfg.dialogs);
  std::set<std::string> ids;
  for (const auto& d : ds) {
    ids.insert(d.dialog_id);
    CHECK(d.object_features.size() == cfg.objects);
    CHECK(d.feature_dim() == world::feature_dim());
    REQUIRE(d.turns.size() == cfg.turns);
    for (const auto& t : d.turns) {
      CHECK(t.candidates.size() == cfg.candidates);
      CHECK(t.relevance.size() == cfg.candidates);
      CHECK(t.relevance[t.gt_index] == 1.0);
      CHECK(t.candidates[t.gt_index] == t.answer);
      std::set<TokenSeq> distinct(t.candidates.begin(), t.candidates.end());
      CHECK(distinct.size() == cfg.candidates);
      CHECK(std::count(t.relevance.begin(), t.relevance.end(), 1.0) == 1);
    }
    CHECK_NOTHROW(d.validate());
  }
  CHECK(ids.size() == cfg.dialogs);
}

TEST_CASE("ground-truth answers agree with the latent scene") {
  auto cfg = small_config();
  cfg.dialogs = 40;
  const auto ds = generate_synthetic_dataset(cfg, 9);
  std::size_t pronouns = 0, turns = 0;
  for (const auto& d : ds) {
    const auto scene = decode_scene(d);
    std::string focus = d.caption.at(2);
    for (const auto& t : d.turns) {
      ++turns;
      if (std::find(t.question.begin(), t.question.end(), "it") != t.question.end() ||
          std::find(t.question.begin(), t.question.end(), "them") != t.question.end())
        ++pronouns;
      const auto [short_form, long_form] = oracle_answers(scene, t.question, focus);
      CHECK((t.answer == short_form || t.answer == long_form));
      // The other surface form is present as a partially relevant candidate.
      const auto& other = t.answer == short_form ? long_form : short_form;
      const auto it = std::find(t.candidates.begin(), t.candidates.end(), other);
      REQUIRE(it != t.candidates.end());
      CHECK(t.relevance[static_cast<std::size_t>(it - t.candidates.begin())] == cfg.synonym_relevance);
    }
  }
  CHECK(pronouns > 0);
  CHECK(pronouns < turns);
}

TEST_CASE("answer style is fixed within a dialog") {
  const auto ds = generate_synthetic_dataset(small_config(), 4);
  for (const auto& d : ds) {
    std::set<bool> styles;
    for (const auto& t : d.turns) styles.insert(t.answer.size() > 1);
    CHECK(styles.size() == 1);
  }
}

TEST_CASE("answer style can be drawn per turn") {
  auto cfg = small_config();
  cfg.style_per_dialog = false;
  const auto ds = generate_synthetic_dataset(cfg, 4);
  std::size_t mixed = 0;
  for (const auto& d : ds) {
    std::set<bool> styles;
    for (const auto& t : d.turns) styles.insert(t.answer.size() > 1);
    mixed += styles.size() == 2 ? 1 : 0;
  }
  CHECK(mixed > 0);
  CHECK(RunConfig::from_json(RunConfig{.data = cfg}.to_json()).data.style_per_dialog == false);
}

TEST_CASE("descriptive answers can take several wordings") {
  auto cfg = small_config();
  cfg.descriptive_wordings = 3;
  const auto ds = generate_synthetic_dataset(cfg, 5);
  std::set<std::size_t> lengths;
  for (const auto& d : ds) {
    const auto scene = decode_scene(d);
    std::string focus = d.caption.at(2);
    for (const auto& t : d.turns) {
      const auto [short_form, long_form] = oracle_answers(scene, t.question, focus);
      if (t.answer.size() == 1) CHECK(t.answer == short_form);
      else lengths.insert(t.answer.size());
    }
  }
  CHECK(lengths.size() > 2);
  CHECK(RunConfig::from_json(RunConfig{.data = cfg}.to_json()).data.descriptive_wordings == 3);
  cfg.descriptive_wordings = 4;
  CHECK_THROWS_AS(generate_synthetic_dataset(cfg, 1), ValueError);
}

TEST_CASE("generator rejects invalid settings") {
  auto cfg = small_config();
  cfg.objects = 0;
  CHECK_THROWS_AS(generate_synthetic_dataset(cfg, 1), ValueError);
  cfg = small_config();
  cfg.candidates = 400;
  CHECK_THROWS_AS(generate_synthetic_dataset(cfg, 1), ValueError);
}

TEST_CASE("dataset files") {
  const auto dir = std::filesystem::temp_directory_path() / "synergy_test_data";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "ds.jsonl").string();
  const auto ds = generate_synthetic_dataset(small_config(), 2);
  write_dataset(path, ds);
  const auto back = read_dataset(path);
  CHECK(serialize(back) == serialize(ds));
  CHECK(back[3].object_features == ds[3].object_features);

  SUBCASE("malformed line") {
    const auto bad = (dir / "bad.jsonl").string();
    std::ofstream(bad) << "{\"dialog_id\": 3\n";
    CHECK_THROWS_AS(read_dataset(bad), DataError);
  }
  SUBCASE("broken invariant") {
    auto j = ds[0].to_json();
    j["turns"][0]["gt_index"] = 99;
    CHECK_THROWS_AS(DialogRecord::from_json(j), DataError);
    j = ds[0].to_json();
    j["turns"][1]["relevance"].erase(0);
    CHECK_THROWS_AS(DialogRecord::from_json(j), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_dataset((dir / "nope.jsonl").string()), DataError); }
}

TEST_CASE("encoding a dialog") {
  const auto ds = generate_synthetic_dataset(small_config(), 3);
  const auto vocab = Vocabulary::build(vocabulary_corpus(ds), 0);
  const auto enc = encode_dialog(ds[0], vocab);
  CHECK(enc.features.shape() == Shape{world::feature_dim(), 3});
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < world::feature_dim(); ++i) CHECK(enc.features.at(i, j) == ds[0].object_features[j][i]);
  CHECK(vocab.decode(enc.caption) == ds[0].caption);
  CHECK(vocab.decode(enc.turns[1].question) == ds[0].turns[1].question);
  CHECK(enc.turns[1].gt_index == ds[0].turns[1].gt_index);
  CHECK(enc.turns[1].candidates[enc.turns[1].gt_index] == enc.turns[1].answer);

  const auto corpus = vocabulary_corpus(ds);
  CHECK(corpus.size() == ds.size() * (1 + 2 * small_config().turns));
}
