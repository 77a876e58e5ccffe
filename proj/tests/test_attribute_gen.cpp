#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "divrec/attr/attributes.hpp"
#include "divrec/errors.hpp"
#include "doctest.h"

using namespace divrec;
using namespace divrec::attr;
using prompt::kNoAttribute;

namespace {

const std::vector<std::string> kBeauty = {"Mascara makeup black", "Mascara makeup waterproof",
                                          "Lipstick makeup red", "Shampoo hair care", "Conditioner hair care"};

Predictions with_firsts(const std::map<std::string, int>& counts,
                        const std::vector<std::string>& tail = {}) {
  Predictions p;
  int n = 0;
  for (const auto& [label, c] : counts) {
    for (int i = 0; i < c; ++i) {
      std::vector<std::string> cands{label};
      cands.insert(cands.end(), tail.begin(), tail.end());
      p["s" + std::to_string(n++)] = cands;
    }
  }
  return p;
}

}  // namespace

TEST_CASE("co-occurrence table matches hand counts on a toy corpus") {
  auto pred = CooccurrencePredictor::build(kBeauty, {3, 3});
  // Frequencies: makeup 3; care, hair, mascara 2 (ties by token).
  CHECK(pred.categories() == std::vector<std::string>{"makeup", "care", "hair"});
  CHECK(pred.probability("makeup", "mascara") == doctest::Approx(1.0));
  CHECK(pred.probability("hair", "mascara") == 0.0);
  CHECK(pred.probability("makeup", "makeup") == doctest::Approx(1.0));
  CHECK(pred.probability("hair", "care") == doctest::Approx(1.0));
  CHECK(pred.predict({"mascara", "mascara"}) == std::vector<std::string>{"makeup"});
  // shampoo -> care 1, hair 1: tie resolves to the lexicographically smaller label.
  CHECK(pred.predict({"shampoo"}) == std::vector<std::string>{"care", "hair"});
  CHECK(pred.predict({"zebra"}) == std::vector<std::string>{kNoAttribute});
  CHECK(pred.predict({}) == std::vector<std::string>{kNoAttribute});
}

TEST_CASE("predictor contracts") {
  CHECK_THROWS_AS(CooccurrencePredictor::build({"the of and", "a"}), PredictorError);
  auto a = CooccurrencePredictor::build(kBeauty);
  auto b = CooccurrencePredictor::build(kBeauty);
  CHECK(a.predict({"lipstick", "hair"}) == b.predict({"lipstick", "hair"}));
}

TEST_CASE("predict_attributes reads the history slot of attribute prompts") {
  auto tok = prompt::Tokenizer::build(kBeauty);
  prompt::PromptForge forge(prompt::TemplateSet::builtin(), tok);
  auto pred = CooccurrencePredictor::build(kBeauty);
  std::vector<AttributeSample> samples = {{"u1", forge.render_attribute({"Mascara makeup black"}, "Beauty")},
                                          {"u2", forge.render_attribute({"Shampoo hair care"}, "Beauty")}};
  auto out = predict_attributes(samples, tok, pred);
  CHECK(out.at("u1").front() == "makeup");
  CHECK(out.at("u2").front() != "makeup");
  samples[0].prompt = forge.render_gan(kNoAttribute, {"x"});
  CHECK_THROWS_AS(predict_attributes(samples, tok, pred), ContractError);
}

TEST_CASE("select_top_k ranks by frequency then label") {
  auto preds = with_firsts({{"a", 10}, {"b", 7}, {"c", 7}, {"d", 1}});
  auto set = select_top_k(preds, 3, {});
  CHECK(set.labels == std::vector<std::string>{"a", "b", "c"});
  CHECK(set.frequency.at("b") == 7);
  std::size_t original = 0;
  for (const auto& [s, l] : set.assignment) original += l == kOriginal;
  CHECK(original == 1);  // the lone "d" sample

  auto stopped = select_top_k(preds, 3, {"a"});
  CHECK(stopped.labels == std::vector<std::string>{"b", "c", "d"});
  CHECK_THROWS_AS(select_top_k(preds, 5, {}), AttributeError);
  CHECK_THROWS_AS(select_top_k(preds, 0, {}), ContractError);
  CHECK(select_top_k(preds, 3, {}).labels == set.labels);
}

TEST_CASE("dropped labels fall through to the next candidate or ORIGINAL") {
  Predictions p = {{"x1", {"a", "c"}}, {"x2", {"a"}}, {"x3", {"b"}}, {"x4", {"c"}}, {"x5", {kNoAttribute}}};
  auto set = select_top_k(p, 2, {"a"});
  CHECK(set.labels == std::vector<std::string>{"c", "b"});
  CHECK(set.assignment.at("x1") == "c");
  CHECK(set.assignment.at("x2") == kOriginal);
  CHECK(set.assignment.at("x5") == kOriginal);
}

TEST_CASE("attribute files, stoplist and external predictions") {
  const auto dir = std::filesystem::temp_directory_path() / "divrec_attr_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "stop.txt") << "# header\n  spam \n\nbad\n";
    std::ofstream(dir / "ext.jsonl") << R"({"sample_id":"u1","labels":["fantasy","mystery"]})" << "\n"
                                     << R"({"sample_id":"u2","labels":[]})" << "\n";
  }
  CHECK(read_stoplist(dir / "stop.txt") == std::set<std::string>{"spam", "bad"});
  auto ext = read_external_predictions(dir / "ext.jsonl");
  CHECK(ext.at("u1") == std::vector<std::string>{"fantasy", "mystery"});
  CHECK(ext.at("u2") == std::vector<std::string>{kNoAttribute});
  std::ofstream(dir / "bad.jsonl") << "{\"sample_id\":1}\n";
  CHECK_THROWS_AS(read_external_predictions(dir / "bad.jsonl"), PredictorError);

  auto set = select_top_k(with_firsts({{"a", 3}, {"b", 2}}), 2, {});
  save_attributes(dir / "attributes.json", set, "abc");
  auto back = load_attributes(dir / "attributes.json");
  CHECK(back.labels == set.labels);
  CHECK(back.assignment == set.assignment);
  CHECK(back.frequency == set.frequency);
  std::filesystem::remove_all(dir);
}

TEST_CASE("build_attribute_datasets yields k+1 aligned corpora") {
  std::vector<std::string> corpus = {"fantasy mystery romance science history cooking items", "silent garden"};
  auto tok = prompt::Tokenizer::build(corpus);
  prompt::PromptForge forge(prompt::TemplateSet::builtin(), tok);
  AttributeSet set;
  set.labels = {"fantasy", "mystery", "romance", "science", "history"};
  std::vector<HistoryText> hist = {{"u1", {"silent fantasy garden", "fantasy"}}, {"u2", {"cooking garden"}}};
  auto corpora = build_attribute_datasets(hist, set, forge);
  REQUIRE(corpora.size() == 6);
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    REQUIRE(corpora[c].size() == hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i) {
      CHECK(corpora[c][i].class_id == static_cast<int>(c));
      CHECK(corpora[c][i].prompt.class_id == static_cast<int>(c));
      CHECK(corpora[c][i].target_ids == forge.history_ids(hist[i].titles));
    }
  }
  CHECK(tok.decode(corpora[0][0].prompt.ids) == "silent fantasy garden <sep> fantasy");
  CHECK(tok.decode(corpora[2][1].prompt.slot_ids("attribute")) == "mystery");
}
