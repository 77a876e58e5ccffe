#include <cstdlib>
#include <filesystem>

#include "divrec/errors.hpp"
#include "divrec/prompt/templates.hpp"
#include "divrec/prompt/tokenizer.hpp"
#include "divrec/util/toml.hpp"
#include "doctest.h"

using namespace divrec;
using namespace divrec::prompt;

namespace {

std::filesystem::path source_dir() {
  const char* env = std::getenv("DIVREC_SOURCE_DIR");
  return env ? env : ".";
}

Tokenizer toy_tokenizer() {
  return Tokenizer::build({"Lego Castle", "The silent fantasy garden", "toys books fantasy mystery",
                           "items category user bought prefers in the candidate will like it answer : . ?"});
}

}  // namespace

TEST_CASE("toml subset") {
  auto j = util::parse_toml(R"(
# comment
name = "x" # trailing
lit = 'C:\path'
n = 1_000
neg = -3
f = 2.5e-1
yes = true
arr = [1, 2,
       3, ] # multi-line
strs = ["a", "b"]
text = """
line one
line two"""

[gan]
alpha = 0.5
[gan.inner]
"quoted key" = "v\t1"
)");
  CHECK(j["name"] == "x");
  CHECK(j["lit"] == "C:\\path");
  CHECK(j["n"] == 1000);
  CHECK(j["neg"] == -3);
  CHECK(j["f"].get<double>() == doctest::Approx(0.25));
  CHECK(j["yes"] == true);
  CHECK(j["arr"].size() == 3);
  CHECK(j["strs"][1] == "b");
  CHECK(j["text"] == "line one\nline two");
  CHECK(j["gan"]["alpha"].get<double>() == 0.5);
  CHECK(j["gan"]["inner"]["quoted key"] == "v\t1");
  CHECK(j["n"].is_number_integer());

  CHECK_THROWS_AS(util::parse_toml("a = 1\na = 2"), ConfigError);
  CHECK_THROWS_AS(util::parse_toml("a = {b = 1}"), ConfigError);
  CHECK_THROWS_AS(util::parse_toml("a = 1 2"), ConfigError);
  CHECK_THROWS_AS(util::parse_toml("a = \"open"), ConfigError);
  CHECK_THROWS_AS(util::parse_toml("[[x]]"), ConfigError);
  CHECK_THROWS_AS(util::load_toml("/nonexistent.toml"), ConfigError);
}

TEST_CASE("tokenizer basics") {
  Tokenizer tok = toy_tokenizer();
  CHECK(tok.encode("").empty());
  CHECK(split_tokens("Hello, World!") == std::vector<std::string>{"hello", ",", "world", "!"});
  CHECK(split_tokens("a<MASK>b") == std::vector<std::string>{"a", "<mask>", "b"});
  CHECK(tok.encode("zzzunknown") == std::vector<TokenId>{kUnk});
  CHECK(tok.encode("<userid> <yes> <no>") == std::vector<TokenId>{kUserId, kYes, kNo});
  const std::string text = "the silent fantasy garden";
  CHECK(tok.decode(tok.encode(text)) == text);
  CHECK(tok.decode(tok.encode("  The   SILENT fantasy\tgarden ")) == text);
}

TEST_CASE("tokenizer ranks by frequency then token and caps the vocabulary") {
  Tokenizer tok = Tokenizer::build({"b a c", "b a", "b"}, kNumReserved + 2);
  CHECK(tok.size() == kNumReserved + 2);
  CHECK(tok.id_of("b") == kNumReserved);
  CHECK(tok.id_of("a") == kNumReserved + 1);
  CHECK(tok.id_of("c") == kUnk);
  Tokenizer tie = Tokenizer::build({"y x"});
  CHECK(tie.id_of("x") < tie.id_of("y"));
}

TEST_CASE("reserved ids are stable and vocab.json round-trips") {
  Tokenizer tok = toy_tokenizer();
  for (std::size_t i = 0; i < kNumReserved; ++i) CHECK(tok.id_of(reserved_literals()[i]) == static_cast<TokenId>(i));
  const auto path = std::filesystem::temp_directory_path() / "divrec_vocab.json";
  tok.save(path);
  Tokenizer back = Tokenizer::load(path);
  REQUIRE(back.size() == tok.size());
  for (std::size_t i = 0; i < tok.size(); ++i) CHECK(back.token_of(static_cast<TokenId>(i)) == tok.token_of(static_cast<TokenId>(i)));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(tok.token_of(static_cast<TokenId>(tok.size())), IndexError);
}

TEST_CASE("shipped templates file matches the compiled-in copy") {
  auto file = TemplateSet::from_toml(source_dir() / "data" / "templates.toml");
  auto builtin = TemplateSet::builtin();
  CHECK(file.version == builtin.version);
  CHECK(file.attribute == builtin.attribute);
  CHECK(file.gan_with_attribute == builtin.gan_with_attribute);
  CHECK(file.gan_plain == builtin.gan_plain);
  CHECK(file.recommendation == builtin.recommendation);
  CHECK(file.history_separator == builtin.history_separator);
}

TEST_CASE("broken templates are rejected") {
  Tokenizer tok = toy_tokenizer();
  auto t = TemplateSet::builtin();
  t.recommendation = "user <userid> <userid> {history} {target} <targetid> <guide> {guidance} answer";
  CHECK_THROWS_AS(PromptForge(t, tok), TemplateError);
  t = TemplateSet::builtin();
  t.recommendation = "user <userid> {history} <targetid> {target} <guide> {guidance}";
  CHECK_THROWS_AS(PromptForge(t, tok), TemplateError);
  t = TemplateSet::builtin();
  t.gan_plain = "{history} {bogus}";
  CHECK_THROWS_AS(PromptForge(t, tok), TemplateError);
  t = TemplateSet::builtin();
  t.attribute = "{domain} {history}";
  CHECK_THROWS_AS(PromptForge(t, tok), TemplateError);
}

TEST_CASE("attribute prompt") {
  Tokenizer tok = toy_tokenizer();
  PromptForge forge(TemplateSet::builtin(), tok);
  auto inst = forge.render_attribute({"Lego Castle"}, "Toys");
  CHECK(inst.positions_of(kMask).size() == 1);
  CHECK(tok.decode(inst.slot_ids("domain")) == "toys");
  CHECK_THROWS_AS(forge.render_attribute({}, "Toys"), TemplateError);

  std::vector<std::string> titles;
  for (int i = 0; i < 21; ++i) titles.push_back("t" + std::to_string(i));
  auto capped = forge.render_attribute(titles, "Books");
  // 20 titles joined by 19 separators.
  CHECK(capped.slot_ids("history").size() == 39);
  CHECK(capped.positions_of(kSep).size() == 19);
}

TEST_CASE("gan prompt") {
  Tokenizer tok = toy_tokenizer();
  PromptForge forge(TemplateSet::builtin(), tok);
  forge.set_attribute_labels({"fantasy", "mystery"});
  const std::vector<std::string> hist = {"The silent fantasy garden", "Lego Castle"};
  auto plain = forge.render_gan(kNoAttribute, hist);
  CHECK(plain.ids == forge.history_ids(hist));
  CHECK(tok.decode(plain.ids) == "the silent fantasy garden <sep> lego castle");

  auto with = forge.render_gan("fantasy", hist);
  CHECK(with.slots.at("attribute").end <= with.slots.at("history").begin);
  CHECK(tok.decode(with.slot_ids("attribute")) == "fantasy");
  CHECK(with.ids == forge.render_gan("fantasy", hist).ids);
  CHECK_THROWS_AS(forge.render_gan("romance", hist), TemplateError);
}

TEST_CASE("recommendation prompt") {
  Tokenizer tok = toy_tokenizer();
  PromptForge forge(TemplateSet::builtin(), tok);
  RecPromptInput in{{"Lego Castle", "the <userid> fantasy garden"}, "The silent fantasy garden", 1};
  auto yes = forge.render_rec(in, Guidance::kYes);
  CHECK(yes.positions_of(kUserId).size() == 1);
  CHECK(yes.positions_of(kTargetId).size() == 1);
  CHECK(yes.positions_of(kGuide).size() == 1);
  CHECK(yes.slot_ids("guidance") == std::vector<TokenId>{kYes});
  CHECK(forge.render_rec(in, Guidance::kNo).slot_ids("guidance") == std::vector<TokenId>{kNo});
  auto absent = forge.render_rec(in, Guidance::kAbsent);
  CHECK(absent.slots.at("guidance").empty());
  CHECK(absent.ids.size() + 1 == yes.ids.size());
  CHECK(yes.label == 1);
  CHECK(yes.answer_position() == yes.ids.size() - 1);
  CHECK(tok.token_of(yes.ids.back()) == ":");
  CHECK(guidance_from_probability(0.5) == Guidance::kYes);
  CHECK(guidance_from_probability(0.49) == Guidance::kNo);
  in.target_title.clear();
  CHECK_THROWS_AS(forge.render_rec(in, Guidance::kYes), TemplateError);
}
