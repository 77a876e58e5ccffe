#include "divrec/prompt/templates.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "divrec/errors.hpp"
#include "divrec/util/toml.hpp"

namespace divrec::prompt {

namespace {

constexpr std::size_t kMaxAttributeTitles = 20;

struct Segment {
  bool placeholder = false;
  std::string text;
};

std::vector<Segment> parse_template(const std::string& text) {
  std::vector<Segment> out;
  std::string lit;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{') {
      const auto close = text.find('}', i);
      if (close == std::string::npos) throw TemplateError("unterminated placeholder in template: " + text);
      if (!lit.empty()) out.push_back({false, std::exchange(lit, {})});
      out.push_back({true, text.substr(i + 1, close - i - 1)});
      i = close;
    } else {
      lit += text[i];
    }
  }
  if (!lit.empty()) out.push_back({false, lit});
  return out;
}

void validate(const std::string& name, const std::string& text, const std::set<std::string>& required,
              const std::map<std::string, std::size_t>& literal_counts) {
  if (text.empty()) throw TemplateError("template '" + name + "' is empty");
  std::set<std::string> seen;
  std::map<std::string, std::size_t> counts;
  for (const auto& seg : parse_template(text)) {
    if (seg.placeholder) {
      if (!required.count(seg.text)) throw TemplateError("template '" + name + "' has unknown placeholder {" + seg.text + "}");
      if (!seen.insert(seg.text).second) throw TemplateError("template '" + name + "' repeats {" + seg.text + "}");
    } else {
      for (const auto& t : split_tokens(seg.text)) ++counts[t];
    }
  }
  for (const auto& r : required) {
    if (!seen.count(r)) throw TemplateError("template '" + name + "' is missing {" + r + "}");
  }
  for (const auto& [lit, n] : literal_counts) {
    if (counts[lit] != n) {
      throw TemplateError("template '" + name + "' must contain " + lit + " exactly " + std::to_string(n) + " time(s)");
    }
  }
}

void validate_all(const TemplateSet& t) {
  validate("attribute", t.attribute, {"domain", "history"}, {{"<mask>", 1}});
  validate("gan.with_attribute", t.gan_with_attribute, {"attribute", "history"}, {});
  validate("gan.plain", t.gan_plain, {"history"}, {});
  validate("recommendation", t.recommendation, {"history", "target", "guidance"},
           {{"<userid>", 1}, {"<targetid>", 1}, {"<guide>", 1}});
  const auto segs = parse_template(t.recommendation);
  if (segs.back().placeholder || split_tokens(segs.back().text).empty()) {
    throw TemplateError("recommendation template must end with literal text before the answer");
  }
}

std::string get_string(const nlohmann::json& j, const char* table, const char* key) {
  if (!j.contains(table) || !j.at(table).contains(key) || !j.at(table).at(key).is_string()) {
    throw TemplateError(std::string("templates file lacks string ") + table + "." + key);
  }
  return j.at(table).at(key).get<std::string>();
}

}  // namespace

TemplateSet TemplateSet::builtin() {
  TemplateSet t;
  t.version = 1;
  t.history_separator = "<sep>";
  t.attribute = "in the {domain} category the user bought : {history} . the user prefers <mask> items .";
  t.gan_with_attribute = "{attribute} items : {history}";
  t.gan_plain = "{history}";
  t.recommendation =
      "user <userid> bought : {history} . candidate <targetid> : {target} . <guide> {guidance} . "
      "will the user like it ? answer :";
  return t;
}

TemplateSet TemplateSet::from_toml(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = util::load_toml(path);
  } catch (const ConfigError& e) {
    throw TemplateError(e.what());
  }
  TemplateSet t;
  t.version = j.value("version", 1);
  t.history_separator = j.value("history_separator", std::string("<sep>"));
  t.attribute = get_string(j, "attribute", "text");
  t.gan_with_attribute = get_string(j, "gan", "with_attribute");
  t.gan_plain = get_string(j, "gan", "plain");
  t.recommendation = get_string(j, "recommendation", "text");
  validate_all(t);
  return t;
}

Guidance guidance_from_probability(double p) { return p >= 0.5 ? Guidance::kYes : Guidance::kNo; }

std::vector<std::size_t> PromptInstance::positions_of(TokenId id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) out.push_back(i);
  }
  return out;
}

std::vector<TokenId> PromptInstance::slot_ids(const std::string& name) const {
  const auto& s = slots.at(name);
  return {ids.begin() + static_cast<long>(s.begin), ids.begin() + static_cast<long>(s.end)};
}

PromptForge::PromptForge(TemplateSet templates, const Tokenizer& tokenizer)
    : templates_(std::move(templates)), tok_(&tokenizer) {
  validate_all(templates_);
}

namespace {

// User-supplied text never produces reserved tokens.
std::vector<TokenId> encode_value(const Tokenizer& tok, const std::string& text) {
  auto ids = tok.encode(text);
  for (auto& id : ids) {
    if (id < kNumReserved) id = kUnk;
  }
  return ids;
}

}  // namespace

std::vector<TokenId> PromptForge::history_ids(const std::vector<std::string>& titles) const {
  const auto sep = tok_->encode(templates_.history_separator);
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (i > 0) out.insert(out.end(), sep.begin(), sep.end());
    auto t = encode_value(*tok_, titles[i]);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::string PromptForge::join_history(const std::vector<std::string>& titles) const {
  std::string out;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (i > 0) out += " " + templates_.history_separator + " ";
    out += titles[i];
  }
  return out;
}

namespace {

PromptInstance assemble(TemplateKind kind, const std::string& text, const Tokenizer& tok,
                        const std::map<std::string, std::vector<TokenId>>& values) {
  PromptInstance inst;
  inst.kind = kind;
  for (const auto& seg : parse_template(text)) {
    if (seg.placeholder) {
      const auto& v = values.at(seg.text);
      Span s{inst.ids.size(), inst.ids.size() + v.size()};
      inst.ids.insert(inst.ids.end(), v.begin(), v.end());
      inst.slots[seg.text] = s;
    } else {
      auto ids = tok.encode(seg.text);
      inst.ids.insert(inst.ids.end(), ids.begin(), ids.end());
    }
  }
  return inst;
}

}  // namespace

PromptInstance PromptForge::render_attribute(const std::vector<std::string>& history_titles,
                                             const std::string& domain) const {
  if (history_titles.empty()) throw TemplateError("attribute prompt needs at least one title");
  const auto first = history_titles.size() > kMaxAttributeTitles ? history_titles.end() - kMaxAttributeTitles
                                                                  : history_titles.begin();
  std::vector<std::string> recent(first, history_titles.end());
  return assemble(TemplateKind::kAttribute, templates_.attribute, *tok_,
                  {{"domain", encode_value(*tok_, domain)}, {"history", history_ids(recent)}});
}

PromptInstance PromptForge::render_gan(const std::string& label,
                                       const std::vector<std::string>& history_titles) const {
  if (label == kNoAttribute) {
    return assemble(TemplateKind::kGan, templates_.gan_plain, *tok_, {{"history", history_ids(history_titles)}});
  }
  if (std::find(attribute_labels_.begin(), attribute_labels_.end(), label) == attribute_labels_.end()) {
    throw TemplateError("unknown attribute label '" + label + "'");
  }
  return assemble(TemplateKind::kGan, templates_.gan_with_attribute, *tok_,
                  {{"attribute", encode_value(*tok_, label)}, {"history", history_ids(history_titles)}});
}

PromptInstance PromptForge::render_rec(const RecPromptInput& input, Guidance guidance) const {
  if (input.target_title.empty()) throw TemplateError("recommendation prompt is missing the target title");
  std::vector<TokenId> g;
  if (guidance == Guidance::kYes) g = {kYes};
  if (guidance == Guidance::kNo) g = {kNo};
  auto inst = assemble(TemplateKind::kRecommendation, templates_.recommendation, *tok_,
                       {{"history", history_ids(input.history_titles)},
                        {"target", encode_value(*tok_, input.target_title)},
                        {"guidance", g}});
  inst.label = input.label;
  return inst;
}

}  // namespace divrec::prompt
