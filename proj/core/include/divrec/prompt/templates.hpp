#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "divrec/prompt/tokenizer.hpp"

namespace divrec::prompt {

inline const std::string kNoAttribute = "NONE";

struct TemplateSet {
  int version = 1;
  std::string history_separator = "<sep>";
  std::string attribute;
  std::string gan_with_attribute;
  std::string gan_plain;
  std::string recommendation;

  // The copy shipped in data/templates.toml, compiled in.
  static TemplateSet builtin();
  static TemplateSet from_toml(const std::filesystem::path& path);
};

enum class TemplateKind { kAttribute, kGan, kRecommendation };
enum class Guidance { kAbsent, kYes, kNo };

Guidance guidance_from_probability(double p);

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  bool empty() const { return begin == end; }
};

struct PromptInstance {
  TemplateKind kind = TemplateKind::kGan;
  std::vector<TokenId> ids;
  std::map<std::string, Span> slots;  // placeholder -> token span
  std::optional<int> label;
  int class_id = 0;

  std::vector<std::size_t> positions_of(TokenId id) const;
  // Logits at this position score the next token (the Yes/No answer).
  std::size_t answer_position() const { return ids.size() - 1; }
  std::vector<TokenId> slot_ids(const std::string& name) const;
};

struct RecPromptInput {
  std::vector<std::string> history_titles;
  std::string target_title;
  std::optional<int> label;
};

class PromptForge {
 public:
  PromptForge(TemplateSet templates, const Tokenizer& tokenizer);

  void set_attribute_labels(std::vector<std::string> labels) { attribute_labels_ = std::move(labels); }

  // Keeps the most recent 20 titles.
  PromptInstance render_attribute(const std::vector<std::string>& history_titles,
                                  const std::string& domain) const;
  // label == kNoAttribute renders the plain history.
  PromptInstance render_gan(const std::string& label, const std::vector<std::string>& history_titles) const;
  PromptInstance render_rec(const RecPromptInput& input, Guidance guidance) const;

  // Token ids of the joined history only (the reconstruction target).
  std::vector<TokenId> history_ids(const std::vector<std::string>& titles) const;
  std::string join_history(const std::vector<std::string>& titles) const;

  const Tokenizer& tokenizer() const { return *tok_; }
  const TemplateSet& templates() const { return templates_; }

 private:
  TemplateSet templates_;
  const Tokenizer* tok_;
  std::vector<std::string> attribute_labels_;
};

}  // namespace divrec::prompt
