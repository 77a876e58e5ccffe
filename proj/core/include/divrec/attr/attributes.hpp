#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "divrec/prompt/templates.hpp"

namespace divrec::attr {

inline const std::string kOriginal = "ORIGINAL";

const std::set<std::string>& function_words();

// Scores category terms for a token bag: score(c) = sum over tokens t of
// P(c | t), where P is estimated from how often c and t share a title.
class CooccurrencePredictor {
 public:
  struct Options {
    std::size_t n_categories = 12;    // most frequent content tokens
    std::size_t max_candidates = 3;   // per sample
  };

  static CooccurrencePredictor build(const std::vector<std::string>& titles, Options opts);
  static CooccurrencePredictor build(const std::vector<std::string>& titles) { return build(titles, Options{}); }

  // Best-first; {NONE} when nothing scores above zero.
  std::vector<std::string> predict(const std::vector<std::string>& tokens) const;
  double probability(const std::string& category, const std::string& token) const;

  const std::vector<std::string>& categories() const { return categories_; }

 private:
  Options opts_;
  std::vector<std::string> categories_;
  std::map<std::string, std::map<std::string, double>> cond_;  // token -> category -> P(c|t)
};

struct AttributeSample {
  std::string sample_id;
  prompt::PromptInstance prompt;  // from render_attribute
};

using Predictions = std::map<std::string, std::vector<std::string>>;  // sample -> candidates

Predictions predict_attributes(const std::vector<AttributeSample>& samples, const prompt::Tokenizer& tok,
                               const CooccurrencePredictor& predictor);

// External predictor contract: one JSON object per line, {sample_id, labels:[...]}.
Predictions read_external_predictions(const std::filesystem::path& path);

struct AttributeSet {
  std::vector<std::string> labels;               // k distinct labels, best first
  std::map<std::string, std::size_t> frequency;  // label -> first-choice count (before cut)
  std::map<std::string, std::string> assignment; // sample -> label or ORIGINAL
};

std::set<std::string> read_stoplist(const std::filesystem::path& path);

// Frequency = number of samples whose first non-stoplisted candidate is the
// label. Ranked by frequency desc, label asc.
AttributeSet select_top_k(const Predictions& predictions, std::size_t k, const std::set<std::string>& stoplist);

void save_attributes(const std::filesystem::path& path, const AttributeSet& attrs,
                     const std::string& fingerprint = {});
AttributeSet load_attributes(const std::filesystem::path& path);

struct AugmentedRecord {
  std::string sample_id;
  int class_id = 0;
  prompt::PromptInstance prompt;
  std::vector<prompt::TokenId> target_ids;  // raw history tokens (reconstruction target)
};

struct HistoryText {
  std::string sample_id;
  std::vector<std::string> titles;
};

// corpus 0: plain histories (ORIGINAL); corpus j: histories prefixed with labels[j-1].
std::vector<std::vector<AugmentedRecord>> build_attribute_datasets(const std::vector<HistoryText>& histories,
                                                                   const AttributeSet& attrs,
                                                                   const prompt::PromptForge& forge);

}  // namespace divrec::attr
