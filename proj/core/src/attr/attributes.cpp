#include "divrec/attr/attributes.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>

#include "divrec/errors.hpp"

namespace divrec::attr {

const std::set<std::string>& function_words() {
  static const std::set<std::string> words = {
      "a",    "an",   "and",  "are",  "as",   "at",   "be",    "but",  "by",      "for",    "from",
      "has",  "have", "he",   "her",  "his",  "how",  "i",     "in",   "into",    "is",     "it",
      "its",  "my",   "new",  "no",   "not",  "of",   "on",    "one",  "or",      "our",    "out",
      "she",  "so",   "that", "the",  "their", "them", "there", "they", "this",   "to",     "up",
      "vol",  "volume", "was", "we",  "what", "when", "who",   "why",  "will",    "with",   "you",
      "your", "edition", "book", "books", "series", "set", "pack", "part", "all", "more", "most"};
  return words;
}

namespace {

bool is_content(const std::string& t) {
  if (t.size() < 2 || function_words().count(t)) return false;
  if (t.front() == '<') return false;
  return std::any_of(t.begin(), t.end(), [](unsigned char c) { return std::isalpha(c) || c >= 0x80; });
}

}  // namespace

CooccurrencePredictor CooccurrencePredictor::build(const std::vector<std::string>& titles, Options opts) {
  CooccurrencePredictor p;
  p.opts_ = opts;
  std::vector<std::set<std::string>> bags;
  std::map<std::string, std::size_t> freq;
  for (const auto& title : titles) {
    std::set<std::string> bag;
    for (auto& t : prompt::split_tokens(title)) {
      if (is_content(t)) bag.insert(t);
    }
    for (const auto& t : bag) ++freq[t];
    bags.push_back(std::move(bag));
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < ranked.size() && i < opts.n_categories; ++i) p.categories_.push_back(ranked[i].first);
  if (p.categories_.empty()) throw PredictorError("attribute predictor has an empty vocabulary");

  const std::set<std::string> cats(p.categories_.begin(), p.categories_.end());
  std::map<std::string, std::map<std::string, std::size_t>> joint;
  for (const auto& bag : bags) {
    for (const auto& t : bag) {
      for (const auto& c : bag) {
        if (cats.count(c)) ++joint[t][c];
      }
    }
  }
  for (const auto& [t, row] : joint) {
    for (const auto& [c, n] : row) p.cond_[t][c] = static_cast<double>(n) / static_cast<double>(freq.at(t));
  }
  return p;
}

double CooccurrencePredictor::probability(const std::string& category, const std::string& token) const {
  auto it = cond_.find(token);
  if (it == cond_.end()) return 0.0;
  auto jt = it->second.find(category);
  return jt == it->second.end() ? 0.0 : jt->second;
}

std::vector<std::string> CooccurrencePredictor::predict(const std::vector<std::string>& tokens) const {
  std::map<std::string, double> score;
  for (const auto& t : tokens) {
    auto it = cond_.find(t);
    if (it == cond_.end()) continue;
    for (const auto& [c, p] : it->second) score[c] += p;
  }
  std::vector<std::pair<std::string, double>> ranked(score.begin(), score.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (const auto& [c, s] : ranked) {
    if (s <= 0.0 || out.size() >= opts_.max_candidates) break;
    out.push_back(c);
  }
  if (out.empty()) out.push_back(prompt::kNoAttribute);
  return out;
}

Predictions predict_attributes(const std::vector<AttributeSample>& samples, const prompt::Tokenizer& tok,
                               const CooccurrencePredictor& predictor) {
  Predictions out;
  for (const auto& s : samples) {
    if (s.prompt.kind != prompt::TemplateKind::kAttribute || !s.prompt.slots.count("history")) {
      throw ContractError("sample " + s.sample_id + " was not rendered with the attribute template");
    }
    std::vector<std::string> tokens;
    for (auto id : s.prompt.slot_ids("history")) {
      if (id >= prompt::kNumReserved) tokens.push_back(tok.token_of(id));
    }
    out[s.sample_id] = predictor.predict(tokens);
  }
  return out;
}

Predictions read_external_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read external predictions " + path.string());
  Predictions out;
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto labels = j.at("labels").get<std::vector<std::string>>();
      if (labels.empty()) labels.push_back(prompt::kNoAttribute);
      out[j.at("sample_id").get<std::string>()] = std::move(labels);
    } catch (const nlohmann::json::exception& e) {
      throw PredictorError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::set<std::string> read_stoplist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read stoplist " + path.string());
  std::set<std::string> out;
  for (std::string line; std::getline(in, line);) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.insert(line.substr(b, e - b + 1));
  }
  return out;
}

AttributeSet select_top_k(const Predictions& predictions, std::size_t k, const std::set<std::string>& stoplist) {
  if (k == 0) throw ContractError("select_top_k needs k >= 1");
  auto usable = [&](const std::string& l) {
    return l != prompt::kNoAttribute && l != kOriginal && !stoplist.count(l);
  };
  AttributeSet set;
  for (const auto& [sample, cands] : predictions) {
    for (const auto& c : cands) {
      if (usable(c)) {
        ++set.frequency[c];
        break;
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(set.frequency.begin(), set.frequency.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() < k) {
    throw AttributeError("only " + std::to_string(ranked.size()) + " attribute labels survive curation, need " +
                         std::to_string(k));
  }
  for (std::size_t i = 0; i < k; ++i) set.labels.push_back(ranked[i].first);
  const std::set<std::string> kept(set.labels.begin(), set.labels.end());
  for (const auto& [sample, cands] : predictions) {
    std::string label = kOriginal;
    for (const auto& c : cands) {
      if (usable(c) && kept.count(c)) {
        label = c;
        break;
      }
    }
    set.assignment[sample] = label;
  }
  return set;
}

void save_attributes(const std::filesystem::path& path, const AttributeSet& attrs, const std::string& fingerprint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::ordered_json j;
  if (!fingerprint.empty()) j["fingerprint"] = fingerprint;
  j["labels"] = attrs.labels;
  j["frequency"] = attrs.frequency;
  j["assignment"] = attrs.assignment;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

AttributeSet load_attributes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read attributes " + path.string());
  try {
    auto j = nlohmann::json::parse(in);
    AttributeSet set;
    j.at("labels").get_to(set.labels);
    j.at("frequency").get_to(set.frequency);
    j.at("assignment").get_to(set.assignment);
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed attributes file " + path.string() + ": " + e.what());
  }
}

std::vector<std::vector<AugmentedRecord>> build_attribute_datasets(const std::vector<HistoryText>& histories,
                                                                   const AttributeSet& attrs,
                                                                   const prompt::PromptForge& forge) {
  prompt::PromptForge local = forge;
  local.set_attribute_labels(attrs.labels);
  std::vector<std::vector<AugmentedRecord>> corpora(attrs.labels.size() + 1);
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    const std::string& label = c == 0 ? prompt::kNoAttribute : attrs.labels[c - 1];
    corpora[c].reserve(histories.size());
    for (const auto& h : histories) {
      AugmentedRecord r;
      r.sample_id = h.sample_id;
      r.class_id = static_cast<int>(c);
      r.prompt = local.render_gan(label, h.titles);
      r.prompt.class_id = r.class_id;
      r.target_ids = local.history_ids(h.titles);
      corpora[c].push_back(std::move(r));
    }
  }
  return corpora;
}

}  // namespace divrec::attr
