#include "divrec/prompt/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "divrec/errors.hpp"

namespace divrec::prompt {

const std::vector<std::string>& reserved_literals() {
  static const std::vector<std::string> lits = {"<pad>",      "<unk>",   "<mask>", "<yes>", "<no>",
                                                "<userid>",   "<targetid>", "<guide>", "<eos>", "<sep>"};
  return lits;
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '<') {
      bool matched = false;
      for (const auto& lit : reserved_literals()) {
        if (text.size() - i >= lit.size()) {
          bool eq = true;
          for (std::size_t k = 0; k < lit.size() && eq; ++k) {
            eq = std::tolower(static_cast<unsigned char>(text[i + k])) == lit[k];
          }
          if (eq) {
            flush();
            out.push_back(lit);
            i += lit.size();
            matched = true;
            break;
          }
        }
      }
      if (matched) continue;
    }
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c) || c >= 0x80) {
      word += static_cast<char>(std::tolower(c));
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
    ++i;
  }
  flush();
  return out;
}

Tokenizer::Tokenizer() {
  for (const auto& lit : reserved_literals()) add(lit);
}

void Tokenizer::add(const std::string& token) {
  if (index_.count(token)) return;
  index_[token] = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus, std::size_t max_vocab) {
  Tokenizer tok;
  std::map<std::string, std::size_t> freq;
  for (const auto& text : corpus) {
    for (auto& t : split_tokens(text)) {
      if (!tok.index_.count(t)) ++freq[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [t, n] : ranked) {
    if (tok.size() >= max_vocab) break;
    tok.add(t);
  }
  return tok;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& t : split_tokens(text)) ids.push_back(id_of(t));
  return ids;
}

std::string Tokenizer::decode(const std::vector<TokenId>& ids, bool skip_special) const {
  std::string out;
  for (auto id : ids) {
    if (skip_special && id < kNumReserved) continue;
    if (!out.empty()) out += ' ';
    out += token_of(id);
  }
  return out;
}

TokenId Tokenizer::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Tokenizer::token_of(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Tokenizer::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::ordered_json map = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) map[tokens_[i]] = i;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << nlohmann::ordered_json{{"version", 1}, {"token_to_id", map}}.dump(1) << '\n';
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed vocabulary " + path.string() + ": " + e.what());
  }
  const auto& map = j.at("token_to_id");
  std::vector<std::string> tokens(map.size());
  for (auto it = map.begin(); it != map.end(); ++it) {
    const auto id = it.value().get<std::size_t>();
    if (id >= tokens.size() || !tokens[id].empty()) throw IoError("vocabulary ids are not dense in " + path.string());
    tokens[id] = it.key();
  }
  Tokenizer tok;
  for (std::size_t i = 0; i < kNumReserved; ++i) {
    if (i >= tokens.size() || tokens[i] != reserved_literals()[i]) {
      throw IoError("vocabulary " + path.string() + " has a different reserved token at id " + std::to_string(i));
    }
  }
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) tok.add(tokens[i]);
  return tok;
}

}  // namespace divrec::prompt
