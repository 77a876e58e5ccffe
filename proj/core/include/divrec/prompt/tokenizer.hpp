#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace divrec::prompt {

using TokenId = std::int32_t;

// Reserved ids are fixed; the literal spellings below are recognised in any
// text passed to encode().
enum Reserved : TokenId {
  kPad = 0,
  kUnk = 1,
  kMask = 2,
  kYes = 3,
  kNo = 4,
  kUserId = 5,
  kTargetId = 6,
  kGuide = 7,
  kEos = 8,
  kSep = 9,
  kNumReserved = 10,
};

const std::vector<std::string>& reserved_literals();

// Lowercased words and single punctuation characters; reserved literals such
// as "<mask>" stay whole.
std::vector<std::string> split_tokens(std::string_view text);

class Tokenizer {
 public:
  Tokenizer();

  // Ranks corpus tokens by (frequency desc, token asc) and keeps at most
  // max_vocab entries including the reserved ones.
  static Tokenizer build(const std::vector<std::string>& corpus, std::size_t max_vocab = 4096);

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(const std::vector<TokenId>& ids, bool skip_special = false) const;

  TokenId id_of(const std::string& token) const;  // UNK when absent
  const std::string& token_of(TokenId id) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  std::size_t size() const { return tokens_.size(); }

  void save(const std::filesystem::path& path) const;
  static Tokenizer load(const std::filesystem::path& path);

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace divrec::prompt
