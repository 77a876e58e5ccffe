#include "divrec/util/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "divrec/errors.hpp"

namespace divrec::util {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  nlohmann::json run() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = &open_table(root);
      } else {
        const std::string key = parse_key();
        skip_ws();
        expect('=');
        skip_ws();
        nlohmann::json value = parse_value();
        if (table->contains(key)) fail("duplicate key '" + key + "'");
        (*table)[key] = std::move(value);
      }
      end_of_line();
    }
    return root;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("toml line " + std::to_string(line_) + ": " + msg);
  }
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  char get() {
    if (eof()) fail("unexpected end of input");
    char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }
  void skip_ws() {
    while (peek() == ' ' || peek() == '\t') get();
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') get();
    }
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') get();
      if (peek() == '\n') {
        get();
      } else {
        break;
      }
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') get();
    if (eof()) return;
    if (peek() != '\n') fail("trailing characters after value");
    get();
  }
  // Skips whitespace, newlines and comments inside arrays.
  void skip_array_space() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
      } else {
        break;
      }
    }
  }

  std::string parse_key() {
    if (peek() == '"' ) {
      get();
      return parse_basic_string_body();
    }
    if (peek() == '\'') {
      get();
      return parse_literal_string_body();
    }
    std::string key;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-') key += get();
    if (key.empty()) fail("expected key");
    return key;
  }

  nlohmann::json& open_table(nlohmann::json& root) {
    get();
    if (peek() == '[') fail("arrays of tables are not supported");
    nlohmann::json* t = &root;
    while (true) {
      skip_ws();
      std::string part = parse_key();
      skip_ws();
      auto& next = (*t)[part];
      if (next.is_null()) next = nlohmann::json::object();
      if (!next.is_object()) fail("'" + part + "' is not a table");
      t = &next;
      if (peek() == '.') {
        get();
        continue;
      }
      expect(']');
      return *t;
    }
  }

  std::string parse_basic_string_body() {
    std::string out;
    while (true) {
      char c = get();
      if (c == '"') return out;
      if (c == '\n') fail("newline in string");
      if (c == '\\') out += escape();
      else out += c;
    }
  }

  char escape() {
    char e = get();
    switch (e) {
      case 'n': return '\n';
      case 't': return '\t';
      case 'r': return '\r';
      case '"': return '"';
      case '\\': return '\\';
      default: fail(std::string("unsupported escape \\") + e);
    }
  }

  std::string parse_literal_string_body() {
    std::string out;
    while (true) {
      char c = get();
      if (c == '\'') return out;
      if (c == '\n') fail("newline in string");
      out += c;
    }
  }

  std::string parse_multiline_basic() {
    if (peek() == '\n') get();
    std::string out;
    while (true) {
      if (s_.substr(pos_, 3) == "\"\"\"") {
        pos_ += 3;
        return out;
      }
      char c = get();
      if (c == '\\') {
        if (peek() == '\n' || peek() == ' ' || peek() == '\r') {
          while (std::isspace(static_cast<unsigned char>(peek()))) get();
        } else {
          out += escape();
        }
      } else {
        out += c;
      }
    }
  }

  nlohmann::json parse_value() {
    const char c = peek();
    if (c == '"') {
      if (s_.substr(pos_, 3) == "\"\"\"") {
        pos_ += 3;
        return parse_multiline_basic();
      }
      get();
      return parse_basic_string_body();
    }
    if (c == '\'') {
      get();
      return parse_literal_string_body();
    }
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    return parse_scalar();
  }

  nlohmann::json parse_array() {
    get();
    nlohmann::json arr = nlohmann::json::array();
    while (true) {
      skip_array_space();
      if (peek() == ']') {
        get();
        return arr;
      }
      arr.push_back(parse_value());
      skip_array_space();
      if (peek() == ',') {
        get();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  nlohmann::json parse_scalar() {
    std::string tok;
    while (!eof() && peek() != ',' && peek() != ']' && peek() != '#' && peek() != '\n' && peek() != '\r' &&
           peek() != ' ' && peek() != '\t') {
      tok += get();
    }
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok.empty()) fail("missing value");
    std::string clean;
    for (char ch : tok) {
      if (ch != '_') clean += ch;
    }
    const bool is_float = clean.find_first_of(".eE") != std::string::npos || clean == "inf" ||
                          clean == "+inf" || clean == "-inf" || clean == "nan";
    try {
      std::size_t used = 0;
      if (is_float) {
        double v = std::stod(clean, &used);
        if (used == clean.size()) return v;
      } else {
        long long v = std::stoll(clean, &used, 10);
        if (used == clean.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + tok + "'");
  }
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return Parser(text).run(); }

nlohmann::json load_toml(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_toml(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace divrec::util
