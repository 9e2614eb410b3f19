#include "nsvr/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "nsvr/error.hpp"

namespace nsvr {

namespace {

class TomlParser {
 public:
  TomlParser(const std::string& text, std::string source)
      : text_(text), source_(std::move(source)) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = &open_table(root);
      } else {
        const std::string key = parse_key();
        skip_space();
        expect('=');
        skip_space();
        nlohmann::json value = parse_value();
        if (table->contains(key)) error("duplicate key '" + key + "'");
        (*table)[key] = std::move(value);
      }
      end_of_line();
    }
    return root;
  }

 private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kParse, source_ + ":" + std::to_string(line_) + ": " + what);
  }

  void advance() {
    if (text_[pos_] == '\n') ++line_;
    ++pos_;
  }

  void expect(char c) {
    if (peek() != c) error(std::string("expected '") + c + "'");
    advance();
  }

  void skip_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) advance();
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') advance();
  }

  // Whitespace, newlines and comments, as allowed inside arrays.
  void skip_all() {
    while (!eof()) {
      if (std::isspace(static_cast<unsigned char>(peek()))) {
        advance();
      } else if (peek() == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }

  void skip_blank_lines() { skip_all(); }

  void end_of_line() {
    skip_space();
    skip_comment();
    if (peek() == '\r') advance();
    if (!eof() && peek() != '\n') error("unexpected trailing characters");
  }

  std::string parse_key() {
    skip_space();
    if (peek() == '"') return parse_string();
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-')) {
      key += peek();
      advance();
    }
    if (key.empty()) error("expected a key");
    return key;
  }

  nlohmann::json& open_table(nlohmann::json& root) {
    expect('[');
    const bool array = peek() == '[';
    if (array) advance();
    std::vector<std::string> path;
    while (true) {
      path.push_back(parse_key());
      skip_space();
      if (peek() == '.') {
        advance();
        continue;
      }
      break;
    }
    expect(']');
    if (array) expect(']');
    if (!array) {
      std::string name = path[0];
      for (std::size_t i = 1; i < path.size(); ++i) name += "." + path[i];
      if (!defined_.insert(name).second) error("table [" + name + "] is defined twice");
    }

    nlohmann::json* node = &root;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      nlohmann::json& next = (*node)[path[i]];
      if (next.is_null()) next = nlohmann::json::object();
      // A dotted path through an array of tables refers to its last element.
      node = next.is_array() ? &next.back() : &next;
      if (!node->is_object()) error("'" + path[i] + "' is not a table");
    }
    nlohmann::json& leaf = (*node)[path.back()];
    if (array) {
      if (leaf.is_null()) leaf = nlohmann::json::array();
      if (!leaf.is_array()) error("'" + path.back() + "' is not an array of tables");
      leaf.push_back(nlohmann::json::object());
      return leaf.back();
    }
    if (leaf.is_null()) leaf = nlohmann::json::object();
    if (!leaf.is_object()) error("'" + path.back() + "' is not a table");
    return leaf;
  }

  std::string parse_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') error("unterminated string");
      const char c = peek();
      advance();
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      const char e = peek();
      advance();
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: error(std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }

  nlohmann::json parse_value() {
    const char c = peek();
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    std::string token;
    while (!eof() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' &&
           peek() != ']' && peek() != '#') {
      token += peek();
      advance();
    }
    if (token.empty()) error("expected a value");
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char ch : token)
      if (ch != '_') digits += ch;
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(digits, &used);
        if (used == digits.size()) return v;
      } else {
        const long long v = std::stoll(digits, &used);
        if (used == digits.size()) return v;
      }
    } catch (const std::exception&) {
    }
    error("cannot parse value '" + token + "'");
  }

  nlohmann::json parse_array() {
    expect('[');
    nlohmann::json out = nlohmann::json::array();
    while (true) {
      skip_all();
      if (peek() == ']') {
        advance();
        break;
      }
      out.push_back(parse_value());
      skip_all();
      if (peek() == ',') {
        advance();
        continue;
      }
      skip_all();
      expect(']');
      break;
    }
    return out;
  }

  const std::string& text_;
  std::string source_;
  std::set<std::string> defined_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

nlohmann::json parse_toml(const std::string& text, const std::string& source) {
  return TomlParser(text, source).parse();
}

nlohmann::json read_toml_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str(), path);
}

}  // namespace nsvr
