#pragma once

// Reader for the subset of TOML used by scenario files:
//   comments, [table], [a.b], [[array.of.tables]], key = value, dotted and
//   quoted keys, basic strings, literal strings, integers, floats (incl. inf,
//   nan, exponents, underscores), booleans, arrays (may span lines) and
//   inline tables. Dates, multi-line strings and table redefinition rules
//   beyond duplicate keys are not supported.
// The result is a nlohmann::json object plus the source line of every key.

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypreg/error.hpp"

namespace hypreg::io {

class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::string field = {}, int line = 0)
      : Error(compose(what, field, line)), field_(std::move(field)), line_(line) {}
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  static std::string compose(const std::string& what, const std::string& field, int line) {
    std::string s;
    if (line > 0) s += "line " + std::to_string(line) + ": ";
    if (!field.empty()) s += field + ": ";
    return s + what;
  }
  std::string field_;
  int line_;
};

/// Parsed document: the data and "dotted.path" -> line of definition.
struct Document {
  nlohmann::json data = nlohmann::json::object();
  std::map<std::string, int> lines;

  int line_of(const std::string& path) const {
    auto it = lines.find(path);
    return it == lines.end() ? 0 : it->second;
  }
};

namespace detail {

class TomlParser {
 public:
  explicit TomlParser(std::string text) : s_(std::move(text)) {}

  Document parse() {
    Document doc;
    std::vector<std::string> table;  // current table path
    nlohmann::json* cur = &doc.data;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      const int line = line_;
      if (peek() == '[') {
        const bool array = peek(1) == '[';
        pos_ += array ? 2 : 1;
        skip_inline_ws();
        table = parse_key_path();
        skip_inline_ws();
        expect(']');
        if (array) expect(']');
        end_of_line();
        cur = &doc.data;
        std::string path;
        for (std::size_t i = 0; i < table.size(); ++i) {
          path += (i ? "." : "") + table[i];
          auto& next = (*cur)[table[i]];
          const bool last = i + 1 == table.size();
          if (last && array) {
            if (next.is_null()) next = nlohmann::json::array();
            if (!next.is_array()) fail("'" + path + "' is not an array of tables", line);
            next.push_back(nlohmann::json::object());
            path += "[" + std::to_string(next.size() - 1) + "]";
            cur = &next.back();
          } else {
            if (next.is_null()) next = nlohmann::json::object();
            if (next.is_array() && !next.empty() && next.back().is_object()) {
              path += "[" + std::to_string(next.size() - 1) + "]";
              cur = &next.back();
            } else if (next.is_object()) {
              cur = &next;
            } else {
              fail("'" + path + "' is not a table", line);
            }
          }
        }
        doc.lines.emplace(path, line);
        table_prefix_ = path;
        continue;
      }
      auto key = parse_key_path();
      skip_inline_ws();
      expect('=');
      skip_inline_ws();
      auto value = parse_value(doc, join(key));
      end_of_line();
      assign(*cur, key, std::move(value), line);
      doc.lines[join(key)] = line;
    }
    return doc;
  }

 private:
  std::string s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::string table_prefix_;

  bool eof() const { return pos_ >= s_.size(); }
  char peek(std::size_t k = 0) const { return pos_ + k < s_.size() ? s_[pos_ + k] : '\0'; }
  char get() {
    const char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  [[noreturn]] void fail(const std::string& msg, int line = 0) const {
    throw SchemaError("TOML: " + msg, {}, line ? line : line_);
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }

  std::string join(const std::vector<std::string>& key) const {
    std::string s = table_prefix_;
    for (const auto& k : key) s += (s.empty() ? "" : ".") + k;
    return s;
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) get();
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') get();
  }
  void skip_ws_comments_newlines() {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') get();
      else if (c == '#') skip_comment();
      else break;
    }
  }
  void end_of_line() {
    skip_inline_ws();
    skip_comment();
    if (peek() == '\r') get();
    if (!eof() && peek() != '\n') fail("unexpected trailing characters");
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> parts;
    while (true) {
      skip_inline_ws();
      if (peek() == '"') {
        parts.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        parts.push_back(parse_literal_string());
      } else {
        std::string k;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
          k += get();
        if (k.empty()) fail("expected a key");
        parts.push_back(k);
      }
      skip_inline_ws();
      if (peek() != '.') break;
      get();
    }
    return parts;
  }

  void assign(nlohmann::json& root, const std::vector<std::string>& key, nlohmann::json v, int line) {
    nlohmann::json* t = &root;
    for (std::size_t i = 0; i + 1 < key.size(); ++i) {
      auto& next = (*t)[key[i]];
      if (next.is_null()) next = nlohmann::json::object();
      if (!next.is_object()) fail("key '" + key[i] + "' is not a table", line);
      t = &next;
    }
    if (t->contains(key.back())) fail("duplicate key '" + key.back() + "'", line);
    (*t)[key.back()] = std::move(v);
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == '"') break;
      if (c == '\\') {
        const char e = get();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return out;
  }
  std::string parse_literal_string() {
    expect('\'');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '\'') break;
      out += c;
    }
    return out;
  }

  nlohmann::json parse_value(Document& doc, const std::string& path) {
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array(doc, path);
    if (c == '{') return parse_inline_table(doc, path);
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || std::string("+-._").find(peek()) != std::string::npos))
      tok += get();
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    return parse_number(tok);
  }

  nlohmann::json parse_number(std::string tok) {
    std::string clean;
    for (char ch : tok)
      if (ch != '_') clean += ch;
    if (clean == "inf" || clean == "+inf") return std::numeric_limits<double>::infinity();
    if (clean == "-inf") return -std::numeric_limits<double>::infinity();
    if (clean == "nan" || clean == "+nan" || clean == "-nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(clean, &used);
        if (used == clean.size()) return v;
      } else {
        const long long v = std::stoll(clean, &used);
        if (used == clean.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + tok + "'");
  }

  nlohmann::json parse_array(Document& doc, const std::string& path) {
    expect('[');
    nlohmann::json arr = nlohmann::json::array();
    while (true) {
      skip_ws_comments_newlines();
      if (peek() == ']') {
        get();
        return arr;
      }
      arr.push_back(parse_value(doc, path + "[" + std::to_string(arr.size()) + "]"));
      skip_ws_comments_newlines();
      if (peek() == ',') {
        get();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  nlohmann::json parse_inline_table(Document& doc, const std::string& path) {
    expect('{');
    nlohmann::json obj = nlohmann::json::object();
    skip_inline_ws();
    if (peek() == '}') {
      get();
      return obj;
    }
    while (true) {
      skip_inline_ws();
      const int line = line_;
      auto key = parse_key_path();
      skip_inline_ws();
      expect('=');
      skip_inline_ws();
      std::string sub = path;
      for (const auto& k : key) sub += "." + k;
      assign(obj, key, parse_value(doc, sub), line);
      doc.lines[sub] = line;
      skip_inline_ws();
      if (peek() == ',') {
        get();
      } else if (peek() == '}') {
        get();
        return obj;
      } else {
        fail("expected ',' or '}' in inline table");
      }
    }
  }
};

}  // namespace detail

inline Document parse_toml(const std::string& text) { return detail::TomlParser(text).parse(); }

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Loads a scenario-like document: JSON if the file ends in .json or starts
/// with '{', otherwise the TOML subset.
inline Document load_document(const std::string& path) {
  const std::string text = read_text_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool json = (path.size() >= 5 && path.substr(path.size() - 5) == ".json") ||
                    (first != std::string::npos && text[first] == '{');
  if (!json) return parse_toml(text);
  Document d;
  try {
    d.data = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Byte offset -> line.
    int line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
      if (text[i] == '\n') ++line;
    throw SchemaError(std::string("JSON: ") + e.what(), {}, line);
  }
  if (!d.data.is_object()) throw SchemaError("top level must be an object");
  return d;
}

}  // namespace hypreg::io
