#include "asf/common/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "asf/common/error.hpp"

namespace asf::config {
namespace {

class TomlLine {
 public:
  TomlLine(std::string_view text, int line_no) : text_(text), line_no_(line_no) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("toml line " + std::to_string(line_no_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= text_.size() || text_[pos_] == '#';
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> parts;
    while (true) {
      skip_ws();
      std::string part;
      if (peek() == '"') {
        part = string_literal();
      } else {
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
                text_[pos_] == '-')) {
          part.push_back(text_[pos_++]);
        }
      }
      if (part.empty()) fail("empty key");
      parts.push_back(part);
      skip_ws();
      if (peek() != '.') break;
      ++pos_;
    }
    return parts;
  }

  Json value() {
    skip_ws();
    const char c = peek();
    if (c == '"') return string_literal();
    if (c == '[') return array();
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return number();
  }

 private:
  std::string string_literal() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) fail("dangling escape");
        const char e = text_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out.push_back(c);
      }
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  Json array() {
    ++pos_;
    Json out = Json::array();
    while (true) {
      skip_ws();
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  Json number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '+' ||
            text_[pos_] == '-' || text_[pos_] == '.' || text_[pos_] == '_')) {
      ++pos_;
    }
    std::string token;
    for (char c : text_.substr(start, pos_ - start)) {
      if (c != '_') token.push_back(c);
    }
    if (token.empty()) fail("expected a value");
    const bool is_float = token.find_first_of(".eE") != std::string::npos &&
                          token.rfind("0x", 0) != 0;
    if (is_float) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size()) fail("bad float '" + token + "'");
      return v;
    }
    std::int64_t v = 0;
    const char* begin = token.data();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) fail("bad value '" + token + "'");
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_no_;
};

Json& descend(Json& root, const std::vector<std::string>& path, std::size_t count, const TomlLine& line) {
  Json* node = &root;
  for (std::size_t i = 0; i < count; ++i) {
    Json& child = (*node)[path[i]];
    if (child.is_null()) child = Json::object();
    if (!child.is_object()) line.fail("key '" + path[i] + "' is not a table");
    node = &child;
  }
  return *node;
}

bool compatible(const Json& existing, const Json& incoming) {
  if (existing.is_number_float()) return incoming.is_number();
  if (existing.is_number_integer()) return incoming.is_number_integer();
  if (existing.is_boolean()) return incoming.is_boolean();
  if (existing.is_string()) return incoming.is_string();
  if (existing.is_array()) return incoming.is_array();
  if (existing.is_object()) return incoming.is_object();
  return existing.is_null();
}

std::string type_label(const Json& j) {
  if (j.is_number_integer()) return "integer";
  if (j.is_number_float()) return "number";
  return j.type_name();
}

}  // namespace

Json parse_toml(std::string_view text) {
  Json root = Json::object();
  std::vector<std::string> table;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(start, end - start);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    ++line_no;
    TomlLine line(raw, line_no);
    if (!line.at_end_or_comment()) {
      if (line.peek() == '[') {
        line.expect('[');
        table = line.key_path();
        line.expect(']');
        descend(root, table, table.size(), line);
      } else {
        auto key = line.key_path();
        line.expect('=');
        Json v = line.value();
        if (!line.at_end_or_comment()) line.fail("trailing characters");
        std::vector<std::string> full = table;
        full.insert(full.end(), key.begin(), key.end());
        Json& parent = descend(root, full, full.size() - 1, line);
        if (parent.contains(full.back())) line.fail("duplicate key '" + full.back() + "'");
        parent[full.back()] = std::move(v);
      }
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return root;
}

Json load_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigNotFoundError("config file not found: " + path.string());
  }
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto ext = path.extension().string();
  if (ext == ".toml") return parse_toml(text);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void merge_checked(Json& target, const Json& source, const std::string& prefix) {
  if (!source.is_object()) throw ConfigError("config section '" + prefix + "' must be a table");
  for (const auto& [key, value] : source.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (!target.contains(key)) throw ConfigError("unknown config key '" + name + "'");
    Json& slot = target[key];
    if (!compatible(slot, value)) {
      throw ConfigError("config key '" + name + "' expects " + type_label(slot) + ", got " +
                        type_label(value));
    }
    if (slot.is_object()) {
      merge_checked(slot, value, name);
    } else if (slot.is_number_float()) {
      slot = value.get<double>();
    } else {
      slot = value;
    }
  }
}

void apply_override(Json& target, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key=value: '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  Json* node = &target;
  std::string name;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    name += (name.empty() ? "" : ".") + part;
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("unknown config key '" + name + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  Json parsed;
  if (node->is_string()) {
    parsed = raw;
  } else {
    try {
      parsed = Json::parse(raw);
    } catch (const Json::parse_error&) {
      throw ConfigError("override '" + key + "': cannot parse '" + raw + "' as " + type_label(*node));
    }
  }
  if (!compatible(*node, parsed) || node->is_object()) {
    throw ConfigError("override '" + key + "' expects " + type_label(*node) + ", got " +
                      type_label(parsed));
  }
  *node = node->is_number_float() ? Json(parsed.get<double>()) : parsed;
}

}  // namespace asf::config
