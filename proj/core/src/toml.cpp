#include "qclab/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "qclab/errors.hpp"

namespace qclab {

namespace {

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

// Removes a trailing comment, respecting quoted strings.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

bool valid_bare_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
          c == '-' || c == '.')) {
      return false;
    }
  }
  return true;
}

std::string parse_string_literal(std::string_view raw, const std::string& origin,
                                 int line) {
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') {
    fail(origin, line, "malformed string literal");
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    char c = raw[i];
    if (c == '"') fail(origin, line, "unescaped quote inside string");
    if (c == '\\') {
      if (i + 2 >= raw.size()) fail(origin, line, "dangling escape");
      const char e = raw[++i];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        default: fail(origin, line, std::string("unsupported escape \\") + e);
      }
    } else {
      out.push_back(c);
    }
  }
  return out;
}

TomlDocument::Scalar parse_scalar(std::string_view raw,
                                  const std::string& origin, int line) {
  raw = trim(raw);
  if (raw.empty()) fail(origin, line, "empty value");
  if (raw.front() == '"') {
    return parse_string_literal(raw, origin, line);
  }
  if (raw == "true") return true;
  if (raw == "false") return false;

  // Integer when the token is purely sign+digits, float otherwise.
  bool integral = true;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (i == 0 && (c == '+' || c == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      integral = false;
      break;
    }
  }
  if (integral) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
      fail(origin, line, "bad integer '" + std::string(raw) + "'");
    }
    return v;
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
    fail(origin, line, "bad value '" + std::string(raw) + "'");
  }
  return v;
}

// Splits a single-line array body on commas outside strings.
std::vector<std::string_view> split_elements(std::string_view body,
                                             const std::string& origin,
                                             int line) {
  std::vector<std::string_view> parts;
  bool in_string = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == ']') {
      fail(origin, line, "nested arrays are not supported");
    } else if (c == ',') {
      parts.push_back(body.substr(start, i - start));
      start = i + 1;
    }
  }
  if (in_string) fail(origin, line, "unterminated string in array");
  const std::string_view last = trim(body.substr(start));
  if (!last.empty()) parts.push_back(last);
  return parts;
}

}  // namespace

TomlDocument TomlDocument::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

TomlDocument TomlDocument::parse(const std::string& text, std::string origin) {
  TomlDocument doc;
  doc.origin_ = std::move(origin);
  std::istringstream in(text);
  std::string raw_line;
  std::string current;  // current table; "" = top level
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string_view line = trim(strip_comment(raw_line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        fail(doc.origin_, line_no, "malformed table header");
      }
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!valid_bare_key(name)) {
        fail(doc.origin_, line_no, "bad table name");
      }
      current = std::string(name);
      if (!doc.tables_.count(current)) {
        doc.tables_[current];
        doc.table_order_.push_back(current);
      }
      continue;
    }

    const std::size_t eq = [&] {
      bool in_string = false;
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '=' && !in_string) return i;
      }
      return std::string_view::npos;
    }();
    if (eq == std::string_view::npos) {
      fail(doc.origin_, line_no, "expected key = value");
    }
    const std::string key{trim(line.substr(0, eq))};
    if (!valid_bare_key(key)) {
      fail(doc.origin_, line_no, "bad key '" + key + "'");
    }
    std::string_view rhs = trim(line.substr(eq + 1));
    if (rhs.empty()) fail(doc.origin_, line_no, "missing value");

    Value value;
    if (rhs.front() == '[') {
      if (rhs.back() != ']') {
        fail(doc.origin_, line_no, "arrays must close on the same line");
      }
      value.is_array = true;
      for (std::string_view el :
           split_elements(rhs.substr(1, rhs.size() - 2), doc.origin_,
                          line_no)) {
        value.elements.push_back(parse_scalar(el, doc.origin_, line_no));
      }
    } else {
      value.scalar = parse_scalar(rhs, doc.origin_, line_no);
    }
    auto& table = doc.tables_[current];
    if (table.count(key)) {
      fail(doc.origin_, line_no, "duplicate key '" + key + "'");
    }
    table.emplace(key, std::move(value));
    doc.key_order_[current].push_back(key);
  }
  return doc;
}

const TomlDocument::Value* TomlDocument::find(const std::string& table,
                                              const std::string& key) const {
  auto t = tables_.find(table);
  if (t == tables_.end()) return nullptr;
  auto k = t->second.find(key);
  return k == t->second.end() ? nullptr : &k->second;
}

const TomlDocument::Value& TomlDocument::require(const std::string& table,
                                                 const std::string& key) const {
  const Value* v = find(table, key);
  if (v == nullptr) {
    throw ConfigError(origin_ + ": missing required key [" + table + "] " +
                      key);
  }
  return *v;
}

bool TomlDocument::has(const std::string& table, const std::string& key) const {
  return find(table, key) != nullptr;
}

namespace {

[[noreturn]] void type_fail(const std::string& origin, const std::string& table,
                            const std::string& key, const char* want) {
  throw ConfigError(origin + ": [" + table + "] " + key + " must be a " +
                    want);
}

double scalar_as_double(const TomlDocument::Scalar& s) {
  if (std::holds_alternative<double>(s)) return std::get<double>(s);
  if (std::holds_alternative<std::int64_t>(s)) {
    return static_cast<double>(std::get<std::int64_t>(s));
  }
  throw std::bad_variant_access{};
}

}  // namespace

std::string TomlDocument::get_string(const std::string& table,
                                     const std::string& key) const {
  const Value& v = require(table, key);
  if (v.is_array || !std::holds_alternative<std::string>(v.scalar)) {
    type_fail(origin_, table, key, "string");
  }
  return std::get<std::string>(v.scalar);
}

std::string TomlDocument::get_string_or(const std::string& table,
                                        const std::string& key,
                                        const std::string& fallback) const {
  return has(table, key) ? get_string(table, key) : fallback;
}

bool TomlDocument::get_bool_or(const std::string& table, const std::string& key,
                               bool fallback) const {
  const Value* v = find(table, key);
  if (v == nullptr) return fallback;
  if (v->is_array || !std::holds_alternative<bool>(v->scalar)) {
    type_fail(origin_, table, key, "boolean");
  }
  return std::get<bool>(v->scalar);
}

std::int64_t TomlDocument::get_int(const std::string& table,
                                   const std::string& key) const {
  const Value& v = require(table, key);
  if (v.is_array || !std::holds_alternative<std::int64_t>(v.scalar)) {
    type_fail(origin_, table, key, "integer");
  }
  return std::get<std::int64_t>(v.scalar);
}

std::int64_t TomlDocument::get_int_or(const std::string& table,
                                      const std::string& key,
                                      std::int64_t fallback) const {
  return has(table, key) ? get_int(table, key) : fallback;
}

double TomlDocument::get_double(const std::string& table,
                                const std::string& key) const {
  const Value& v = require(table, key);
  try {
    if (v.is_array) throw std::bad_variant_access{};
    return scalar_as_double(v.scalar);
  } catch (const std::bad_variant_access&) {
    type_fail(origin_, table, key, "number");
  }
}

double TomlDocument::get_double_or(const std::string& table,
                                   const std::string& key,
                                   double fallback) const {
  return has(table, key) ? get_double(table, key) : fallback;
}

std::vector<double> TomlDocument::get_double_array(
    const std::string& table, const std::string& key) const {
  const Value& v = require(table, key);
  if (!v.is_array) type_fail(origin_, table, key, "array of numbers");
  std::vector<double> out;
  out.reserve(v.elements.size());
  try {
    for (const Scalar& s : v.elements) out.push_back(scalar_as_double(s));
  } catch (const std::bad_variant_access&) {
    type_fail(origin_, table, key, "array of numbers");
  }
  return out;
}

std::vector<std::int64_t> TomlDocument::get_int_array(
    const std::string& table, const std::string& key) const {
  const Value& v = require(table, key);
  if (!v.is_array) type_fail(origin_, table, key, "array of integers");
  std::vector<std::int64_t> out;
  out.reserve(v.elements.size());
  for (const Scalar& s : v.elements) {
    if (!std::holds_alternative<std::int64_t>(s)) {
      type_fail(origin_, table, key, "array of integers");
    }
    out.push_back(std::get<std::int64_t>(s));
  }
  return out;
}

std::vector<std::string> TomlDocument::keys(const std::string& table) const {
  auto it = key_order_.find(table);
  return it == key_order_.end() ? std::vector<std::string>{} : it->second;
}

}  // namespace qclab
