#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace qclab {

/// Minimal TOML reader covering the scenario-file subset: [tables],
/// `key = value` pairs with string/bool/integer/float scalars, single-line
/// arrays of scalars, and # comments. Unknown syntax is rejected loudly
/// (ConfigError with file and line) rather than guessed at.
class TomlDocument {
 public:
  using Scalar = std::variant<bool, std::int64_t, double, std::string>;
  struct Value {
    bool is_array = false;
    Scalar scalar;                 // when !is_array
    std::vector<Scalar> elements;  // when is_array
  };

  static TomlDocument parse_file(const std::filesystem::path& path);
  static TomlDocument parse(const std::string& text, std::string origin);

  bool has(const std::string& table, const std::string& key) const;
  const std::vector<std::string>& tables() const { return table_order_; }

  /// Typed getters; the *_or forms fall back to a default when the key is
  /// absent. Integer values promote to double; nothing else converts.
  std::string get_string(const std::string& table,
                         const std::string& key) const;
  std::string get_string_or(const std::string& table, const std::string& key,
                            const std::string& fallback) const;
  bool get_bool_or(const std::string& table, const std::string& key,
                   bool fallback) const;
  std::int64_t get_int(const std::string& table, const std::string& key) const;
  std::int64_t get_int_or(const std::string& table, const std::string& key,
                          std::int64_t fallback) const;
  double get_double(const std::string& table, const std::string& key) const;
  double get_double_or(const std::string& table, const std::string& key,
                       double fallback) const;
  std::vector<double> get_double_array(const std::string& table,
                                       const std::string& key) const;
  std::vector<std::int64_t> get_int_array(const std::string& table,
                                          const std::string& key) const;

  /// Keys present in a table, in file order (for strict-key validation).
  std::vector<std::string> keys(const std::string& table) const;

 private:
  const Value* find(const std::string& table, const std::string& key) const;
  const Value& require(const std::string& table, const std::string& key) const;

  std::string origin_;
  std::map<std::string, std::map<std::string, Value>> tables_;
  std::map<std::string, std::vector<std::string>> key_order_;
  std::vector<std::string> table_order_;
};

}  // namespace qclab
