#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lbp::cli {

// Malformed or unknown configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

// Flat `key = value` lines; `#` starts a comment; blank lines are skipped.
// Later duplicates win. `origin` names the source in error messages.
auto parse_config_text(std::string_view text, std::string_view origin) -> ConfigEntries;
auto load_config_file(const std::filesystem::path& path) -> ConfigEntries;

// Resolved key/value store with typed accessors. Values stay as text so the
// manifest echoes exactly what was given.
class Config {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  auto has(const std::string& key) const -> bool { return values_.contains(key); }
  auto values() const -> const std::map<std::string, std::string>& { return values_; }

  auto text(const std::string& key) const -> const std::string&;
  auto number(const std::string& key) const -> double;
  auto integer(const std::string& key) const -> std::int64_t;
  auto count(const std::string& key) const -> std::uint64_t;
  auto flag(const std::string& key) const -> bool;
  // Comma-separated numbers; an empty value gives an empty list.
  auto numbers(const std::string& key) const -> std::vector<double>;
  auto integers(const std::string& key) const -> std::vector<std::int64_t>;

 private:
  std::map<std::string, std::string> values_;
};

auto parse_number(std::string_view text) -> double;
auto parse_integer(std::string_view text) -> std::int64_t;

}  // namespace lbp::cli
