#include "config.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string/trim.hpp>

namespace lbp::cli {

namespace {

auto trimmed(std::string_view text) -> std::string {
  auto out = std::string(text);
  boost::algorithm::trim(out);
  return out;
}

auto split_list(std::string_view text) -> std::vector<std::string> {
  auto items = std::vector<std::string>();
  auto rest = trimmed(text);
  if (rest.empty()) return items;
  auto stream = std::istringstream(rest);
  for (std::string item; std::getline(stream, item, ',');) items.push_back(trimmed(item));
  return items;
}

}  // namespace

auto parse_config_text(std::string_view text, std::string_view origin) -> ConfigEntries {
  auto entries = ConfigEntries();
  auto stream = std::istringstream(std::string(text));
  auto line_number = 0;
  for (std::string line; std::getline(stream, line);) {
    ++line_number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto body = trimmed(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    auto where = std::string(origin) + ":" + std::to_string(line_number);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    auto key = trimmed(std::string_view(body).substr(0, eq));
    auto value = trimmed(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

auto load_config_file(const std::filesystem::path& path) -> ConfigEntries {
  auto in = std::ifstream(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  auto buffer = std::ostringstream();
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.string());
}

auto parse_number(std::string_view text) -> double {
  auto body = trimmed(text);
  auto value = 0.0;
  auto [end, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (body.empty() || ec != std::errc() || end != body.data() + body.size()) {
    throw ConfigError("not a number: '" + body + "'");
  }
  return value;
}

auto parse_integer(std::string_view text) -> std::int64_t {
  auto body = trimmed(text);
  auto value = std::int64_t{0};
  auto [end, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (body.empty() || ec != std::errc() || end != body.data() + body.size()) {
    throw ConfigError("not an integer: '" + body + "'");
  }
  return value;
}

auto Config::text(const std::string& key) const -> const std::string& {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

auto Config::number(const std::string& key) const -> double {
  try {
    return parse_number(text(key));
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

auto Config::integer(const std::string& key) const -> std::int64_t {
  try {
    return parse_integer(text(key));
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

auto Config::count(const std::string& key) const -> std::uint64_t {
  auto value = integer(key);
  if (value < 0) throw ConfigError("key '" + key + "' must be nonnegative");
  return static_cast<std::uint64_t>(value);
}

auto Config::flag(const std::string& key) const -> bool {
  const auto& value = text(key);
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + value + "'");
}

auto Config::numbers(const std::string& key) const -> std::vector<double> {
  auto out = std::vector<double>();
  try {
    for (const auto& item : split_list(text(key))) out.push_back(parse_number(item));
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
  return out;
}

auto Config::integers(const std::string& key) const -> std::vector<std::int64_t> {
  auto out = std::vector<std::int64_t>();
  try {
    for (const auto& item : split_list(text(key))) out.push_back(parse_integer(item));
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
  return out;
}

}  // namespace lbp::cli
