#include "dsm/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace dsm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string bad_value(const std::string& key, const std::string& text, const char* expected) {
  return "invalid value '" + text + "' for " + key + ": expected " + expected;
}

template <class T>
T parse_integer(const std::string& key, const std::string& text, const char* expected) {
  const std::string_view t = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw std::invalid_argument(bad_value(key, text, expected));
  return v;
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source) {
  std::vector<KeyValue> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    KeyValue kv{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no};
    if (kv.key.empty()) throw ConfigError(where + "missing key");
    if (!seen.insert(kv.key).second) throw ConfigError(where + "duplicate key '" + kv.key + "'");
    out.push_back(std::move(kv));
  }
  return out;
}

std::vector<KeyValue> read_key_value_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path);
}

std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string out;
  for (const auto& [k, v] : pairs) out += k + " = " + v + "\n";
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  return parse_integer<std::size_t>(key, text, "a non-negative integer");
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  return parse_integer<std::uint64_t>(key, text, "a non-negative integer");
}

Real parse_real(const std::string& key, const std::string& text) {
  const std::string_view t = trim(text);
  Real v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw std::invalid_argument(bad_value(key, text, "a real number"));
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string_view t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw std::invalid_argument(bad_value(key, text, "true or false"));
}

std::vector<Real> parse_real_list(const std::string& key, const std::string& text) {
  std::vector<Real> out;
  std::string_view rest = text;
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(parse_real(key, std::string(rest.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

std::string format_real(Real v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace dsm
