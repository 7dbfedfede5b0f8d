#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dsm/tensor.hpp"

namespace dsm {

/// A malformed or unknown entry in a `key = value` file. what() carries
/// "<source>:<line>: ..." when the position is known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Parses UTF-8 text of `key = value` lines. Blank lines and everything after
/// `#` are ignored; keys and values are trimmed. Duplicate keys are an error.
std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source);
std::vector<KeyValue> read_key_value_file(const std::string& path);

/// Renders pairs back into the same grammar.
std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& pairs);

// Value parsers; errors are std::invalid_argument naming the key.
std::size_t parse_size(const std::string& key, const std::string& text);
std::uint64_t parse_u64(const std::string& key, const std::string& text);
Real parse_real(const std::string& key, const std::string& text);
bool parse_bool(const std::string& key, const std::string& text);
/// Comma-separated reals, e.g. "1,0.9,1.1".
std::vector<Real> parse_real_list(const std::string& key, const std::string& text);

/// Shortest text that parses back to the same double.
std::string format_real(Real v);

}  // namespace dsm
