#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pairsr {

/// One "key = value" line of a text record or manifest.
struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

/// Parses "key = value" lines; blank lines and '#' comments are skipped.
/// Keys may repeat, order is preserved.
std::vector<KeyValue> parse_key_values(std::istream& in);

/// Shortest round-trip decimal form; infinities as "inf"/"-inf", NaN as "nan".
std::string format_double(double v);

double parse_double(const std::string& text, const std::string& key);
long long parse_int(const std::string& text, const std::string& key);
bool parse_bool(const std::string& text, const std::string& key);

const KeyValue* find_key(const std::vector<KeyValue>& kvs, const std::string& key);
/// Throws IoError when the key is absent.
const std::string& require_key(const std::vector<KeyValue>& kvs, const std::string& key);

}  // namespace pairsr
