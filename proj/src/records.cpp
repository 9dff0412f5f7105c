#include "pairsr/records.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>

#include "pairsr/error.hpp"

namespace pairsr {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::istream& in) {
  std::vector<KeyValue> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError("line " + std::to_string(number) + ": expected 'key = value'");
    }
    KeyValue kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), number};
    if (kv.key.empty()) throw IoError("line " + std::to_string(number) + ": empty key");
    out.push_back(std::move(kv));
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& key) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw IoError("invalid number for '" + key + "': " + text);
  }
  return v;
}

long long parse_int(const std::string& text, const std::string& key) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw IoError("invalid integer for '" + key + "': " + text);
  }
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw IoError("invalid boolean for '" + key + "': " + text);
}

const KeyValue* find_key(const std::vector<KeyValue>& kvs, const std::string& key) {
  const auto it = std::find_if(kvs.begin(), kvs.end(),
                               [&](const KeyValue& kv) { return kv.key == key; });
  return it == kvs.end() ? nullptr : &*it;
}

const std::string& require_key(const std::vector<KeyValue>& kvs, const std::string& key) {
  const KeyValue* kv = find_key(kvs, key);
  if (!kv) throw IoError("missing key '" + key + "'");
  return kv->value;
}

}  // namespace pairsr
