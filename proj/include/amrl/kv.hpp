#pragma once

// Flat `key = value` text files shared by the aircraft, run-config and
// search-space formats. '#' starts a comment; blank lines are ignored.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace amrl::kv {

struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Throws ParseError on a line without '=' or a duplicate key.
std::vector<Entry> parse(std::istream& in);
std::vector<Entry> parse_file(const std::string& path);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

/// Strict numeric conversion; the whole string must be consumed.
double to_double(const std::string& s, const std::string& key);
long long to_int(const std::string& s, const std::string& key);
bool to_bool(const std::string& s, const std::string& key);

/// Shortest text that round-trips the double exactly.
std::string format_double(double v);

}  // namespace amrl::kv
