#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace pdfnet::util {

std::string sha256_file(const std::string& path);

// Flat `key = value` file with '#' comments and blank lines. Later keys
// override earlier ones; malformed lines are errors.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Typed reads over a parsed key/value table; throw on malformed values.
long long parse_int(const std::string& key, const std::string& value);
double parse_real(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::array<int, 5> parse_int5(const std::string& key, const std::string& value);

void write_text_file(const std::string& path, const std::string& content);

// Writes `manifest.json` into `dir`, listing each artifact (paths relative
// to dir) with size and SHA-256. The manifest itself is not listed.
void write_manifest(const std::string& dir, const std::vector<std::string>& artifacts);

}  // namespace pdfnet::util
