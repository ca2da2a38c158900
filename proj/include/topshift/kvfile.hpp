#pragma once

// Flat key=value config files: one pair per line, '#' comments, blank lines
// ignored.

#include <map>
#include <string>
#include <vector>

namespace topshift {

std::map<std::string, std::string> parse_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

std::vector<std::string> split_csv(const std::string& value);

}  // namespace topshift
