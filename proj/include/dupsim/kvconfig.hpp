#pragma once

// Flat key=value config files: one pair per line, '#' starts a comment,
// blank lines ignored, later keys override earlier ones.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace dupsim::kv {

using Map = std::map<std::string, std::string>;

Map parse(std::string_view text);
Map read_file(const std::string& path);
std::string serialize(const Map& values);

std::size_t parse_size(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
// Shortest representation that round-trips.
std::string format_double(double v);

}  // namespace dupsim::kv
