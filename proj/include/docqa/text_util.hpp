#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace docqa {

/// Collapses every whitespace run to a single space and trims both ends.
std::string normalize_ws(std::string_view s);

/// ASCII-only lowercasing; bytes outside A-Z pass through.
std::string to_lower(std::string_view s);

std::string trim(std::string_view s);

/// Case-insensitive substring scan; returns byte offsets of every match.
std::vector<size_t> find_all_ci(std::string_view haystack, std::string_view needle);

std::vector<std::string> split(std::string_view s, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// FNV-1a 64-bit hash, used to fingerprint scripted-client inputs.
uint64_t fnv1a64(std::string_view s);

std::string to_hex(uint64_t v);

/// Escapes &, <, >, " and ' for XML attribute/text contexts.
std::string xml_escape(std::string_view s);

/// Decodes one UTF-8 code point at byte offset i; advances i past it.
/// Invalid bytes decode as U+FFFD and advance by one.
uint32_t utf8_next(std::string_view s, size_t& i);

std::string read_file(const std::string& path);

void write_file(const std::string& path, std::string_view content);

}  // namespace docqa
