#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace surgraw::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Lowercase, trimmed, internal whitespace runs collapsed to one space.
std::string canonical_name(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

// Whitespace-separated words, original spelling preserved.
std::vector<std::string> split_words(std::string_view s);

// True when `needle` occurs in `haystack` delimited by non-alphanumerics.
// Both arguments are compared as given; callers lowercase first.
bool contains_word(std::string_view haystack, std::string_view needle);

bool starts_with(std::string_view s, std::string_view prefix);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Replaces every occurrence of `from` (non-empty) with `to`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

std::string read_file(const std::string& path);

}  // namespace surgraw::text
