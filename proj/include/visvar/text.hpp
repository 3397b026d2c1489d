#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace visvar::text {

// Canonical whitespace normalization applied before digesting and before
// storing model-produced text: trim both ends, collapse internal runs of
// whitespace to a single space.
std::string normalize_ws(std::string_view s);

std::string to_lower(std::string_view s);

// Non-empty lines, each trimmed.
std::vector<std::string> split_lines(std::string_view s);

// Whitespace-separated tokens.
std::vector<std::string> split_words(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// First run of alphabetic characters, lowercased; empty if none.
std::string first_alpha_token(std::string_view s);

// Number of whole-word, case-insensitive occurrences of `word` in `s`.
// Word boundaries are non-alphanumeric characters.
int count_whole_word(std::string_view s, std::string_view word);

// Replace the single whole-word occurrence of `word` (case-insensitive)
// with `replacement`. Returns nullopt unless exactly one occurrence exists.
std::optional<std::string> replace_whole_word_once(std::string_view s, std::string_view word,
                                                   std::string_view replacement);

// round-half-up to the nearest integer; used for the cross-apply count.
int round_half_up(double x);

}  // namespace visvar::text
