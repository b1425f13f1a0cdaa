#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Small text helpers shared by the tokenizers, parsers, and metrics.
namespace qaguide::text {

bool is_space(char c) noexcept;
bool is_ascii_alnum(char c) noexcept;

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);

/// Whitespace-separated words, as views into `s`.
std::vector<std::string_view> split_whitespace(std::string_view s);

/// Lowercased runs of [a-z0-9]; everything else separates tokens.
std::vector<std::string> alnum_tokens(std::string_view s);

bool contains_word(std::string_view haystack, std::string_view needle);

/// Case-insensitive search for `needle` bounded by non-alphanumeric bytes.
bool contains_word_ci(std::string_view haystack, std::string_view needle);

/// Largest position <= pos that does not fall inside a UTF-8 sequence.
std::size_t utf8_floor(std::string_view s, std::size_t pos) noexcept;

std::vector<std::string> split_sentences(std::string_view s);

/// Replaces `{name}` placeholders in a single pass; substituted values are
/// never re-scanned.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string, std::string>>& values);

std::uint64_t fnv1a64(std::string_view data) noexcept;

}  // namespace qaguide::text
