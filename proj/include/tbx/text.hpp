#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by canonicalization, evaluation and search.
// Case folding is ASCII-only; bytes >= 0x80 pass through untouched.
namespace tbx::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Lowercase, trim and collapse internal whitespace runs to one space.
std::string normalize_spaces_lower(std::string_view s);

// Decodes UTF-8 into Unicode scalar values. Invalid bytes decode to
// 0xDC00 + byte so that distinct garbage stays distinct.
std::u32string utf8_decode(std::string_view s);

std::size_t utf8_length(std::string_view s);

bool is_ascii_alnum(char c);

// Token characters: ASCII alphanumerics plus any non-ASCII byte.
bool is_token_char(char c);

}  // namespace tbx::text
