#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cwms {

/// Canonical text form used for every document and query: Unicode NFC,
/// ASCII letters lowercased, whitespace runs collapsed to one space and
/// trimmed. Idempotent. Throws Error(Format) on invalid UTF-8.
std::string normalize_text(std::string_view utf8);

/// Splits UTF-8 text into one string_view per code point. The views alias
/// `utf8`. Assumes valid UTF-8 (normalized text always is).
std::vector<std::string_view> split_code_points(std::string_view utf8);

/// Number of code points.
std::size_t char_length(std::string_view utf8);

/// First `n` code points of `utf8`.
std::string_view prefix_chars(std::string_view utf8, std::size_t n);

}  // namespace cwms
