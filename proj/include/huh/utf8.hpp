#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace huh::utf8 {

bool is_valid(std::string_view s);

// Number of code points; assumes valid UTF-8.
std::size_t length(std::string_view s);

// Number of code points in s[0, byte_offset).
std::size_t codepoint_count_before(std::string_view s, std::size_t byte_offset);

// Decodes the code point starting at `pos` and advances `pos` past it.
// Invalid sequences decode as U+FFFD and advance one byte.
char32_t decode(std::string_view s, std::size_t& pos);

void append(std::string& out, char32_t cp);

// Upper-cases the first letter of `s` in place when it is a lower-case ASCII
// or Latin-1 letter. Returns true when a change was made.
bool capitalize_first(std::string& s);

}  // namespace huh::utf8
