#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace rite::utf8 {

bool is_valid(std::string_view text) noexcept;

// True when `offset` does not point into the middle of a multi-byte
// sequence. offset == text.size() is a boundary.
bool is_char_boundary(std::string_view text, std::size_t offset) noexcept;

// Largest boundary <= offset (clamped to text.size()).
std::size_t floor_char_boundary(std::string_view text, std::size_t offset) noexcept;

// Lossy decode: an ill-formed lead byte and the continuation bytes that
// follow it become one U+FFFD.
std::string sanitize(std::string_view bytes);

std::string trim_whitespace(std::string_view text);

}  // namespace rite::utf8
