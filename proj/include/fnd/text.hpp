#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fnd::text {

// Unicode-aware lowercase of a UTF-8 string. Invalid byte sequences are
// replaced with U+FFFD.
std::string to_lower(std::string_view utf8);

// Unigram tokens: maximal runs of Unicode alphanumeric code points.
std::vector<std::string> tokenize(std::string_view utf8);

std::u32string decode_utf8(std::string_view utf8);
std::string encode_utf8(std::u32string_view cps);

} // namespace fnd::text
