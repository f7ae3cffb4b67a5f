#pragma once

#include <string>
#include <string_view>

namespace dupsim::utf8 {

// Strict decode; malformed sequences, overlongs and surrogates throw
// Error(kInvalidCodepoint).
std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

bool is_scalar_value(char32_t cp) noexcept;

}  // namespace dupsim::utf8
