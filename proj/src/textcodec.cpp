#include "dupsim/textcodec.hpp"

#include "dupsim/error.hpp"
#include "dupsim/utf8.hpp"

namespace dupsim::textcodec {

void CodecConfig::validate() const {
  require(chunk_len >= 1, ErrorKind::kInvalidArgument, "chunk_len must be >= 1");
  require(bits_per_char >= 1 && bits_per_char <= 32, ErrorKind::kInvalidArgument,
          "bits_per_char must be in [1, 32]");
}

std::vector<std::uint8_t> encode_char(char32_t codepoint, std::size_t bits) {
  require(utf8::is_scalar_value(codepoint), ErrorKind::kInvalidCodepoint,
          "not a Unicode scalar value: " + std::to_string(static_cast<std::uint32_t>(codepoint)));
  require(bits >= 1 && bits <= 32, ErrorKind::kInvalidArgument, "bits must be in [1, 32]");
  std::vector<std::uint8_t> out(bits);
  for (std::size_t i = 0; i < bits; ++i) out[i] = static_cast<std::uint8_t>((codepoint >> i) & 1u);
  return out;
}

std::vector<std::u32string> chunk_text(std::u32string_view text, const CodecConfig& cfg) {
  cfg.validate();
  require(!text.empty(), ErrorKind::kEmptyInput, "cannot chunk empty text");
  std::vector<std::u32string> chunks;
  chunks.reserve(chunk_count(text.size(), cfg.chunk_len));
  for (std::size_t pos = 0; pos < text.size(); pos += cfg.chunk_len)
    chunks.emplace_back(text.substr(pos, cfg.chunk_len));
  return chunks;
}

CharMatrix vectorize_chunk(std::u32string_view chunk, const CodecConfig& cfg) {
  cfg.validate();
  require(!chunk.empty(), ErrorKind::kEmptyInput, "cannot vectorize empty chunk");
  require(chunk.size() <= cfg.chunk_len, ErrorKind::kOversize,
          "chunk of " + std::to_string(chunk.size()) + " characters exceeds chunk_len " +
              std::to_string(cfg.chunk_len));
  CharMatrix m(cfg.chunk_len, cfg.bits_per_char);
  for (std::size_t r = 0; r < chunk.size(); ++r) {
    const char32_t cp = chunk[r];
    require(utf8::is_scalar_value(cp), ErrorKind::kInvalidCodepoint, "invalid codepoint in chunk");
    for (std::size_t b = 0; b < cfg.bits_per_char; ++b) m.at(r, b) = static_cast<std::uint8_t>((cp >> b) & 1u);
  }
  m.set_valid_len(chunk.size());
  return m;
}

}  // namespace dupsim::textcodec
