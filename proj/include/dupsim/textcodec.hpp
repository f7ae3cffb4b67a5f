#pragma once

// Character binarization and fixed-size chunking. A "character" is a Unicode
// scalar value; no normalization or case folding is applied.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dupsim::textcodec {

struct CodecConfig {
  std::size_t chunk_len = 512;
  std::size_t bits_per_char = 24;

  void validate() const;
};

// Dense (rows x cols) {0,1} matrix for one chunk. Rows at index >= valid_len
// are zero padding.
class CharMatrix {
 public:
  CharMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t valid_len() const noexcept { return valid_len_; }
  void set_valid_len(std::size_t n) noexcept { valid_len_ = n; }

  std::uint8_t at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  std::uint8_t& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const std::uint8_t* row(std::size_t r) const noexcept { return data_.data() + r * cols_; }

  bool operator==(const CharMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::size_t valid_len_ = 0;
  std::vector<std::uint8_t> data_;
};

// bit i = (codepoint >> i) & 1, for i in [0, bits).
std::vector<std::uint8_t> encode_char(char32_t codepoint, std::size_t bits);

std::vector<std::u32string> chunk_text(std::u32string_view text, const CodecConfig& cfg);

CharMatrix vectorize_chunk(std::u32string_view chunk, const CodecConfig& cfg);

// Number of chunks chunk_text would produce for a text of n characters.
inline std::size_t chunk_count(std::size_t n, std::size_t chunk_len) noexcept {
  return (n + chunk_len - 1) / chunk_len;
}

}  // namespace dupsim::textcodec
