#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "dupsim/textcodec.hpp"

namespace dupsim {

enum class Activation { kSwish };
enum class AttnActivation { kReluSquared };
enum class AbsPosEncoding { kScaledSin, kNone };
enum class RelPosEncoding { kRope, kNone };
enum class NormType { kScaleNorm };
enum class Pooling { kGem, kAverage, kMax };

// Defaults are the shipped embedder: 2 GAU blocks at width 256, GeM(p=3)
// pooling, 256-dim output, 512-character chunks of 24-bit characters.
struct ModelConfig {
  std::size_t num_blocks = 2;
  std::size_t hidden_dim = 256;
  double expansion_rate = 1.0;
  std::size_t attn_key_dim = 128;
  Activation activation = Activation::kSwish;
  AttnActivation attn_activation = AttnActivation::kReluSquared;
  AbsPosEncoding abs_pos_encoding = AbsPosEncoding::kScaledSin;
  RelPosEncoding rel_pos_encoding = RelPosEncoding::kRope;
  NormType norm = NormType::kScaleNorm;
  Pooling pooling = Pooling::kGem;
  double gem_p = 3.0;
  double dropout = 0.0;
  std::size_t embedding_dim = 256;
  std::size_t chunk_len = 512;
  std::size_t bits_per_char = 24;

  // Width of the gated value path (hidden_dim * expansion_rate).
  std::size_t expanded_dim() const;
  textcodec::CodecConfig codec() const { return {chunk_len, bits_per_char}; }
  void validate() const;

  // Flat key=value view, keys equal to the field names above.
  std::map<std::string, std::string> to_kv() const;
  // Applies recognised keys; returns false for keys that are not model fields.
  bool apply_kv(const std::string& key, const std::string& value);

  bool operator==(const ModelConfig&) const = default;
};

const char* to_string(Pooling p) noexcept;
Pooling parse_pooling(const std::string& s);
const char* to_string(AbsPosEncoding p) noexcept;
AbsPosEncoding parse_abs_pos(const std::string& s);
const char* to_string(RelPosEncoding p) noexcept;
RelPosEncoding parse_rel_pos(const std::string& s);

}  // namespace dupsim
