#include "dupsim/model_config.hpp"

#include <cmath>

#include "dupsim/error.hpp"
#include "dupsim/kvconfig.hpp"

namespace dupsim {

std::size_t ModelConfig::expanded_dim() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(hidden_dim) * expansion_rate));
}

void ModelConfig::validate() const {
  auto check = [](bool ok, const char* msg) { require(ok, ErrorKind::kInvalidArgument, msg); };
  check(num_blocks >= 1, "num_blocks must be >= 1");
  check(hidden_dim >= 1, "hidden_dim must be >= 1");
  check(expansion_rate > 0 && expanded_dim() >= 1, "expansion_rate must give a positive width");
  check(attn_key_dim >= 1, "attn_key_dim must be >= 1");
  check(rel_pos_encoding != RelPosEncoding::kRope || attn_key_dim % 2 == 0, "rotary positions need an even attn_key_dim");
  check(gem_p >= 1.0, "gem_p must be >= 1");
  check(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  check(dropout == 0.0, "dropout > 0 is not supported by this engine");
  check(embedding_dim >= 1, "embedding_dim must be >= 1");
  codec().validate();
}

const char* to_string(Pooling p) noexcept {
  switch (p) {
    case Pooling::kGem: return "gem";
    case Pooling::kAverage: return "average";
    case Pooling::kMax: return "max";
  }
  return "?";
}

Pooling parse_pooling(const std::string& s) {
  if (s == "gem") return Pooling::kGem;
  if (s == "average" || s == "avg") return Pooling::kAverage;
  if (s == "max") return Pooling::kMax;
  fail(ErrorKind::kInvalidArgument, "unknown pooling: " + s);
}

const char* to_string(AbsPosEncoding p) noexcept { return p == AbsPosEncoding::kScaledSin ? "scaled_sin" : "none"; }

AbsPosEncoding parse_abs_pos(const std::string& s) {
  if (s == "scaled_sin") return AbsPosEncoding::kScaledSin;
  if (s == "none") return AbsPosEncoding::kNone;
  fail(ErrorKind::kInvalidArgument, "unknown abs_pos_encoding: " + s);
}

const char* to_string(RelPosEncoding p) noexcept { return p == RelPosEncoding::kRope ? "rope" : "none"; }

RelPosEncoding parse_rel_pos(const std::string& s) {
  if (s == "rope") return RelPosEncoding::kRope;
  if (s == "none") return RelPosEncoding::kNone;
  fail(ErrorKind::kInvalidArgument, "unknown rel_pos_encoding: " + s);
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"num_blocks", std::to_string(num_blocks)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"expansion_rate", kv::format_double(expansion_rate)},
      {"attn_key_dim", std::to_string(attn_key_dim)},
      {"activation", "swish"},
      {"attn_activation", "relu_squared"},
      {"abs_pos_encoding", to_string(abs_pos_encoding)},
      {"rel_pos_encoding", to_string(rel_pos_encoding)},
      {"norm", "scale_norm"},
      {"pooling", to_string(pooling)},
      {"gem_p", kv::format_double(gem_p)},
      {"dropout", kv::format_double(dropout)},
      {"embedding_dim", std::to_string(embedding_dim)},
      {"chunk_len", std::to_string(chunk_len)},
      {"bits_per_char", std::to_string(bits_per_char)},
  };
}

bool ModelConfig::apply_kv(const std::string& key, const std::string& value) {
  if (key == "num_blocks") num_blocks = kv::parse_size(key, value);
  else if (key == "hidden_dim") hidden_dim = kv::parse_size(key, value);
  else if (key == "expansion_rate") expansion_rate = kv::parse_double(key, value);
  else if (key == "attn_key_dim") attn_key_dim = kv::parse_size(key, value);
  else if (key == "activation") require(value == "swish", ErrorKind::kInvalidArgument, "activation must be swish");
  else if (key == "attn_activation")
    require(value == "relu_squared", ErrorKind::kInvalidArgument, "attn_activation must be relu_squared");
  else if (key == "abs_pos_encoding") abs_pos_encoding = parse_abs_pos(value);
  else if (key == "rel_pos_encoding") rel_pos_encoding = parse_rel_pos(value);
  else if (key == "norm") require(value == "scale_norm", ErrorKind::kInvalidArgument, "norm must be scale_norm");
  else if (key == "pooling") pooling = parse_pooling(value);
  else if (key == "gem_p") gem_p = kv::parse_double(key, value);
  else if (key == "dropout") dropout = kv::parse_double(key, value);
  else if (key == "embedding_dim") embedding_dim = kv::parse_size(key, value);
  else if (key == "chunk_len") chunk_len = kv::parse_size(key, value);
  else if (key == "bits_per_char") bits_per_char = kv::parse_size(key, value);
  else return false;
  return true;
}

}  // namespace dupsim
