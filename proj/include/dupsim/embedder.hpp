#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dupsim/network.hpp"
#include "dupsim/params.hpp"

namespace dupsim {

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// Per-chunk (partial) embeddings and their renormalized mean (global),
// both from a single pass over the chunks.
struct TextEmbedding {
  std::vector<EmbeddingVector> partials;
  EmbeddingVector global;
};

// L2-normalized arithmetic mean of unit vectors.
EmbeddingVector average_embeddings(const std::vector<EmbeddingVector>& parts);

float cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Immutable inference wrapper; safe to share across threads.
class Embedder {
 public:
  explicit Embedder(ModelParams params);

  const ModelParams& params() const noexcept { return params_; }
  const ModelConfig& config() const noexcept { return params_.config(); }

  EmbeddingVector forward_chunk(const textcodec::CharMatrix& m) const;
  TextEmbedding embed_text(std::u32string_view text) const;
  TextEmbedding embed_utf8(std::string_view text) const;

  // Embeds many texts, fanning out over `threads` workers. Output order
  // matches input order regardless of thread count.
  std::vector<TextEmbedding> embed_many(const std::vector<std::u32string>& texts, unsigned threads = 1) const;

 private:
  ModelParams params_;
  GauNetwork<float> net_;
};

}  // namespace dupsim
