#include "dupsim/embedder.hpp"

#include <cmath>
#include <thread>

#include "dupsim/error.hpp"
#include "dupsim/kernels.hpp"
#include "dupsim/utf8.hpp"

namespace dupsim {

EmbeddingVector average_embeddings(const std::vector<EmbeddingVector>& parts) {
  require(!parts.empty(), ErrorKind::kEmptyInput, "cannot average zero embeddings");
  const std::size_t dim = parts.front().dim();
  std::vector<double> acc(dim, 0.0);
  for (const auto& p : parts) {
    require(p.dim() == dim, ErrorKind::kConfigMismatch, "embedding dimension mismatch while averaging");
    for (std::size_t j = 0; j < dim; ++j) acc[j] += p.values[j];
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  require(norm > 0.0 && std::isfinite(norm), ErrorKind::kNumeric, "mean embedding has zero norm");
  EmbeddingVector out;
  out.values.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) out.values[j] = static_cast<float>(acc[j] / norm);
  return out;
}

float cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  require(a.dim() == b.dim(), ErrorKind::kConfigMismatch, "embedding dimension mismatch");
  return kernels::dot(a.values.data(), b.values.data(), a.dim());
}

Embedder::Embedder(ModelParams params) : params_(std::move(params)), net_(params_.config()) {}

EmbeddingVector Embedder::forward_chunk(const textcodec::CharMatrix& m) const {
  return EmbeddingVector{net_.forward(params_, m)};
}

TextEmbedding Embedder::embed_text(std::u32string_view text) const {
  require(!text.empty(), ErrorKind::kEmptyInput, "cannot embed empty text");
  const auto codec = config().codec();
  TextEmbedding out;
  for (const auto& chunk : textcodec::chunk_text(text, codec))
    out.partials.push_back(forward_chunk(textcodec::vectorize_chunk(chunk, codec)));
  out.global = out.partials.size() == 1 ? out.partials.front() : average_embeddings(out.partials);
  return out;
}

TextEmbedding Embedder::embed_utf8(std::string_view text) const { return embed_text(utf8::decode(text)); }

std::vector<TextEmbedding> Embedder::embed_many(const std::vector<std::u32string>& texts, unsigned threads) const {
  std::vector<TextEmbedding> out(texts.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(texts.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < texts.size(); ++i) out[i] = embed_text(texts[i]);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < texts.size(); i += threads) out[i] = embed_text(texts[i]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace dupsim
