#pragma once

// Exact cosine search over unit vectors, near/partial document matching and
// the embedding file formats.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dupsim/corpus.hpp"
#include "dupsim/embedder.hpp"

namespace dupsim {

struct IndexEntry {
  std::string doc_id;
  std::uint32_t chunk = 0;  // 0 for global embeddings
  EmbeddingVector vector;

  bool operator==(const IndexEntry&) const = default;
};

struct QueryResult {
  std::string doc_id;
  std::uint32_t chunk = 0;
  float similarity = 0;

  bool operator==(const QueryResult&) const = default;
};

// Vectors further than this from unit norm are rejected.
inline constexpr double kUnitNormTolerance = 1e-3;

// Sealed after construction; every query method is const and safe to call
// from many threads.
class SimIndex {
 public:
  SimIndex() = default;
  // Throws on dimension mismatch, non-unit vectors or duplicate keys.
  static SimIndex build(const std::vector<IndexEntry>& entries);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::string& doc_id(std::size_t i) const { return ids_[i]; }
  std::uint32_t chunk(std::size_t i) const { return chunks_[i]; }
  const float* vector(std::size_t i) const { return matrix_.data() + i * dim_; }

  // Dot product against every entry, in entry order.
  std::vector<float> scores(const EmbeddingVector& query) const;
  // Top k by similarity; ties by (doc_id, chunk) ascending.
  std::vector<QueryResult> knn(const EmbeddingVector& query, std::size_t k) const;
  // Every entry with similarity >= min_similarity, sorted as knn.
  std::vector<QueryResult> range_query(const EmbeddingVector& query, double min_similarity) const;
  // Document-level ranking: each document scores the max over its entries
  // and over the query vectors. Ties by doc_id.
  std::vector<QueryResult> doc_knn(const std::vector<EmbeddingVector>& queries, std::size_t k) const;

  std::uint64_t checksum() const noexcept;

 private:
  void check_query(const EmbeddingVector& q) const;

  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<std::uint32_t> chunks_;
  std::vector<float> matrix_;
};

enum class MatchMode { kNearDup, kPartialDup };
const char* to_string(MatchMode m) noexcept;
MatchMode parse_match_mode(const std::string& s);

struct DocEmbedding {
  std::string id;
  TextEmbedding embedding;
};

// near_dup: one global vector per document (chunk 0); partial_dup: one entry
// per chunk.
std::vector<IndexEntry> match_entries(const std::vector<DocEmbedding>& docs, MatchMode mode);
SimIndex match_mode(const std::vector<DocEmbedding>& docs, MatchMode mode);
std::vector<DocEmbedding> embed_documents(const std::vector<CorpusDoc>& docs, const Embedder& embedder,
                                          unsigned threads = 1);

// near_dup: cosine of the globals; partial_dup: max cosine over chunk pairs.
float document_similarity(const TextEmbedding& a, const TextEmbedding& b, MatchMode mode);

// Embedding files: binary ("RSIME1") or JSONL {"id", "chunk", "vec"}.
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
void write_embeddings_binary(const std::string& path, const std::vector<IndexEntry>& entries);
void write_embeddings_jsonl(const std::string& path, const std::vector<IndexEntry>& entries);
std::vector<IndexEntry> read_embeddings_binary(const std::string& path);
std::vector<IndexEntry> read_embeddings_jsonl(const std::string& path);
// Picks the reader from the file's leading bytes.
std::vector<IndexEntry> read_embeddings(const std::string& path);

// Groups entries back into per-document embeddings in first-appearance
// order. Chunk ordinals must be 0..n-1 per document; the global vector is
// the renormalized mean of the chunks.
std::vector<DocEmbedding> group_entries(const std::vector<IndexEntry>& entries);

}  // namespace dupsim
