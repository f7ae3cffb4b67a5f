#pragma once

// Recall@k over a benchmark: every target is indexed, every query searched.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dupsim/benchmark.hpp"
#include "dupsim/embedder.hpp"
#include "dupsim/lsh.hpp"
#include "dupsim/simindex.hpp"

namespace dupsim {

struct RetrievalReport {
  std::string method;
  std::size_t queries = 0;
  std::map<std::size_t, double> recall_at_k;
};

// Throws on duplicate pair ids.
void check_unique_targets(const std::vector<BenchmarkRecord>& records);

// Ranks targets for every query from precomputed embeddings. near: globals;
// partial: best chunk pair per target document.
RetrievalReport eval_retrieval_embeddings(const std::vector<DocEmbedding>& targets,
                                          const std::vector<DocEmbedding>& queries, MatchMode mode,
                                          const std::vector<std::size_t>& ks);
RetrievalReport eval_retrieval_model(const std::vector<BenchmarkRecord>& records, const Embedder& embedder,
                                     MatchMode mode, const std::vector<std::size_t>& ks, unsigned threads = 1);
// Ranking by estimated Jaccard (MinHash) or by Hamming distance (SimHash),
// ties by target id.
RetrievalReport eval_retrieval_hashes(const std::vector<BenchmarkRecord>& records, const lsh::HashConfig& cfg,
                                      std::uint64_t seed, const std::vector<std::size_t>& ks);

}  // namespace dupsim
