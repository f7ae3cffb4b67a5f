#pragma once

// Keep-first corpus deduplication, cross-split duplicate rates, threshold
// clustering of a corpus and threshold sweeps. Every threshold carries its
// unit explicitly.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dupsim/cluster.hpp"
#include "dupsim/corpus.hpp"
#include "dupsim/embedder.hpp"
#include "dupsim/lsh.hpp"
#include "dupsim/metrics.hpp"

namespace dupsim::dedup {

enum class Method { kNearDup, kPartialDup, kMinHash, kSimHash };
const char* to_string(Method m) noexcept;
Method parse_method(const std::string& s);

// similarity: cosine >= v; distance: 1 - cosine <= v; jaccard: estimated
// Jaccard >= v; hamming: SimHash bit distance <= v.
enum class ThresholdKind { kSimilarity, kDistance, kJaccard, kHamming };
const char* to_string(ThresholdKind k) noexcept;
ThresholdKind parse_threshold_kind(const std::string& s);

struct Threshold {
  ThresholdKind kind;
  double value;
};

// Throws when the threshold unit does not fit the method or is out of range.
void check_threshold(Method method, const Threshold& t);

// Documents in one of the four native representations.
struct Representation {
  Method method = Method::kNearDup;
  std::vector<std::string> ids;
  std::vector<TextEmbedding> embeddings;   // near / partial
  std::vector<lsh::Signature> signatures;  // minhash / simhash
  lsh::HashConfig hash_config;

  std::size_t size() const noexcept { return ids.size(); }
  void validate() const;
};

Representation represent_embeddings(const std::vector<CorpusDoc>& docs, Method method, const Embedder& embedder,
                                    unsigned threads = 1);
Representation represent_hashes(const std::vector<CorpusDoc>& docs, const lsh::HashConfig& cfg, std::uint64_t seed);

// Exact cosine with identical vectors scoring exactly 1.
double exact_cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Native score of (a[i], b[j]): cosine, max chunk cosine, Jaccard estimate or
// Hamming distance.
double pair_score(const Representation& a, std::size_t i, const Representation& b, std::size_t j);
bool passes(Method method, const Threshold& t, double score);

struct DupPair {
  std::string duplicate_id;
  std::string matched_id;
  double score;
};

struct DedupReport {
  Method method;
  Threshold threshold;
  std::size_t total = 0;
  std::size_t duplicates = 0;
  double dedup_rate = 0;
  std::vector<bool> is_duplicate;  // aligned with the scanned documents
  std::vector<DupPair> pairs;      // best earlier match per duplicate
};

// Scans in order; a document is a duplicate when an earlier kept document
// passes the threshold. MinHash uses LSH candidates when bands are set.
DedupReport dedup_corpus(const Representation& rep, const Threshold& t);
// Fraction of `queries` documents with a match anywhere in `reference`.
DedupReport dedup_cross(const Representation& reference, const Representation& queries, const Threshold& t);

// Dense n x n matrix of similarity-oriented scores (larger is closer; the
// Hamming distance is negated) and the matching oriented threshold.
std::vector<double> oriented_matrix(const Representation& rep);
double oriented_threshold(Method method, const Threshold& t);

std::vector<std::size_t> cluster_documents(const Representation& rep, cluster::Linkage linkage, const Threshold& t);

struct SweepRow {
  double threshold;
  metrics::PairwiseMetrics metrics;
};
struct SweepResult {
  ThresholdKind kind;
  std::vector<SweepRow> rows;
  double best_threshold = 0;  // argmax duplicate-class F1, first on ties
  double best_f1 = 0;
};

// Re-clusters at each threshold and scores same-cluster pairs against gold.
SweepResult threshold_sweep(const Representation& rep, const metrics::Labels& truth, ThresholdKind kind,
                            const std::vector<double>& thresholds,
                            cluster::Linkage linkage = cluster::Linkage::kConnectedComponents);
// 0.01 steps over [0, 1] for similarity, distance and Jaccard; 0..64 for Hamming.
std::vector<double> default_grid(ThresholdKind kind);
void write_sweep_csv(const std::string& path, const SweepResult& sweep);

}  // namespace dupsim::dedup
