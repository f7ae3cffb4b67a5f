#include "dupsim/retrieval.hpp"

#include <algorithm>
#include <set>

#include "dupsim/error.hpp"
#include "dupsim/metrics.hpp"

namespace dupsim {

void check_unique_targets(const std::vector<BenchmarkRecord>& records) {
  std::set<std::string> seen;
  for (const auto& r : records)
    require(seen.insert(r.pair_id).second, ErrorKind::kInvalidArgument, "duplicate target id: " + r.pair_id);
}

namespace {

std::size_t max_k(const std::vector<std::size_t>& ks) {
  require(!ks.empty(), ErrorKind::kInvalidArgument, "no k values given");
  for (auto k : ks) require(k >= 1, ErrorKind::kInvalidArgument, "k must be >= 1");
  return *std::max_element(ks.begin(), ks.end());
}

RetrievalReport score(std::string method, const std::vector<std::vector<std::string>>& ranked,
                      const std::vector<std::string>& truth, const std::vector<std::size_t>& ks) {
  RetrievalReport r{std::move(method), ranked.size(), {}};
  for (auto k : ks) r.recall_at_k[k] = metrics::recall_at_k(ranked, truth, k);
  return r;
}

}  // namespace

RetrievalReport eval_retrieval_embeddings(const std::vector<DocEmbedding>& targets,
                                          const std::vector<DocEmbedding>& queries, MatchMode mode,
                                          const std::vector<std::size_t>& ks) {
  const std::size_t k = max_k(ks);
  require(!queries.empty(), ErrorKind::kEmptyInput, "no queries to evaluate");
  const SimIndex index = match_mode(targets, mode);
  std::vector<std::vector<std::string>> ranked;
  std::vector<std::string> truth;
  for (const auto& q : queries) {
    std::vector<QueryResult> hits = mode == MatchMode::kNearDup ? index.knn(q.embedding.global, k)
                                                                : index.doc_knn(q.embedding.partials, k);
    std::vector<std::string> ids;
    for (auto& h : hits) ids.push_back(std::move(h.doc_id));
    ranked.push_back(std::move(ids));
    truth.push_back(q.id);
  }
  return score(to_string(mode), ranked, truth, ks);
}

RetrievalReport eval_retrieval_model(const std::vector<BenchmarkRecord>& records, const Embedder& embedder,
                                     MatchMode mode, const std::vector<std::size_t>& ks, unsigned threads) {
  require(!records.empty(), ErrorKind::kEmptyInput, "benchmark is empty");
  check_unique_targets(records);
  std::vector<std::u32string> targets, queries;
  for (const auto& r : records) {
    targets.push_back(r.target_text);
    queries.push_back(r.query_text);
  }
  auto te = embedder.embed_many(targets, threads);
  auto qe = embedder.embed_many(queries, threads);
  std::vector<DocEmbedding> t, q;
  for (std::size_t i = 0; i < records.size(); ++i) {
    t.push_back({records[i].pair_id, std::move(te[i])});
    q.push_back({records[i].pair_id, std::move(qe[i])});
  }
  return eval_retrieval_embeddings(t, q, mode, ks);
}

RetrievalReport eval_retrieval_hashes(const std::vector<BenchmarkRecord>& records, const lsh::HashConfig& cfg,
                                      std::uint64_t seed, const std::vector<std::size_t>& ks) {
  const std::size_t k = max_k(ks);
  require(!records.empty(), ErrorKind::kEmptyInput, "benchmark is empty");
  check_unique_targets(records);
  std::vector<lsh::Signature> targets;
  for (const auto& r : records) targets.push_back(lsh::signature(r.target_text, cfg, seed));
  std::vector<std::vector<std::string>> ranked;
  std::vector<std::string> truth;
  std::vector<std::pair<double, const std::string*>> scored(records.size());
  for (const auto& r : records) {
    const auto qs = lsh::signature(r.query_text, cfg, seed);
    for (std::size_t i = 0; i < records.size(); ++i) {
      // Larger is better: Jaccard estimate, or negated Hamming distance.
      const double s = cfg.kind == lsh::HashKind::kMinHash ? lsh::estimate_jaccard(qs, targets[i])
                                                           : -static_cast<double>(lsh::hamming(qs, targets[i]));
      scored[i] = {s, &records[i].pair_id};
    }
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : *a.second < *b.second; });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < take; ++i) ids.push_back(*scored[i].second);
    ranked.push_back(std::move(ids));
    truth.push_back(r.pair_id);
  }
  return score(lsh::to_string(cfg.kind), ranked, truth, ks);
}

}  // namespace dupsim
