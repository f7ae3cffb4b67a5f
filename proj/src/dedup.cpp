#include "dupsim/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "dupsim/error.hpp"
#include "dupsim/kernels.hpp"
#include "dupsim/kvconfig.hpp"
#include "dupsim/utf8.hpp"

namespace dupsim::dedup {

namespace {
// Float scores within this margin of the threshold are rechecked exactly.
constexpr double kPrefilterMargin = 1e-4;
}  // namespace

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::kNearDup: return "near";
    case Method::kPartialDup: return "partial";
    case Method::kMinHash: return "minhash";
    case Method::kSimHash: return "simhash";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::kNearDup, Method::kPartialDup, Method::kMinHash, Method::kSimHash})
    if (s == to_string(m)) return m;
  fail(ErrorKind::kInvalidArgument, "unknown method: " + s + " (expected near, partial, minhash or simhash)");
}

const char* to_string(ThresholdKind k) noexcept {
  switch (k) {
    case ThresholdKind::kSimilarity: return "similarity";
    case ThresholdKind::kDistance: return "distance";
    case ThresholdKind::kJaccard: return "jaccard";
    case ThresholdKind::kHamming: return "hamming";
  }
  return "?";
}

ThresholdKind parse_threshold_kind(const std::string& s) {
  for (ThresholdKind k :
       {ThresholdKind::kSimilarity, ThresholdKind::kDistance, ThresholdKind::kJaccard, ThresholdKind::kHamming})
    if (s == to_string(k)) return k;
  fail(ErrorKind::kInvalidArgument,
       "unknown threshold kind: " + s + " (expected similarity, distance, jaccard or hamming)");
}

void check_threshold(Method method, const Threshold& t) {
  const bool embedding = method == Method::kNearDup || method == Method::kPartialDup;
  switch (t.kind) {
    case ThresholdKind::kSimilarity:
    case ThresholdKind::kDistance:
      require(embedding, ErrorKind::kInvalidArgument,
              std::string(to_string(t.kind)) + " thresholds apply to embedding methods, not " + to_string(method));
      require(t.kind == ThresholdKind::kSimilarity ? (t.value >= -1 && t.value <= 1) : (t.value >= 0 && t.value <= 2),
              ErrorKind::kInvalidArgument, "cosine threshold out of range");
      break;
    case ThresholdKind::kJaccard:
      require(method == Method::kMinHash, ErrorKind::kInvalidArgument, "jaccard thresholds apply to minhash only");
      require(t.value >= 0 && t.value <= 1, ErrorKind::kInvalidArgument, "jaccard threshold must be in [0, 1]");
      break;
    case ThresholdKind::kHamming:
      require(method == Method::kSimHash, ErrorKind::kInvalidArgument, "hamming thresholds apply to simhash only");
      require(t.value >= 0 && t.value <= 64, ErrorKind::kInvalidArgument, "hamming threshold must be in [0, 64]");
      break;
  }
}

void Representation::validate() const {
  if (method == Method::kNearDup || method == Method::kPartialDup)
    require(embeddings.size() == ids.size(), ErrorKind::kInvalidArgument, "representation lacks embeddings");
  else
    require(signatures.size() == ids.size(), ErrorKind::kInvalidArgument, "representation lacks signatures");
}

Representation represent_embeddings(const std::vector<CorpusDoc>& docs, Method method, const Embedder& embedder,
                                    unsigned threads) {
  require(method == Method::kNearDup || method == Method::kPartialDup, ErrorKind::kInvalidArgument,
          "embedding representation needs the near or partial method");
  Representation r;
  r.method = method;
  std::vector<std::u32string> texts;
  for (const auto& d : docs) {
    r.ids.push_back(d.id);
    texts.push_back(utf8::decode(d.text));
  }
  r.embeddings = embedder.embed_many(texts, threads);
  return r;
}

Representation represent_hashes(const std::vector<CorpusDoc>& docs, const lsh::HashConfig& cfg, std::uint64_t seed) {
  Representation r;
  r.method = cfg.kind == lsh::HashKind::kMinHash ? Method::kMinHash : Method::kSimHash;
  r.hash_config = cfg;
  for (const auto& d : docs) {
    r.ids.push_back(d.id);
    r.signatures.push_back(lsh::signature(utf8::decode(d.text), cfg, seed));
  }
  return r;
}

double exact_cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  require(a.dim() == b.dim(), ErrorKind::kConfigMismatch, "embedding dimension mismatch");
  if (a.values == b.values) return 1.0;
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += static_cast<double>(a.values[i]) * b.values[i];
    na += static_cast<double>(a.values[i]) * a.values[i];
    nb += static_cast<double>(b.values[i]) * b.values[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double pair_score(const Representation& a, std::size_t i, const Representation& b, std::size_t j) {
  require(a.method == b.method, ErrorKind::kInvalidArgument, "representations use different methods");
  switch (a.method) {
    case Method::kNearDup: return exact_cosine(a.embeddings[i].global, b.embeddings[j].global);
    case Method::kPartialDup: {
      double best = -1;
      for (const auto& pa : a.embeddings[i].partials)
        for (const auto& pb : b.embeddings[j].partials) best = std::max(best, exact_cosine(pa, pb));
      return best;
    }
    case Method::kMinHash: return lsh::estimate_jaccard(a.signatures[i], b.signatures[j]);
    case Method::kSimHash: return lsh::hamming(a.signatures[i], b.signatures[j]);
  }
  return 0;
}

bool passes(Method method, const Threshold& t, double score) {
  switch (t.kind) {
    case ThresholdKind::kSimilarity: return score >= t.value;
    case ThresholdKind::kDistance: return 1.0 - score <= t.value;
    case ThresholdKind::kJaccard: return score >= t.value;
    case ThresholdKind::kHamming: return score <= t.value;
  }
  (void)method;
  return false;
}

double oriented_threshold(Method method, const Threshold& t) {
  check_threshold(method, t);
  switch (t.kind) {
    case ThresholdKind::kSimilarity:
    case ThresholdKind::kJaccard: return t.value;
    case ThresholdKind::kDistance: return 1.0 - t.value;
    case ThresholdKind::kHamming: return -t.value;
  }
  return 0;
}

namespace {

// Rows of unit vectors with the document each row belongs to.
struct VectorBank {
  std::size_t dim = 0;
  std::vector<float> rows;
  std::vector<std::size_t> owner;

  void add(const EmbeddingVector& v, std::size_t doc) {
    if (owner.empty()) dim = v.dim();
    require(v.dim() == dim, ErrorKind::kConfigMismatch, "embedding dimension mismatch");
    rows.insert(rows.end(), v.values.begin(), v.values.end());
    owner.push_back(doc);
  }
};

const std::vector<EmbeddingVector>& vectors_of(const Representation& r, std::size_t i, std::vector<EmbeddingVector>& tmp) {
  if (r.method == Method::kPartialDup) return r.embeddings[i].partials;
  tmp.assign(1, r.embeddings[i].global);
  return tmp;
}

// Best passing match of query document q against the bank, by exact score
// (earliest document on ties). Returns false when nothing passes.
bool best_embedding_match(const Representation& qrep, std::size_t q, const Representation& brep, const VectorBank& bank,
                          const Threshold& t, std::size_t& match, double& score) {
  if (bank.owner.empty()) return false;
  const double floor = oriented_threshold(qrep.method, t) - kPrefilterMargin;
  std::vector<EmbeddingVector> tmp;
  std::vector<float> s(bank.owner.size());
  std::vector<std::size_t> candidates;
  for (const auto& v : vectors_of(qrep, q, tmp)) {
    kernels::active().gemm_nt(1, bank.owner.size(), bank.dim, v.values.data(), bank.rows.data(), s.data(), false);
    for (std::size_t r = 0; r < s.size(); ++r)
      if (s[r] >= floor) candidates.push_back(bank.owner[r]);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  bool found = false;
  for (std::size_t c : candidates) {
    const double sc = pair_score(qrep, q, brep, c);
    if (passes(qrep.method, t, sc) && (!found || sc > score)) {
      found = true;
      match = c;
      score = sc;
    }
  }
  return found;
}

class Matcher {
 public:
  Matcher(const Representation& bank_rep, const Threshold& t) : rep_(bank_rep), t_(t) {
    if (rep_.method == Method::kMinHash && rep_.hash_config.has_bands()) lsh_.emplace(rep_.hash_config);
  }

  void add(std::size_t doc) {
    members_.push_back(doc);
    if (rep_.method == Method::kNearDup || rep_.method == Method::kPartialDup) {
      std::vector<EmbeddingVector> tmp;
      for (const auto& v : vectors_of(rep_, doc, tmp)) bank_.add(v, doc);
    } else if (rep_.method == Method::kSimHash) {
      fps_.push_back(rep_.signatures[doc].values[0]);
    } else if (lsh_) {
      lsh_->add(rep_.signatures[doc]);
    }
  }

  bool best(const Representation& qrep, std::size_t q, std::size_t& match, double& score) const {
    switch (rep_.method) {
      case Method::kNearDup:
      case Method::kPartialDup: return best_embedding_match(qrep, q, rep_, bank_, t_, match, score);
      case Method::kSimHash: {
        if (fps_.empty()) return false;
        std::vector<std::uint32_t> h(fps_.size());
        require(qrep.signatures[q].seed == rep_.signatures[members_[0]].seed, ErrorKind::kInvalidArgument,
                "SimHash fingerprints differ in seed");
        kernels::active().hamming_batch(qrep.signatures[q].values[0], fps_.data(), fps_.size(), h.data());
        bool found = false;
        for (std::size_t i = 0; i < h.size(); ++i)
          if (passes(rep_.method, t_, h[i]) && (!found || h[i] < score)) {
            found = true;
            match = members_[i];
            score = h[i];
          }
        return found;
      }
      case Method::kMinHash: {
        std::vector<std::size_t> cand;
        if (lsh_) cand = lsh_->query(qrep.signatures[q]);
        else {
          cand.resize(members_.size());
          for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = i;
        }
        bool found = false;
        for (std::size_t i : cand) {
          const double sc = lsh::estimate_jaccard(qrep.signatures[q], rep_.signatures[members_[i]]);
          if (passes(rep_.method, t_, sc) && (!found || sc > score)) {
            found = true;
            match = members_[i];
            score = sc;
          }
        }
        return found;
      }
    }
    return false;
  }

 private:
  const Representation& rep_;
  Threshold t_;
  std::vector<std::size_t> members_;
  VectorBank bank_;
  std::vector<std::uint64_t> fps_;
  std::optional<lsh::LshIndex> lsh_;
};

DedupReport empty_report(Method m, const Threshold& t, std::size_t n) {
  DedupReport r;
  r.method = m;
  r.threshold = t;
  r.total = n;
  r.is_duplicate.assign(n, false);
  return r;
}

void finish(DedupReport& r) {
  r.dedup_rate = r.total ? static_cast<double>(r.duplicates) / static_cast<double>(r.total) : 0.0;
}

}  // namespace

DedupReport dedup_corpus(const Representation& rep, const Threshold& t) {
  rep.validate();
  check_threshold(rep.method, t);
  DedupReport report = empty_report(rep.method, t, rep.size());
  Matcher kept(rep, t);
  for (std::size_t i = 0; i < rep.size(); ++i) {
    std::size_t match = 0;
    double score = 0;
    if (kept.best(rep, i, match, score)) {
      report.is_duplicate[i] = true;
      ++report.duplicates;
      report.pairs.push_back({rep.ids[i], rep.ids[match], score});
    } else {
      kept.add(i);
    }
  }
  finish(report);
  return report;
}

DedupReport dedup_cross(const Representation& reference, const Representation& queries, const Threshold& t) {
  reference.validate();
  queries.validate();
  require(reference.method == queries.method, ErrorKind::kInvalidArgument, "splits use different methods");
  check_threshold(reference.method, t);
  DedupReport report = empty_report(reference.method, t, queries.size());
  Matcher bank(reference, t);
  for (std::size_t i = 0; i < reference.size(); ++i) bank.add(i);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    std::size_t match = 0;
    double score = 0;
    if (bank.best(queries, i, match, score)) {
      report.is_duplicate[i] = true;
      ++report.duplicates;
      report.pairs.push_back({queries.ids[i], reference.ids[match], score});
    }
  }
  finish(report);
  return report;
}

std::vector<double> oriented_matrix(const Representation& rep) {
  rep.validate();
  const std::size_t n = rep.size();
  std::vector<double> m(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = pair_score(rep, i, rep, j);
      if (rep.method == Method::kSimHash) s = -s;
      m[i * n + j] = m[j * n + i] = s;
    }
  return m;
}

std::vector<std::size_t> cluster_documents(const Representation& rep, cluster::Linkage linkage, const Threshold& t) {
  require(rep.size() > 0, ErrorKind::kEmptyInput, "nothing to cluster");
  const double thr = oriented_threshold(rep.method, t);
  return cluster::cluster_matrix(oriented_matrix(rep), rep.size(), linkage, thr);
}

SweepResult threshold_sweep(const Representation& rep, const metrics::Labels& truth, ThresholdKind kind,
                            const std::vector<double>& thresholds, cluster::Linkage linkage) {
  require(!thresholds.empty(), ErrorKind::kInvalidArgument, "threshold list is empty");
  require(std::is_sorted(thresholds.begin(), thresholds.end()), ErrorKind::kInvalidArgument,
          "thresholds must be sorted ascending");
  require(truth.size() == rep.size(), ErrorKind::kInvalidArgument, "gold labels do not cover the documents");
  require(rep.size() >= 2, ErrorKind::kInvalidArgument, "a sweep needs at least two documents");
  const auto matrix = oriented_matrix(rep);
  const auto gold_pairs = metrics::same_cluster_pairs(truth);
  SweepResult out{kind, {}, thresholds.front(), -1};
  for (double v : thresholds) {
    const Threshold t{kind, v};
    const auto labels = cluster::cluster_matrix(matrix, rep.size(), linkage, oriented_threshold(rep.method, t));
    const metrics::Labels pred(labels.begin(), labels.end());
    out.rows.push_back({v, metrics::pairwise_classification(metrics::same_cluster_pairs(pred), gold_pairs)});
    if (out.rows.back().metrics.duplicate.f1 > out.best_f1) {
      out.best_f1 = out.rows.back().metrics.duplicate.f1;
      out.best_threshold = v;
    }
  }
  return out;
}

std::vector<double> default_grid(ThresholdKind kind) {
  std::vector<double> g;
  if (kind == ThresholdKind::kHamming) {
    for (int i = 0; i <= 64; ++i) g.push_back(i);
  } else {
    for (int i = 0; i <= 100; ++i) g.push_back(i / 100.0);
  }
  return g;
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write sweep: " + path);
  out << "threshold_kind,threshold,precision,recall,f1,macro_f1,accuracy\n";
  for (const auto& r : sweep.rows)
    out << to_string(sweep.kind) << ',' << kv::format_double(r.threshold) << ','
        << kv::format_double(r.metrics.duplicate.precision) << ',' << kv::format_double(r.metrics.duplicate.recall)
        << ',' << kv::format_double(r.metrics.duplicate.f1) << ',' << kv::format_double(r.metrics.macro_f1) << ','
        << kv::format_double(r.metrics.accuracy) << '\n';
}

}  // namespace dupsim::dedup
