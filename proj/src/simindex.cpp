#include "dupsim/simindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "dupsim/error.hpp"
#include "dupsim/kernels.hpp"
#include "dupsim/utf8.hpp"

namespace dupsim {

using nlohmann::json;

namespace {

bool result_before(const QueryResult& a, const QueryResult& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
  return a.chunk < b.chunk;
}

}  // namespace

SimIndex SimIndex::build(const std::vector<IndexEntry>& entries) {
  SimIndex idx;
  if (entries.empty()) return idx;
  idx.dim_ = entries[0].vector.dim();
  require(idx.dim_ > 0, ErrorKind::kInvalidArgument, "index vectors must have dimension >= 1");
  idx.ids_.reserve(entries.size());
  idx.chunks_.reserve(entries.size());
  idx.matrix_.reserve(entries.size() * idx.dim_);
  std::set<std::pair<std::string, std::uint32_t>> keys;
  for (const auto& e : entries) {
    require(e.vector.dim() == idx.dim_, ErrorKind::kInvalidArgument,
            "dimension mismatch for " + e.doc_id + ": " + std::to_string(e.vector.dim()) + " vs " +
                std::to_string(idx.dim_));
    double norm = 0;
    for (float v : e.vector.values) norm += static_cast<double>(v) * v;
    require(std::isfinite(norm) && std::abs(std::sqrt(norm) - 1.0) <= kUnitNormTolerance, ErrorKind::kInvalidArgument,
            "vector for " + e.doc_id + " is not unit-norm");
    require(keys.emplace(e.doc_id, e.chunk).second, ErrorKind::kInvalidArgument,
            "duplicate index key (" + e.doc_id + ", " + std::to_string(e.chunk) + ")");
    idx.ids_.push_back(e.doc_id);
    idx.chunks_.push_back(e.chunk);
    idx.matrix_.insert(idx.matrix_.end(), e.vector.values.begin(), e.vector.values.end());
  }
  return idx;
}

void SimIndex::check_query(const EmbeddingVector& q) const {
  require(size() == 0 || q.dim() == dim_, ErrorKind::kInvalidArgument,
          "query dimension " + std::to_string(q.dim()) + " does not match index dimension " + std::to_string(dim_));
}

std::vector<float> SimIndex::scores(const EmbeddingVector& query) const {
  check_query(query);
  std::vector<float> out(size());
  if (!out.empty()) kernels::active().gemm_nt(1, size(), dim_, query.values.data(), matrix_.data(), out.data(), false);
  return out;
}

std::vector<QueryResult> SimIndex::knn(const EmbeddingVector& query, std::size_t k) const {
  require(k >= 1, ErrorKind::kInvalidArgument, "k must be >= 1");
  const auto s = scores(query);
  std::vector<QueryResult> all(size());
  for (std::size_t i = 0; i < size(); ++i) all[i] = {ids_[i], chunks_[i], s[i]};
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), result_before);
  all.resize(take);
  return all;
}

std::vector<QueryResult> SimIndex::range_query(const EmbeddingVector& query, double min_similarity) const {
  const auto s = scores(query);
  std::vector<QueryResult> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (static_cast<double>(s[i]) >= min_similarity) out.push_back({ids_[i], chunks_[i], s[i]});
  std::sort(out.begin(), out.end(), result_before);
  return out;
}

std::vector<QueryResult> SimIndex::doc_knn(const std::vector<EmbeddingVector>& queries, std::size_t k) const {
  require(k >= 1, ErrorKind::kInvalidArgument, "k must be >= 1");
  require(!queries.empty(), ErrorKind::kInvalidArgument, "document query needs at least one vector");
  std::unordered_map<std::string, float> best;
  for (const auto& q : queries) {
    const auto s = scores(q);
    for (std::size_t i = 0; i < size(); ++i) {
      auto [it, fresh] = best.emplace(ids_[i], s[i]);
      if (!fresh) it->second = std::max(it->second, s[i]);
    }
  }
  std::vector<QueryResult> out;
  out.reserve(best.size());
  for (const auto& [id, sim] : best) out.push_back({id, 0, sim});
  const std::size_t take = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(take), out.end(), result_before);
  out.resize(take);
  return out;
}

std::uint64_t SimIndex::checksum() const noexcept {
  std::uint64_t h = fnv1a64(&dim_, sizeof dim_);
  for (std::size_t i = 0; i < size(); ++i) {
    h = fnv1a64(ids_[i].data(), ids_[i].size(), h);
    h = fnv1a64(&chunks_[i], sizeof chunks_[i], h);
  }
  return fnv1a64(matrix_.data(), matrix_.size() * sizeof(float), h);
}

const char* to_string(MatchMode m) noexcept { return m == MatchMode::kNearDup ? "near" : "partial"; }

MatchMode parse_match_mode(const std::string& s) {
  if (s == "near" || s == "near_dup") return MatchMode::kNearDup;
  if (s == "partial" || s == "partial_dup") return MatchMode::kPartialDup;
  fail(ErrorKind::kInvalidArgument, "unknown match mode: " + s + " (expected near or partial)");
}

std::vector<IndexEntry> match_entries(const std::vector<DocEmbedding>& docs, MatchMode mode) {
  std::vector<IndexEntry> entries;
  for (const auto& d : docs) {
    if (mode == MatchMode::kNearDup) {
      entries.push_back({d.id, 0, d.embedding.global});
    } else {
      for (std::size_t c = 0; c < d.embedding.partials.size(); ++c)
        entries.push_back({d.id, static_cast<std::uint32_t>(c), d.embedding.partials[c]});
    }
  }
  return entries;
}

SimIndex match_mode(const std::vector<DocEmbedding>& docs, MatchMode mode) {
  require(!docs.empty(), ErrorKind::kEmptyInput, "no documents to index");
  return SimIndex::build(match_entries(docs, mode));
}

std::vector<DocEmbedding> embed_documents(const std::vector<CorpusDoc>& docs, const Embedder& embedder,
                                          unsigned threads) {
  std::vector<std::u32string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(utf8::decode(d.text));
  auto embs = embedder.embed_many(texts, threads);
  std::vector<DocEmbedding> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) out.push_back({docs[i].id, std::move(embs[i])});
  return out;
}

float document_similarity(const TextEmbedding& a, const TextEmbedding& b, MatchMode mode) {
  if (mode == MatchMode::kNearDup) return cosine(a.global, b.global);
  float best = -INFINITY;
  for (const auto& pa : a.partials)
    for (const auto& pb : b.partials) best = std::max(best, cosine(pa, pb));
  return best;
}

namespace {

constexpr char kMagic[6] = {'R', 'S', 'I', 'M', 'E', '1'};

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

template <class U>
U get_le(const std::string& in, std::size_t& pos, const std::string& path) {
  require(pos + sizeof(U) <= in.size(), ErrorKind::kIntegrity, "truncated embedding file: " + path);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return static_cast<U>(v);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open embeddings: " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void check_entries(const std::vector<IndexEntry>& entries) {
  if (entries.empty()) return;
  const std::size_t dim = entries[0].vector.dim();
  for (const auto& e : entries) {
    require(e.vector.dim() == dim, ErrorKind::kInvalidArgument, "embedding dimensions differ");
    require(e.doc_id.size() <= 0xFFFF, ErrorKind::kInvalidArgument, "document id longer than 65535 bytes");
  }
}

}  // namespace

void write_embeddings_binary(const std::string& path, const std::vector<IndexEntry>& entries) {
  check_entries(entries);
  const std::uint32_t dim = entries.empty() ? 0 : static_cast<std::uint32_t>(entries[0].vector.dim());
  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kEmbeddingFormatVersion);
  put_le<std::uint32_t>(out, dim);
  put_le<std::uint64_t>(out, entries.size());
  for (const auto& e : entries) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.doc_id.size()));
    out += e.doc_id;
    put_le<std::uint32_t>(out, e.chunk);
    for (float v : e.vector.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_le<std::uint32_t>(out, bits);
    }
  }
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::kInvalidArgument, "cannot write embeddings: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<IndexEntry> read_embeddings_binary(const std::string& path) {
  const std::string in = slurp(path);
  require(in.size() >= sizeof kMagic && std::memcmp(in.data(), kMagic, sizeof kMagic) == 0, ErrorKind::kFormat,
          "not an embedding file (bad magic): " + path);
  std::size_t pos = sizeof kMagic;
  const auto version = get_le<std::uint32_t>(in, pos, path);
  require(version == kEmbeddingFormatVersion, ErrorKind::kFormat,
          "unsupported embedding file version " + std::to_string(version));
  const auto dim = get_le<std::uint32_t>(in, pos, path);
  const auto count = get_le<std::uint64_t>(in, pos, path);
  require(count == 0 || dim > 0, ErrorKind::kIntegrity, "embedding file has zero dimension");
  std::vector<IndexEntry> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    IndexEntry e;
    const auto len = get_le<std::uint16_t>(in, pos, path);
    require(pos + len <= in.size(), ErrorKind::kIntegrity, "truncated embedding file: " + path);
    e.doc_id = in.substr(pos, len);
    pos += len;
    e.chunk = get_le<std::uint32_t>(in, pos, path);
    e.vector.values.resize(dim);
    for (auto& v : e.vector.values) {
      const auto bits = get_le<std::uint32_t>(in, pos, path);
      std::memcpy(&v, &bits, sizeof v);
      require(std::isfinite(v), ErrorKind::kIntegrity, "non-finite value in embedding file: " + path);
    }
    out.push_back(std::move(e));
  }
  require(pos == in.size(), ErrorKind::kIntegrity, "trailing bytes in embedding file: " + path);
  return out;
}

void write_embeddings_jsonl(const std::string& path, const std::vector<IndexEntry>& entries) {
  check_entries(entries);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write embeddings: " + path);
  for (const auto& e : entries) out << json{{"id", e.doc_id}, {"chunk", e.chunk}, {"vec", e.vector.values}}.dump() << '\n';
}

std::vector<IndexEntry> read_embeddings_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open embeddings: " + path);
  std::vector<IndexEntry> out;
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      IndexEntry e;
      e.doc_id = j.at("id").get<std::string>();
      e.chunk = j.value("chunk", 0u);
      e.vector.values = j.at("vec").get<std::vector<float>>();
      for (float v : e.vector.values)
        require(std::isfinite(v), ErrorKind::kIntegrity, "non-finite value at line " + std::to_string(lineno));
      out.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
  }
  check_entries(out);
  return out;
}

std::vector<IndexEntry> read_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open embeddings: " + path);
  char head[sizeof kMagic] = {};
  in.read(head, sizeof head);
  if (in.gcount() == sizeof head && std::memcmp(head, kMagic, sizeof kMagic) == 0) return read_embeddings_binary(path);
  return read_embeddings_jsonl(path);
}

std::vector<DocEmbedding> group_entries(const std::vector<IndexEntry>& entries) {
  std::vector<DocEmbedding> out;
  std::unordered_map<std::string, std::size_t> where;
  for (const auto& e : entries) {
    auto [it, fresh] = where.emplace(e.doc_id, out.size());
    if (fresh) out.push_back({e.doc_id, {}});
    auto& parts = out[it->second].embedding.partials;
    require(e.chunk == parts.size(), ErrorKind::kIntegrity,
            "chunks of " + e.doc_id + " are not numbered 0..n-1 in order");
    parts.push_back(e.vector);
  }
  for (auto& d : out)
    d.embedding.global = d.embedding.partials.size() == 1 ? d.embedding.partials[0] : average_embeddings(d.embedding.partials);
  return out;
}

}  // namespace dupsim
