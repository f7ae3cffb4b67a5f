#pragma once

// MinHash and SimHash signatures over word or character shingles, plus LSH
// banding for candidate generation.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dupsim::lsh {

enum class HashKind { kMinHash, kSimHash };
enum class NgramLevel { kWord, kChar };

const char* to_string(HashKind k) noexcept;
const char* to_string(NgramLevel l) noexcept;
HashKind parse_hash_kind(std::string_view s);
NgramLevel parse_ngram_level(std::string_view s);

// Version of the hash family (FNV-1a over UTF-8, fmix64 key mixing). Any
// change to hashing must bump it; it is written into signature files.
inline constexpr std::uint32_t kHashFamilyVersion = 1;

struct HashConfig {
  HashKind kind = HashKind::kMinHash;
  std::size_t num_hashes = 10;
  std::size_t ngram_size = 3;
  NgramLevel ngram_level = NgramLevel::kWord;
  std::size_t simhash_bits = 64;
  // 0 means no banding configured.
  std::size_t lsh_bands = 0;
  std::size_t lsh_rows = 0;

  static HashConfig minhash_default();
  static HashConfig simhash_default();
  // 256 hashes banded for Jaccard 0.8.
  static HashConfig minhash_dedup();

  void validate() const;
  bool has_bands() const noexcept { return lsh_bands > 0; }
  bool operator==(const HashConfig&) const = default;
};

// Lowercase, drop punctuation, collapse whitespace runs to one space, trim.
std::u32string normalize(std::u32string_view text);

// Shingles of the normalized text in text order (a multiset). Texts shorter
// than one window give the whole normalized text as the only shingle.
std::vector<std::u32string> shingle(std::u32string_view text, const HashConfig& cfg);

// Base 64-bit hash of a shingle and the keyed family member i.
std::uint64_t shingle_hash(std::u32string_view shingle) noexcept;
std::uint64_t hash_key(std::uint64_t seed, std::size_t i) noexcept;
std::uint64_t keyed_hash(std::uint64_t base, std::uint64_t key) noexcept;

struct Signature {
  HashKind kind = HashKind::kMinHash;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> values;  // minima, or a single fingerprint

  bool operator==(const Signature&) const = default;
};

Signature minhash_signature(const std::vector<std::u32string>& shingles, const HashConfig& cfg, std::uint64_t seed);
Signature simhash_fingerprint(const std::vector<std::u32string>& shingles, const HashConfig& cfg, std::uint64_t seed);
// normalize + shingle + the configured signature.
Signature signature(std::u32string_view text, const HashConfig& cfg, std::uint64_t seed);

double estimate_jaccard(const Signature& a, const Signature& b);
unsigned hamming(const Signature& a, const Signature& b);
// Similarity in [0, 1] on the native scale: Jaccard estimate for MinHash,
// 1 - hamming / 64 for SimHash.
double similarity(const Signature& a, const Signature& b);

// (bands, rows) with bands * rows == num_hashes minimizing the equally
// weighted false-positive and false-negative areas of the S-curve.
std::pair<std::size_t, std::size_t> optimal_bands(double threshold, std::size_t num_hashes);
// Probability that a pair at similarity s shares at least one band.
double candidate_probability(double s, std::size_t bands, std::size_t rows) noexcept;

// Band buckets. Items are numbered by insertion order.
class LshIndex {
 public:
  explicit LshIndex(const HashConfig& cfg);

  std::size_t add(const Signature& sig);
  std::size_t size() const noexcept { return count_; }
  // Items sharing a band with sig, ascending, deduplicated.
  std::vector<std::size_t> query(const Signature& sig) const;
  // All pairs (i < j) sharing at least one band, sorted.
  std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs() const;

 private:
  std::vector<std::uint64_t> band_keys(const Signature& sig) const;

  HashConfig cfg_;
  std::size_t count_ = 0;
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::size_t>>> buckets_;
};

// Signature files: a header line {"format", "version", "hash_family", "kind",
// "seed", "config"} followed by {"id", "kind", "seed", "config", "sig"} lines,
// with 64-bit values as decimal strings.
struct SignatureRecord {
  std::string id;
  Signature sig;
};
struct SignatureFile {
  HashConfig config;
  std::uint64_t seed = 0;
  std::vector<SignatureRecord> records;
};
void write_signatures(const std::string& path, const SignatureFile& file);
SignatureFile read_signatures(const std::string& path);

}  // namespace dupsim::lsh
