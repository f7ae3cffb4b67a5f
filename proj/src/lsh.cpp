#include "dupsim/lsh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "dupsim/error.hpp"
#include "dupsim/kernels.hpp"
#include "dupsim/params.hpp"
#include "dupsim/rng.hpp"
#include "dupsim/unicode.hpp"
#include "dupsim/utf8.hpp"

namespace dupsim::lsh {

using nlohmann::json;

const char* to_string(HashKind k) noexcept { return k == HashKind::kMinHash ? "minhash" : "simhash"; }
const char* to_string(NgramLevel l) noexcept { return l == NgramLevel::kWord ? "word" : "char"; }

HashKind parse_hash_kind(std::string_view s) {
  if (s == "minhash") return HashKind::kMinHash;
  if (s == "simhash") return HashKind::kSimHash;
  fail(ErrorKind::kInvalidArgument, "unknown hash kind: " + std::string(s));
}

NgramLevel parse_ngram_level(std::string_view s) {
  if (s == "word") return NgramLevel::kWord;
  if (s == "char") return NgramLevel::kChar;
  fail(ErrorKind::kInvalidArgument, "unknown n-gram level: " + std::string(s));
}

HashConfig HashConfig::minhash_default() { return {}; }

HashConfig HashConfig::simhash_default() {
  HashConfig c;
  c.kind = HashKind::kSimHash;
  c.num_hashes = 1;
  c.ngram_size = 5;
  c.ngram_level = NgramLevel::kChar;
  return c;
}

HashConfig HashConfig::minhash_dedup() {
  HashConfig c;
  c.num_hashes = 256;
  std::tie(c.lsh_bands, c.lsh_rows) = optimal_bands(0.8, 256);
  return c;
}

void HashConfig::validate() const {
  require(ngram_size >= 1, ErrorKind::kInvalidArgument, "ngram_size must be >= 1");
  if (kind == HashKind::kMinHash) {
    require(num_hashes >= 1, ErrorKind::kInvalidArgument, "num_hashes must be >= 1");
    if (lsh_bands || lsh_rows)
      require(lsh_bands * lsh_rows == num_hashes, ErrorKind::kInvalidArgument,
              "lsh_bands x lsh_rows must equal num_hashes (" + std::to_string(lsh_bands) + " x " +
                  std::to_string(lsh_rows) + " != " + std::to_string(num_hashes) + ")");
  } else {
    require(simhash_bits == 64, ErrorKind::kInvalidArgument, "only 64-bit SimHash is supported");
    if (lsh_bands || lsh_rows)
      require(lsh_bands * lsh_rows == simhash_bits, ErrorKind::kInvalidArgument,
              "SimHash lsh_bands x lsh_rows must equal 64");
  }
}

std::u32string normalize(std::u32string_view text) {
  std::u32string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char32_t c : text) {
    if (unicode::is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (unicode::is_punctuation(c)) continue;
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(unicode::to_lower(c));
  }
  return out;
}

std::vector<std::u32string> shingle(std::u32string_view text, const HashConfig& cfg) {
  require(cfg.ngram_size >= 1, ErrorKind::kInvalidArgument, "ngram_size must be >= 1");
  const std::u32string norm = normalize(text);
  require(!norm.empty(), ErrorKind::kEmptyInput, "text is empty after normalization");
  const std::size_t n = cfg.ngram_size;
  std::vector<std::u32string> out;
  if (cfg.ngram_level == NgramLevel::kChar) {
    if (norm.size() <= n) return {norm};
    for (std::size_t i = 0; i + n <= norm.size(); ++i) out.push_back(norm.substr(i, n));
    return out;
  }
  // Word windows; offsets of word starts in the normalized (single-spaced) text.
  std::vector<std::size_t> starts{0};
  for (std::size_t i = 0; i < norm.size(); ++i)
    if (norm[i] == U' ') starts.push_back(i + 1);
  if (starts.size() <= n) return {norm};
  starts.push_back(norm.size() + 1);
  for (std::size_t w = 0; w + n < starts.size(); ++w)
    out.push_back(norm.substr(starts[w], starts[w + n] - 1 - starts[w]));
  return out;
}

namespace {
constexpr std::uint64_t fmix64(std::uint64_t k) noexcept {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdull;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ull;
  k ^= k >> 33;
  return k;
}
}  // namespace

std::uint64_t shingle_hash(std::u32string_view s) noexcept {
  std::string bytes;
  for (char32_t c : s) utf8::append(bytes, c);
  return fnv1a64(bytes.data(), bytes.size());
}

std::uint64_t hash_key(std::uint64_t seed, std::size_t i) noexcept { return derive_seed(seed, 0x6d696e68ull, i); }

std::uint64_t keyed_hash(std::uint64_t base, std::uint64_t key) noexcept { return fmix64(base ^ key); }

Signature minhash_signature(const std::vector<std::u32string>& shingles, const HashConfig& cfg, std::uint64_t seed) {
  require(!shingles.empty(), ErrorKind::kEmptyInput, "MinHash needs at least one shingle");
  require(cfg.num_hashes >= 1, ErrorKind::kInvalidArgument, "num_hashes must be >= 1");
  std::vector<std::uint64_t> bases;
  bases.reserve(shingles.size());
  for (const auto& s : shingles) bases.push_back(shingle_hash(s));
  std::sort(bases.begin(), bases.end());
  bases.erase(std::unique(bases.begin(), bases.end()), bases.end());
  Signature sig{HashKind::kMinHash, seed, std::vector<std::uint64_t>(cfg.num_hashes)};
  for (std::size_t i = 0; i < cfg.num_hashes; ++i) {
    const std::uint64_t key = hash_key(seed, i);
    std::uint64_t m = std::numeric_limits<std::uint64_t>::max();
    for (std::uint64_t b : bases) m = std::min(m, keyed_hash(b, key));
    sig.values[i] = m;
  }
  return sig;
}

Signature simhash_fingerprint(const std::vector<std::u32string>& shingles, const HashConfig& cfg, std::uint64_t seed) {
  require(!shingles.empty(), ErrorKind::kEmptyInput, "SimHash needs at least one shingle");
  require(cfg.simhash_bits == 64, ErrorKind::kInvalidArgument, "only 64-bit SimHash is supported");
  const std::uint64_t key = hash_key(seed, 0);
  std::int32_t counters[64] = {};
  const auto& k = kernels::active();
  for (const auto& s : shingles) k.simhash_accumulate(keyed_hash(shingle_hash(s), key), 1, counters);
  std::uint64_t fp = 0;
  for (int b = 0; b < 64; ++b)
    if (counters[b] >= 0) fp |= 1ull << b;
  return {HashKind::kSimHash, seed, {fp}};
}

Signature signature(std::u32string_view text, const HashConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto sh = shingle(text, cfg);
  return cfg.kind == HashKind::kMinHash ? minhash_signature(sh, cfg, seed) : simhash_fingerprint(sh, cfg, seed);
}

double estimate_jaccard(const Signature& a, const Signature& b) {
  require(a.kind == HashKind::kMinHash && b.kind == HashKind::kMinHash, ErrorKind::kInvalidArgument,
          "Jaccard estimates need MinHash signatures");
  require(a.values.size() == b.values.size() && a.seed == b.seed && !a.values.empty(), ErrorKind::kInvalidArgument,
          "MinHash signatures differ in length or seed");
  const std::size_t eq = kernels::active().count_equal_u64(a.values.data(), b.values.data(), a.values.size());
  return static_cast<double>(eq) / static_cast<double>(a.values.size());
}

unsigned hamming(const Signature& a, const Signature& b) {
  require(a.kind == HashKind::kSimHash && b.kind == HashKind::kSimHash && a.values.size() == 1 &&
              b.values.size() == 1,
          ErrorKind::kInvalidArgument, "Hamming distance needs SimHash fingerprints");
  require(a.seed == b.seed, ErrorKind::kInvalidArgument, "SimHash fingerprints differ in seed");
  return static_cast<unsigned>(std::popcount(a.values[0] ^ b.values[0]));
}

double similarity(const Signature& a, const Signature& b) {
  if (a.kind == HashKind::kMinHash) return estimate_jaccard(a, b);
  return 1.0 - hamming(a, b) / 64.0;
}

double candidate_probability(double s, std::size_t bands, std::size_t rows) noexcept {
  return 1.0 - std::pow(1.0 - std::pow(s, static_cast<double>(rows)), static_cast<double>(bands));
}

namespace {
template <class F>
double integrate(F f, double a, double b) {
  constexpr int kSteps = 1000;  // Simpson, even step count
  if (b <= a) return 0.0;
  const double h = (b - a) / kSteps;
  double s = f(a) + f(b);
  for (int i = 1; i < kSteps; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3.0;
}
}  // namespace

std::pair<std::size_t, std::size_t> optimal_bands(double threshold, std::size_t num_hashes) {
  require(threshold > 0 && threshold < 1, ErrorKind::kInvalidArgument, "LSH threshold must be in (0, 1)");
  require(num_hashes >= 1, ErrorKind::kInvalidArgument, "num_hashes must be >= 1");
  double best = INFINITY;
  std::pair<std::size_t, std::size_t> arg{num_hashes, 1};
  for (std::size_t b = 1; b <= num_hashes; ++b) {
    if (num_hashes % b) continue;
    const std::size_t r = num_hashes / b;
    const double fp = integrate([&](double s) { return candidate_probability(s, b, r); }, 0.0, threshold);
    const double fn = integrate([&](double s) { return 1.0 - candidate_probability(s, b, r); }, threshold, 1.0);
    if (fp + fn < best) {
      best = fp + fn;
      arg = {b, r};
    }
  }
  return arg;
}

LshIndex::LshIndex(const HashConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  require(cfg_.has_bands(), ErrorKind::kInvalidArgument, "LSH index needs lsh_bands and lsh_rows");
  buckets_.resize(cfg_.lsh_bands);
}

std::vector<std::uint64_t> LshIndex::band_keys(const Signature& sig) const {
  std::vector<std::uint64_t> keys(cfg_.lsh_bands);
  if (cfg_.kind == HashKind::kMinHash) {
    require(sig.kind == HashKind::kMinHash && sig.values.size() == cfg_.num_hashes, ErrorKind::kInvalidArgument,
            "signature does not match the LSH config");
    for (std::size_t b = 0; b < cfg_.lsh_bands; ++b)
      keys[b] = fnv1a64(sig.values.data() + b * cfg_.lsh_rows, cfg_.lsh_rows * sizeof(std::uint64_t));
  } else {
    require(sig.kind == HashKind::kSimHash && sig.values.size() == 1, ErrorKind::kInvalidArgument,
            "signature does not match the LSH config");
    const std::size_t rows = cfg_.lsh_rows;
    const std::uint64_t mask = rows == 64 ? ~0ull : (1ull << rows) - 1;
    for (std::size_t b = 0; b < cfg_.lsh_bands; ++b) keys[b] = (sig.values[0] >> (b * rows)) & mask;
  }
  return keys;
}

std::size_t LshIndex::add(const Signature& sig) {
  const auto keys = band_keys(sig);
  for (std::size_t b = 0; b < keys.size(); ++b) buckets_[b][keys[b]].push_back(count_);
  return count_++;
}

std::vector<std::size_t> LshIndex::query(const Signature& sig) const {
  const auto keys = band_keys(sig);
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < keys.size(); ++b) {
    auto it = buckets_[b].find(keys[b]);
    if (it != buckets_[b].end()) out.insert(out.end(), it->second.begin(), it->second.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> LshIndex::candidate_pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& band : buckets_)
    for (const auto& [key, items] : band)
      for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i + 1; j < items.size(); ++j) out.emplace_back(items[i], items[j]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

json config_json(const HashConfig& c) {
  return {{"kind", to_string(c.kind)},         {"num_hashes", c.num_hashes}, {"ngram_size", c.ngram_size},
          {"ngram_level", to_string(c.ngram_level)}, {"simhash_bits", c.simhash_bits}, {"lsh_bands", c.lsh_bands},
          {"lsh_rows", c.lsh_rows}};
}

HashConfig config_from_json(const json& j) {
  HashConfig c;
  c.kind = parse_hash_kind(j.at("kind").get<std::string>());
  c.num_hashes = j.at("num_hashes").get<std::size_t>();
  c.ngram_size = j.at("ngram_size").get<std::size_t>();
  c.ngram_level = parse_ngram_level(j.at("ngram_level").get<std::string>());
  c.simhash_bits = j.at("simhash_bits").get<std::size_t>();
  c.lsh_bands = j.at("lsh_bands").get<std::size_t>();
  c.lsh_rows = j.at("lsh_rows").get<std::size_t>();
  c.validate();
  return c;
}

std::uint64_t parse_u64_string(const json& j) {
  const auto s = j.get<std::string>();
  std::size_t used = 0;
  require(!s.empty() && s[0] != '-', ErrorKind::kFormat, "bad 64-bit value: " + s);
  const unsigned long long v = std::stoull(s, &used);
  require(used == s.size(), ErrorKind::kFormat, "bad 64-bit value: " + s);
  return v;
}

}  // namespace

void write_signatures(const std::string& path, const SignatureFile& file) {
  file.config.validate();
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write signatures: " + path);
  const json cfg = config_json(file.config);
  out << json{{"format", "dupsim-signatures"},
              {"version", 1},
              {"hash_family", kHashFamilyVersion},
              {"kind", to_string(file.config.kind)},
              {"seed", std::to_string(file.seed)},
              {"config", cfg}}
             .dump()
      << '\n';
  for (const auto& r : file.records) {
    json sig = json::array();
    for (auto v : r.sig.values) sig.push_back(std::to_string(v));
    out << json{{"id", r.id}, {"kind", to_string(r.sig.kind)}, {"seed", std::to_string(r.sig.seed)}, {"config", cfg},
                {"sig", sig}}
               .dump()
        << '\n';
  }
}

SignatureFile read_signatures(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open signatures: " + path);
  SignatureFile file;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (!header) {
        require(j.value("format", "") == "dupsim-signatures", ErrorKind::kFormat, "missing signature file header");
        require(j.at("hash_family").get<std::uint32_t>() == kHashFamilyVersion, ErrorKind::kFormat,
                "signatures were made with a different hash family version");
        file.config = config_from_json(j.at("config"));
        file.seed = parse_u64_string(j.at("seed"));
        header = true;
        continue;
      }
      SignatureRecord r;
      r.id = j.at("id").get<std::string>();
      r.sig.kind = parse_hash_kind(j.at("kind").get<std::string>());
      r.sig.seed = parse_u64_string(j.at("seed"));
      for (const auto& v : j.at("sig")) r.sig.values.push_back(parse_u64_string(v));
      const std::size_t want = file.config.kind == HashKind::kMinHash ? file.config.num_hashes : 1;
      require(r.sig.kind == file.config.kind && r.sig.values.size() == want && r.sig.seed == file.seed,
              ErrorKind::kIntegrity, "signature does not match the file header");
      file.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
  } catch (const std::logic_error& e) {
    fail(ErrorKind::kFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
  }
  require(header, ErrorKind::kFormat, "empty signature file: " + path);
  return file;
}

}  // namespace dupsim::lsh
