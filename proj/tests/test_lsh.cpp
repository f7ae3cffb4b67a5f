#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dupsim/error.hpp"
#include "dupsim/kernels.hpp"
#include "dupsim/lsh.hpp"
#include "dupsim/rng.hpp"
#include "dupsim/utf8.hpp"
#include "synth.hpp"

using namespace dupsim;
using namespace dupsim::lsh;

namespace {

std::vector<std::u32string> tokens(std::size_t from, std::size_t to) {
  std::vector<std::u32string> out;
  for (std::size_t i = from; i < to; ++i) out.push_back(utf8::decode("tok" + std::to_string(i)));
  return out;
}

double exact_jaccard(const std::vector<std::u32string>& a, const std::vector<std::u32string>& b) {
  const std::set<std::u32string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& x : sa) inter += sb.count(x);
  return double(inter) / double(sa.size() + sb.size() - inter);
}

}  // namespace

TEST(Lsh, NormalizeLowercasesStripsAndCollapses) {
  EXPECT_EQ(normalize(U"  Hello,   WORLD!\n\tÉtÉ  "), U"hello world été");
  EXPECT_EQ(normalize(U"...!!"), U"");
  EXPECT_EQ(normalize(U"ПРИВЕТ мир"), U"привет мир");
}

TEST(Lsh, ShingleCounts) {
  HashConfig w = HashConfig::minhash_default();
  const auto s = shingle(U"a b c d e", w);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], U"a b c");
  EXPECT_EQ(s[2], U"c d e");
  EXPECT_EQ(shingle(U"a b", w), std::vector<std::u32string>{U"a b"});
  HashConfig c = HashConfig::simhash_default();
  EXPECT_EQ(c.ngram_level, NgramLevel::kChar);
  EXPECT_EQ(c.ngram_size, 5u);
  EXPECT_EQ(shingle(U"abcdefg", c).size(), 3u);
  EXPECT_THROW(shingle(U" ,. ", w), Error);
}

TEST(Lsh, Defaults) {
  const auto m = HashConfig::minhash_default();
  EXPECT_EQ(m.num_hashes, 10u);
  EXPECT_EQ(m.ngram_size, 3u);
  EXPECT_EQ(m.ngram_level, NgramLevel::kWord);
  const auto d = HashConfig::minhash_dedup();
  EXPECT_EQ(d.num_hashes, 256u);
  EXPECT_EQ(d.lsh_bands * d.lsh_rows, 256u);
}

TEST(Lsh, InvalidBandsRejected) {
  HashConfig c = HashConfig::minhash_default();
  c.lsh_bands = 3;
  c.lsh_rows = 3;
  EXPECT_THROW(c.validate(), Error);
  c.lsh_bands = 5;
  c.lsh_rows = 2;
  EXPECT_NO_THROW(c.validate());
}

TEST(Lsh, IdenticalTextsGiveIdenticalSignatures) {
  const auto cfg = HashConfig::minhash_default();
  const auto a = signature(U"the quick brown fox jumps", cfg, 1);
  EXPECT_EQ(a, signature(U"The quick, brown fox jumps!", cfg, 1));
  EXPECT_EQ(estimate_jaccard(a, a), 1.0);
  EXPECT_NE(a, signature(U"the quick brown fox jumps", cfg, 2));
  const auto s = signature(U"the quick brown fox", HashConfig::simhash_default(), 1);
  EXPECT_EQ(hamming(s, s), 0u);
  EXPECT_EQ(similarity(s, s), 1.0);
}

TEST(Lsh, MismatchedSignaturesRejected) {
  const auto cfg = HashConfig::minhash_default();
  const auto a = signature(U"one two three four", cfg, 1), b = signature(U"one two three four", cfg, 2);
  EXPECT_THROW(estimate_jaccard(a, b), Error);
  const auto s = signature(U"one two three four", HashConfig::simhash_default(), 1);
  EXPECT_THROW(hamming(a, s), Error);
}

TEST(Lsh, MinHashEstimatesJaccard) {
  HashConfig cfg = HashConfig::minhash_default();
  cfg.num_hashes = 256;
  Rng rng(1);
  for (int pair = 0; pair < 10; ++pair) {
    const std::size_t n = 50 + rng.below(200);
    const std::size_t shift = rng.below(n);
    const auto a = tokens(0, n), b = tokens(shift, shift + n);
    const double truth = exact_jaccard(a, b);
    double mean = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed)
      mean += estimate_jaccard(minhash_signature(a, cfg, seed), minhash_signature(b, cfg, seed));
    EXPECT_NEAR(mean / 50, truth, 0.03);
  }
}

TEST(Lsh, SimHashTracksSimilarity) {
  const auto cfg = HashConfig::simhash_default();
  const auto base = testkit::random_words(200, 3);
  std::string near = base;
  near[10] = 'X';
  near[500] = 'Y';
  const auto a = signature(utf8::decode(base), cfg, 7);
  const auto b = signature(utf8::decode(near), cfg, 7);
  double unrelated = 0;
  for (int i = 0; i < 20; ++i)
    unrelated += hamming(a, signature(utf8::decode(testkit::random_words(200, 100 + i)), cfg, 7));
  EXPECT_LT(hamming(a, b), 8u);
  EXPECT_GT(unrelated / 20, 20.0);
}

TEST(Lsh, SimHashIndependentOfKernelVariant) {
  const auto cfg = HashConfig::simhash_default();
  const auto text = utf8::decode(testkit::random_words(300, 4));
  const auto before = kernels::active_isa();
  const auto a = signature(text, cfg, 5);
  ASSERT_TRUE(kernels::force_isa(kernels::Isa::kScalar));
  const auto b = signature(text, cfg, 5);
  kernels::force_isa(before);
  EXPECT_EQ(a, b);
}

TEST(Lsh, CandidateProbabilityFormula) {
  EXPECT_NEAR(candidate_probability(0.9, 32, 8), 1 - std::pow(1 - std::pow(0.9, 8), 32), 1e-15);
  EXPECT_EQ(candidate_probability(0.0, 4, 2), 0.0);
  EXPECT_EQ(candidate_probability(1.0, 4, 2), 1.0);
}

TEST(Lsh, OptimalBandsFactorAndCenterOnThreshold) {
  const auto [b, r] = optimal_bands(0.8, 256);
  EXPECT_EQ(b * r, 256u);
  // The S-curve should cross 1/2 near the threshold.
  const double mid = std::pow(1.0 / b, 1.0 / r);
  EXPECT_NEAR(mid, 0.8, 0.1);
  const auto [b10, r10] = optimal_bands(0.5, 10);
  EXPECT_EQ(b10 * r10, 10u);
  EXPECT_THROW(optimal_bands(1.5, 10), Error);
}

TEST(Lsh, IndexFindsPlantedPair) {
  HashConfig cfg = HashConfig::minhash_default();
  cfg.num_hashes = 256;
  cfg.lsh_bands = 32;
  cfg.lsh_rows = 8;
  cfg.ngram_size = 1;
  LshIndex index(cfg);
  std::vector<Signature> sigs;
  for (int i = 0; i < 200; ++i) {
    sigs.push_back(signature(utf8::decode(testkit::random_words(60, 1000 + i)), cfg, 3));
    index.add(sigs.back());
  }
  // 90 of 100 tokens shared: Jaccard 90/110.
  const auto a = tokens(0, 100), b = tokens(10, 110);
  const auto sa = minhash_signature(a, cfg, 3), sb = minhash_signature(b, cfg, 3);
  const auto id_a = index.add(sa);
  const auto hits = index.query(sb);
  EXPECT_NE(std::find(hits.begin(), hits.end(), id_a), hits.end());
  EXPECT_LE(hits.size(), 5u);
  const auto q = index.query(sigs[17]);
  EXPECT_NE(std::find(q.begin(), q.end(), 17u), q.end());
  const auto pairs = index.candidate_pairs();
  for (const auto& [i, j] : pairs) EXPECT_LT(i, j);
}

TEST(Lsh, SignatureFileRoundTrip) {
  testkit::TempDir dir;
  SignatureFile f{HashConfig::minhash_default(), 0xfedcba9876543210ull, {}};
  for (int i = 0; i < 5; ++i)
    f.records.push_back({"d" + std::to_string(i), signature(utf8::decode(testkit::random_words(20, i)), f.config, f.seed)});
  write_signatures(dir.file("s.jsonl"), f);
  const auto back = read_signatures(dir.file("s.jsonl"));
  EXPECT_EQ(back.config, f.config);
  EXPECT_EQ(back.seed, f.seed);
  ASSERT_EQ(back.records.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(back.records[i].id, f.records[i].id);
    EXPECT_EQ(back.records[i].sig, f.records[i].sig);
  }
  const auto header = testkit::file_bytes(dir.file("s.jsonl"));
  EXPECT_NE(header.find("\"num_hashes\":10"), std::string::npos);
}
