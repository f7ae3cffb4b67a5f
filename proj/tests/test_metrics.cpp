#include <gtest/gtest.h>

#include "dupsim/error.hpp"
#include "dupsim/metrics.hpp"
#include "dupsim/rng.hpp"
#include "oracles.hpp"

using namespace dupsim;
using namespace dupsim::metrics;

TEST(Metrics, AriAgainstPairCountOracle) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = rng.below(13);
    const auto p = oracle::random_labels(rng, n, 1 + rng.below(5)), g = oracle::random_labels(rng, n, 1 + rng.below(5));
    EXPECT_NEAR(adjusted_rand_index(p, g), oracle::ari(p, g), 1e-12);
  }
}

TEST(Metrics, VMeasureAgainstPointwiseOracle) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = rng.below(13);
    const auto p = oracle::random_labels(rng, n, 1 + rng.below(5)), g = oracle::random_labels(rng, n, 1 + rng.below(5));
    const auto got = v_measure(p, g);
    const auto want = oracle::v_measure(p, g);
    EXPECT_NEAR(got.homogeneity, want.h, 1e-12);
    EXPECT_NEAR(got.completeness, want.c, 1e-12);
    EXPECT_NEAR(got.v, want.v, 1e-12);
  }
}

TEST(Metrics, KnownValues) {
  EXPECT_EQ(adjusted_rand_index(Labels{0, 0, 1, 1}, Labels{5, 5, 7, 7}), 1.0);
  EXPECT_NEAR(adjusted_rand_index(Labels{0, 0, 1, 1}, Labels{0, 1, 0, 1}), -0.5, 1e-15);
  EXPECT_EQ(adjusted_rand_index(Labels{0}, Labels{3}), 1.0);
  const auto v = v_measure(Labels{0, 0, 0, 0}, Labels{0, 0, 1, 1});
  EXPECT_EQ(v.homogeneity, 0.0);
  EXPECT_EQ(v.completeness, 1.0);
  EXPECT_EQ(v.v, 0.0);
}

TEST(Metrics, Symmetry) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_labels(rng, 10, 4), g = oracle::random_labels(rng, 10, 3);
    EXPECT_NEAR(adjusted_rand_index(p, g), adjusted_rand_index(g, p), 1e-14);
    const auto a = v_measure(p, g), b = v_measure(g, p);
    EXPECT_NEAR(a.homogeneity, b.completeness, 1e-14);
    EXPECT_NEAR(a.v, b.v, 1e-14);
  }
}

TEST(Metrics, RelabelingInvariance) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_labels(rng, 12, 5), g = oracle::random_labels(rng, 12, 4);
    Labels q = p;
    for (auto& x : q) x = 100 - 7 * x;  // bijection
    EXPECT_NEAR(adjusted_rand_index(q, g), adjusted_rand_index(p, g), 1e-12);
    EXPECT_NEAR(v_measure(q, g).v, v_measure(p, g).v, 1e-12);
    EXPECT_EQ(same_cluster_pairs(q), same_cluster_pairs(p));
  }
}

TEST(Metrics, PairwiseAgainstOracle) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(66);
    std::vector<bool> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.bernoulli(0.3);
      g[i] = rng.bernoulli(0.3);
    }
    const auto m = pairwise_classification(p, g);
    const auto d = oracle::prf(p, g, true), nd = oracle::prf(p, g, false);
    EXPECT_NEAR(m.duplicate.precision, d.p, 1e-12);
    EXPECT_NEAR(m.duplicate.recall, d.r, 1e-12);
    EXPECT_NEAR(m.duplicate.f1, d.f, 1e-12);
    EXPECT_NEAR(m.non_duplicate.f1, nd.f, 1e-12);
    EXPECT_NEAR(m.macro_f1, (d.f + nd.f) / 2, 1e-12);
    EXPECT_EQ(m.tp + m.fp + m.fn + m.tn, n);
  }
}

TEST(Metrics, PairwiseZeroDivisionIsZero) {
  const auto m = pairwise_classification({false, false}, {false, false});
  EXPECT_EQ(m.duplicate.precision, 0.0);
  EXPECT_EQ(m.duplicate.recall, 0.0);
  EXPECT_EQ(m.duplicate.f1, 0.0);
  EXPECT_EQ(m.non_duplicate.f1, 1.0);
  EXPECT_EQ(m.accuracy, 1.0);
}

TEST(Metrics, RecallAtKAgainstOracle) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const std::size_t q = 1 + rng.below(12);
    std::vector<std::vector<std::string>> ranked(q);
    std::vector<std::string> truth(q);
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t r = 0, len = rng.below(6); r < len; ++r) ranked[i].push_back("d" + std::to_string(rng.below(8)));
      truth[i] = "d" + std::to_string(rng.below(8));
    }
    for (std::size_t k = 1; k <= 6; ++k) EXPECT_NEAR(recall_at_k(ranked, truth, k), oracle::recall_at_k(ranked, truth, k), 1e-12);
  }
}

TEST(Metrics, StringLabelAlignment) {
  const ClusterLabels pred{{"a", "x"}, {"b", "x"}, {"c", "y"}};
  const ClusterLabels gold{{"a", "1"}, {"b", "1"}, {"c", "2"}};
  EXPECT_EQ(adjusted_rand_index(pred, gold), 1.0);
  const ClusterLabels other{{"a", "1"}, {"b", "1"}, {"d", "2"}};
  EXPECT_THROW(adjusted_rand_index(pred, other), Error);
  EXPECT_THROW(adjusted_rand_index(Labels{1, 2}, Labels{1}), Error);
}
