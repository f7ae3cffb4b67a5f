#pragma once

// Brute-force reference implementations used as test oracles. They follow
// the textbook definitions directly (pair enumeration, per-point entropy
// sums) rather than the contingency-table formulas in the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dupsim/rng.hpp"

namespace dupsim::oracle {

using Labels = std::vector<std::int64_t>;

// Pair counts: both same, pred-only same, truth-only same, both different.
struct PairCounts {
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
};

inline PairCounts pair_counts(const Labels& pred, const Labels& truth) {
  PairCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = i + 1; j < pred.size(); ++j) {
      const bool p = pred[i] == pred[j], t = truth[i] == truth[j];
      (p ? (t ? c.n11 : c.n10) : (t ? c.n01 : c.n00)) += 1;
    }
  return c;
}

// Hubert-Arabie ARI in pair-count form; a degenerate denominator means the
// partitions agree trivially.
inline double ari(const Labels& pred, const Labels& truth) {
  const auto c = pair_counts(pred, truth);
  const double den = (c.n11 + c.n10) * (c.n10 + c.n00) + (c.n11 + c.n01) * (c.n01 + c.n00);
  if (den == 0) return 1.0;
  return 2.0 * (c.n11 * c.n00 - c.n10 * c.n01) / den;
}

struct VMeasure {
  double h, c, v;
};

// Conditional entropy H(A|B) as a sum over points: -1/n sum_i log p(a_i | b_i).
inline double cond_entropy(const Labels& a, const Labels& b) {
  const double n = static_cast<double>(a.size());
  double h = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double both = 0, given = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      given += b[j] == b[i];
      both += b[j] == b[i] && a[j] == a[i];
    }
    h -= std::log(both / given) / n;
  }
  return h;
}

inline double entropy(const Labels& a) {
  const double n = static_cast<double>(a.size());
  double h = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double same = 0;
    for (std::size_t j = 0; j < a.size(); ++j) same += a[j] == a[i];
    h -= std::log(same / n) / n;
  }
  return h;
}

inline VMeasure v_measure(const Labels& pred, const Labels& truth) {
  if (pred.empty()) return {1, 1, 1};
  const double ht = entropy(truth), hp = entropy(pred);
  const double h = ht == 0 ? 1.0 : 1.0 - cond_entropy(truth, pred) / ht;
  const double c = hp == 0 ? 1.0 : 1.0 - cond_entropy(pred, truth) / hp;
  return {h, c, h + c == 0 ? 0.0 : 2 * h * c / (h + c)};
}

struct Prf {
  double p, r, f;
};

inline Prf prf(const std::vector<bool>& pred, const std::vector<bool>& truth, bool positive) {
  double tp = 0, pp = 0, ap = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pp += pred[i] == positive;
    ap += truth[i] == positive;
    tp += pred[i] == positive && truth[i] == positive;
  }
  const double p = pp ? tp / pp : 0, r = ap ? tp / ap : 0;
  return {p, r, p + r ? 2 * p * r / (p + r) : 0};
}

inline double recall_at_k(const std::vector<std::vector<std::string>>& ranked, const std::vector<std::string>& truth,
                          std::size_t k) {
  double hits = 0;
  for (std::size_t q = 0; q < ranked.size(); ++q)
    for (std::size_t r = 0; r < ranked[q].size() && r < k; ++r)
      if (ranked[q][r] == truth[q]) {
        hits += 1;
        break;
      }
  return hits / static_cast<double>(ranked.size());
}

inline Labels random_labels(Rng& rng, std::size_t n, std::size_t max_label) {
  Labels out(n);
  for (auto& x : out) x = static_cast<std::int64_t>(rng.below(max_label));
  return out;
}

}  // namespace dupsim::oracle
