#pragma once

// Clustering agreement, pairwise classification and retrieval metrics.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dupsim::metrics {

// Cluster labels aligned by item index.
using Labels = std::vector<std::int64_t>;
// doc_id -> cluster label.
using ClusterLabels = std::map<std::string, std::string>;

// Pair-counting ARI. Identical trivial partitions (all singletons on both
// sides, or one cluster on both sides, or n < 2) score 1.
double adjusted_rand_index(const Labels& pred, const Labels& truth);
double adjusted_rand_index(const ClusterLabels& pred, const ClusterLabels& truth);

struct VMeasure {
  double homogeneity = 0;
  double completeness = 0;
  double v = 0;
};
// Homogeneity is 1 when H(truth) = 0, completeness is 1 when H(pred) = 0.
VMeasure v_measure(const Labels& pred, const Labels& truth);
VMeasure v_measure(const ClusterLabels& pred, const ClusterLabels& truth);

struct ClassMetrics {
  double precision = 0;  // 0 when nothing is predicted for the class
  double recall = 0;     // 0 when the class has no members
  double f1 = 0;
  std::size_t support = 0;
};

struct PairwiseMetrics {
  ClassMetrics duplicate;
  ClassMetrics non_duplicate;
  double macro_f1 = 0;
  double accuracy = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Binary labels, true = duplicate.
PairwiseMetrics pairwise_classification(const std::vector<bool>& pred, const std::vector<bool>& truth);

// Same-cluster indicators over all i < j pairs, in (0,1), (0,2), ... order.
std::vector<bool> same_cluster_pairs(const Labels& labels);

// Fraction of queries whose true id appears among the first k ranked ids.
double recall_at_k(const std::vector<std::vector<std::string>>& ranked, const std::vector<std::string>& truth,
                   std::size_t k);

// Aligns two doc_id -> label maps into index-aligned labels; throws when the
// doc sets differ.
std::pair<Labels, Labels> align(const ClusterLabels& pred, const ClusterLabels& truth);

}  // namespace dupsim::metrics
