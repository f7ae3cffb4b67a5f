#include "dupsim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dupsim/error.hpp"

namespace dupsim::metrics {

namespace {

void check_aligned(const Labels& pred, const Labels& truth) {
  require(pred.size() == truth.size(), ErrorKind::kInvalidArgument,
          "label vectors differ in length (" + std::to_string(pred.size()) + " vs " + std::to_string(truth.size()) + ")");
}

double comb2(double n) { return n * (n - 1) / 2; }

struct Contingency {
  std::map<std::pair<std::int64_t, std::int64_t>, double> cells;
  std::map<std::int64_t, double> rows;  // truth
  std::map<std::int64_t, double> cols;  // pred
};

Contingency contingency(const Labels& pred, const Labels& truth) {
  Contingency c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    c.cells[{truth[i], pred[i]}] += 1;
    c.rows[truth[i]] += 1;
    c.cols[pred[i]] += 1;
  }
  return c;
}

double entropy(const std::map<std::int64_t, double>& counts, double n) {
  double h = 0;
  for (const auto& [k, c] : counts) h -= (c / n) * std::log(c / n);
  return h;
}

}  // namespace

std::pair<Labels, Labels> align(const ClusterLabels& pred, const ClusterLabels& truth) {
  require(pred.size() == truth.size(), ErrorKind::kInvalidArgument, "predicted and gold labels cover different documents");
  std::map<std::string, std::int64_t> pred_ids, truth_ids;
  Labels p, t;
  auto pi = pred.begin();
  for (auto ti = truth.begin(); ti != truth.end(); ++ti, ++pi) {
    require(pi->first == ti->first, ErrorKind::kInvalidArgument,
            "predicted and gold labels cover different documents (" + pi->first + " vs " + ti->first + ")");
    p.push_back(pred_ids.emplace(pi->second, static_cast<std::int64_t>(pred_ids.size())).first->second);
    t.push_back(truth_ids.emplace(ti->second, static_cast<std::int64_t>(truth_ids.size())).first->second);
  }
  return {p, t};
}

double adjusted_rand_index(const Labels& pred, const Labels& truth) {
  check_aligned(pred, truth);
  const double n = static_cast<double>(pred.size());
  if (pred.size() < 2) return 1.0;
  const Contingency c = contingency(pred, truth);
  double sum_cells = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [k, v] : c.cells) sum_cells += comb2(v);
  for (const auto& [k, v] : c.rows) sum_rows += comb2(v);
  for (const auto& [k, v] : c.cols) sum_cols += comb2(v);
  const double expected = sum_rows * sum_cols / comb2(n);
  const double max_index = (sum_rows + sum_cols) / 2;
  if (max_index == expected) return 1.0;
  return (sum_cells - expected) / (max_index - expected);
}

double adjusted_rand_index(const ClusterLabels& pred, const ClusterLabels& truth) {
  const auto [p, t] = align(pred, truth);
  return adjusted_rand_index(p, t);
}

VMeasure v_measure(const Labels& pred, const Labels& truth) {
  check_aligned(pred, truth);
  VMeasure out{1.0, 1.0, 1.0};
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  const Contingency c = contingency(pred, truth);
  const double h_truth = entropy(c.rows, n);
  const double h_pred = entropy(c.cols, n);
  double h_truth_given_pred = 0, h_pred_given_truth = 0;
  for (const auto& [key, v] : c.cells) {
    h_truth_given_pred -= (v / n) * std::log(v / c.cols.at(key.second));
    h_pred_given_truth -= (v / n) * std::log(v / c.rows.at(key.first));
  }
  out.homogeneity = h_truth == 0 ? 1.0 : 1.0 - h_truth_given_pred / h_truth;
  out.completeness = h_pred == 0 ? 1.0 : 1.0 - h_pred_given_truth / h_pred;
  const double s = out.homogeneity + out.completeness;
  out.v = s == 0 ? 0.0 : 2 * out.homogeneity * out.completeness / s;
  return out;
}

VMeasure v_measure(const ClusterLabels& pred, const ClusterLabels& truth) {
  const auto [p, t] = align(pred, truth);
  return v_measure(p, t);
}

namespace {
ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.support = tp + fn;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}
}  // namespace

PairwiseMetrics pairwise_classification(const std::vector<bool>& pred, const std::vector<bool>& truth) {
  require(pred.size() == truth.size(), ErrorKind::kInvalidArgument, "predicted and gold pair labels differ in length");
  require(!pred.empty(), ErrorKind::kEmptyInput, "no pairs to score");
  PairwiseMetrics m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) ++m.tp;
    else if (pred[i]) ++m.fp;
    else if (truth[i]) ++m.fn;
    else ++m.tn;
  }
  m.duplicate = class_metrics(m.tp, m.fp, m.fn);
  m.non_duplicate = class_metrics(m.tn, m.fn, m.fp);
  m.macro_f1 = (m.duplicate.f1 + m.non_duplicate.f1) / 2;
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(pred.size());
  return m;
}

std::vector<bool> same_cluster_pairs(const Labels& labels) {
  std::vector<bool> out;
  out.reserve(labels.size() * (labels.size() - (labels.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j) out.push_back(labels[i] == labels[j]);
  return out;
}

double recall_at_k(const std::vector<std::vector<std::string>>& ranked, const std::vector<std::string>& truth,
                   std::size_t k) {
  require(ranked.size() == truth.size(), ErrorKind::kInvalidArgument, "rankings and gold ids differ in length");
  require(!ranked.empty(), ErrorKind::kEmptyInput, "no queries to score");
  require(k >= 1, ErrorKind::kInvalidArgument, "k must be >= 1");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    const auto end = ranked[q].begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked[q].size()));
    if (std::find(ranked[q].begin(), end, truth[q]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

}  // namespace dupsim::metrics
