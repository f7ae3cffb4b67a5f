#include "dupsim/cluster.hpp"

#include <cmath>
#include <numeric>

#include "dupsim/error.hpp"

namespace dupsim::cluster {

const char* to_string(Linkage l) noexcept { return l == Linkage::kConnectedComponents ? "components" : "average"; }

Linkage parse_linkage(const std::string& s) {
  if (s == "components" || s == "connected_components") return Linkage::kConnectedComponents;
  if (s == "average") return Linkage::kAverage;
  fail(ErrorKind::kInvalidArgument, "unknown linkage: " + s + " (expected components or average)");
}

namespace {

std::vector<std::size_t> relabel(const std::vector<std::size_t>& root) {
  std::vector<std::size_t> id(root.size(), static_cast<std::size_t>(-1)), out(root.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < root.size(); ++i) {
    auto& slot = id[root[i]];
    if (slot == static_cast<std::size_t>(-1)) slot = next++;
    out[i] = slot;
  }
  return out;
}

std::size_t find(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

std::vector<std::size_t> connected_components(std::size_t n,
                                              const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  require(n >= 1, ErrorKind::kEmptyInput, "nothing to cluster");
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& [a, b] : edges) {
    require(a < n && b < n, ErrorKind::kInvalidArgument, "edge endpoint out of range");
    const std::size_t ra = find(parent, a), rb = find(parent, b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::size_t> root(n);
  for (std::size_t i = 0; i < n; ++i) root[i] = find(parent, i);
  return relabel(root);
}

std::vector<std::size_t> average_linkage(const std::vector<double>& sim, std::size_t n, double threshold) {
  require(n >= 1, ErrorKind::kEmptyInput, "nothing to cluster");
  require(sim.size() == n * n, ErrorKind::kInvalidArgument, "similarity matrix is not n x n");
  std::vector<double> s = sim;
  std::vector<std::size_t> size(n, 1), owner(n);
  std::iota(owner.begin(), owner.end(), 0);
  std::vector<bool> alive(n, true);
  for (;;) {
    double best = -INFINITY;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j)
        if (alive[j] && s[i * n + j] > best) {
          best = s[i * n + j];
          bi = i;
          bj = j;
        }
    }
    if (!(best >= threshold)) break;
    // Lance-Williams update for average linkage: merge bj into bi.
    const double wi = static_cast<double>(size[bi]), wj = static_cast<double>(size[bj]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      const double v = (wi * s[bi * n + k] + wj * s[bj * n + k]) / (wi + wj);
      s[bi * n + k] = s[k * n + bi] = v;
    }
    size[bi] += size[bj];
    alive[bj] = false;
    for (auto& o : owner)
      if (o == bj) o = bi;
  }
  return relabel(owner);
}

std::vector<std::size_t> cluster_matrix(const std::vector<double>& sim, std::size_t n, Linkage linkage,
                                        double threshold) {
  require(sim.size() == n * n, ErrorKind::kInvalidArgument, "similarity matrix is not n x n");
  if (linkage == Linkage::kAverage) return average_linkage(sim, n, threshold);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (sim[i * n + j] >= threshold) edges.emplace_back(i, j);
  return connected_components(n, edges);
}

}  // namespace dupsim::cluster
