#pragma once

// Threshold clustering over a similarity structure.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace dupsim::cluster {

enum class Linkage { kConnectedComponents, kAverage };
const char* to_string(Linkage l) noexcept;
Linkage parse_linkage(const std::string& s);

// Cluster ids numbered by first appearance in item order.
std::vector<std::size_t> connected_components(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

// Average linkage on a dense symmetric n x n similarity matrix: repeatedly
// merge the two clusters with the highest mean pairwise similarity while it
// is >= threshold. Ties go to the lowest (i, j) cluster pair.
std::vector<std::size_t> average_linkage(const std::vector<double>& sim, std::size_t n, double threshold);

// Dispatch on linkage; connected components use edges with sim >= threshold.
std::vector<std::size_t> cluster_matrix(const std::vector<double>& sim, std::size_t n, Linkage linkage,
                                        double threshold);

}  // namespace dupsim::cluster
