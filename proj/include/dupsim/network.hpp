#pragma once

// Per-chunk forward and reverse-mode pass of the GAU embedding network.
// Padding rows are masked out of attention and pooling, which is the same as
// running on the first valid_len rows only; the pass does exactly that.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dupsim/model_config.hpp"
#include "dupsim/params.hpp"
#include "dupsim/textcodec.hpp"

namespace dupsim {

template <class T>
struct BlockCache {
  std::vector<T> x_in;     // L x d, residual stream entering the block
  std::vector<T> normed;   // L x d
  std::vector<T> row_norm; // L, max(|x|, eps)
  std::vector<T> pre_u, pre_v;  // L x e
  std::vector<T> u, v;     // L x e
  std::vector<T> z;        // L x s
  std::vector<T> q, k;     // L x s, after offset/scale and rotary
  std::vector<T> relu_s;   // L x L, relu(q k^T / sqrt(s))
  std::vector<T> av;       // L x e
};

template <class T>
struct ForwardCache {
  std::size_t len = 0;
  std::vector<std::uint32_t> codepoint_bits;  // L rows of packed input bits
  std::vector<BlockCache<T>> blocks;
  std::vector<T> x_out;     // L x d, final residual stream
  std::vector<T> pooled;    // d
  std::vector<std::uint32_t> argmax;  // d, max pooling only
  std::vector<T> projected; // embedding_dim, before normalization
  T projected_norm = 0;
  std::vector<T> embedding;
};

// Generalized-mean pooling over the first valid_len rows of an (n x d)
// matrix: out_j = (mean_i clamp(x_ij, 1e-6)^p)^(1/p).
template <class T>
std::vector<T> gem_pool(const T* x, std::size_t n, std::size_t d, double p, std::size_t valid_len);

inline constexpr double kGemFloor = 1e-6;
inline constexpr double kNormEps = 1e-6;

template <class T>
class GauNetwork {
 public:
  explicit GauNetwork(const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return cfg_; }

  // Unit-norm embedding of one chunk. Throws config-mismatch when the matrix
  // shape disagrees with the config and numeric on non-finite output.
  std::vector<T> forward(const BasicParams<T>& params, const textcodec::CharMatrix& m,
                         ForwardCache<T>* cache = nullptr) const;

  // Accumulates d(loss)/d(params) into grads given d(loss)/d(embedding).
  void backward(const BasicParams<T>& params, const ForwardCache<T>& cache, const T* d_embedding,
                BasicParams<T>& grads) const;

 private:
  void check_params(const BasicParams<T>& params) const;

  ModelConfig cfg_;
  std::vector<T> pos_table_;   // chunk_len x d sinusoid
  std::vector<T> rope_cos_;    // chunk_len x s/2
  std::vector<T> rope_sin_;
};

extern template class GauNetwork<float>;
extern template class GauNetwork<double>;

}  // namespace dupsim
