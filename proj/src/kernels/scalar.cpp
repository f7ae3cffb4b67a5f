#include "dupsim/kernels.hpp"

#include <bit>

namespace dupsim::kernels {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) { return ref::dot(a, b, n); }

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) { ref::axpy(alpha, x, y, n); }

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                    bool accumulate) {
  ref::gemm_nn(m, n, k, a, b, c, accumulate);
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                    bool accumulate) {
  ref::gemm_nt(m, n, k, a, b, c, accumulate);
}

void gemm_tn_acc_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  ref::gemm_tn_acc(m, n, k, a, b, c);
}

std::size_t count_equal_u64_scalar(const std::uint64_t* a, const std::uint64_t* b, std::size_t n) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += a[i] == b[i];
  return count;
}

void hamming_batch_scalar(std::uint64_t query, const std::uint64_t* fps, std::size_t n, std::uint32_t* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint32_t>(std::popcount(query ^ fps[i]));
}

void simhash_accumulate_scalar(std::uint64_t hash, std::int32_t weight, std::int32_t* counters) {
  for (int b = 0; b < 64; ++b) counters[b] += ((hash >> b) & 1u) ? weight : -weight;
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{
      Isa::kScalar,         "scalar",           dot_scalar,
      axpy_scalar,          gemm_nn_scalar,     gemm_nt_scalar,
      gemm_tn_acc_scalar,   count_equal_u64_scalar, hamming_batch_scalar,
      simhash_accumulate_scalar,
  };
  return table;
}

}  // namespace dupsim::kernels
