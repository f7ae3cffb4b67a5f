#include "dupsim/kernels.hpp"

#if defined(__ARM_NEON) || defined(__ARM_NEON__)

#include <arm_neon.h>

#include <bit>

namespace dupsim::kernels {
namespace {

float dot_neon(const float* a, const float* b, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  float s = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(float alpha, const float* x, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_neon(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                  bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
    for (std::size_t p = 0; p < k; ++p) axpy_neon(a[i * k + p], b + p * n, crow, n);
  }
}

void gemm_nt_neon(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                  bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const float s = dot_neon(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
}

void gemm_tn_acc_neon(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) axpy_neon(a[p * m + i], b + p * n, c + i * n, n);
}

std::size_t count_equal_u64_neon(const std::uint64_t* a, const std::uint64_t* b, std::size_t n) {
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t eq = vceqq_u64(vld1q_u64(a + i), vld1q_u64(b + i));
    count += (vgetq_lane_u64(eq, 0) & 1u) + (vgetq_lane_u64(eq, 1) & 1u);
  }
  for (; i < n; ++i) count += a[i] == b[i];
  return count;
}

void hamming_batch_neon(std::uint64_t query, const std::uint64_t* fps, std::size_t n, std::uint32_t* out) {
  const uint64x2_t vq = vdupq_n_u64(query);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint8x16_t bits = vcntq_u8(vreinterpretq_u8_u64(veorq_u64(vq, vld1q_u64(fps + i))));
    const uint64x2_t sums = vpaddlq_u32(vpaddlq_u16(vpaddlq_u8(bits)));
    out[i] = static_cast<std::uint32_t>(vgetq_lane_u64(sums, 0));
    out[i + 1] = static_cast<std::uint32_t>(vgetq_lane_u64(sums, 1));
  }
  for (; i < n; ++i) out[i] = static_cast<std::uint32_t>(std::popcount(query ^ fps[i]));
}

}  // namespace

const KernelTable* neon_table_impl() noexcept {
  static const KernelTable table{
      Isa::kNeon,        "neon",           dot_neon,
      axpy_neon,         gemm_nn_neon,     gemm_nt_neon,
      gemm_tn_acc_neon,  count_equal_u64_neon, hamming_batch_neon,
      scalar_table().simhash_accumulate,
  };
  return &table;
}

}  // namespace dupsim::kernels

#else

namespace dupsim::kernels {
const KernelTable* neon_table_impl() noexcept { return nullptr; }
}  // namespace dupsim::kernels

#endif
