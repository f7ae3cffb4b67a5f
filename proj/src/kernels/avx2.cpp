// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "dupsim/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <bit>

namespace dupsim::kernels {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  __m256 acc2 = _mm256_setzero_ps();
  __m256 acc3 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    acc2 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 16), _mm256_loadu_ps(b + i + 16), acc2);
    acc3 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 24), _mm256_loadu_ps(b + i + 24), acc3);
  }
  for (; i + 8 <= n; i += 8) acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float s = hsum(_mm256_add_ps(_mm256_add_ps(acc0, acc1), _mm256_add_ps(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// crow[0..n) += a0*b0 + a1*b1 + a2*b2 + a3*b3
inline void fma4_row(float* crow, std::size_t n, float a0, float a1, float a2, float a3, const float* b0,
                     const float* b1, const float* b2, const float* b3) {
  const __m256 v0 = _mm256_set1_ps(a0), v1 = _mm256_set1_ps(a1), v2 = _mm256_set1_ps(a2),
               v3 = _mm256_set1_ps(a3);
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256 c = _mm256_loadu_ps(crow + j);
    c = _mm256_fmadd_ps(v0, _mm256_loadu_ps(b0 + j), c);
    c = _mm256_fmadd_ps(v1, _mm256_loadu_ps(b1 + j), c);
    c = _mm256_fmadd_ps(v2, _mm256_loadu_ps(b2 + j), c);
    c = _mm256_fmadd_ps(v3, _mm256_loadu_ps(b3 + j), c);
    _mm256_storeu_ps(crow + j, c);
  }
  for (; j < n; ++j) crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                  bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
    const float* arow = a + i * k;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4)
      fma4_row(crow, n, arow[p], arow[p + 1], arow[p + 2], arow[p + 3], b + p * n, b + (p + 1) * n,
               b + (p + 2) * n, b + (p + 3) * n);
    for (; p < k; ++p) axpy_avx2(arow[p], b + p * n, crow, n);
  }
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                  bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const float* b0 = b + j * k;
      const float* b1 = b0 + k;
      const float* b2 = b1 + k;
      const float* b3 = b2 + k;
      __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps(), s2 = _mm256_setzero_ps(),
             s3 = _mm256_setzero_ps();
      std::size_t p = 0;
      for (; p + 8 <= k; p += 8) {
        const __m256 av = _mm256_loadu_ps(arow + p);
        s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), s0);
        s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), s1);
        s2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + p), s2);
        s3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + p), s3);
      }
      float r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        r0 += arow[p] * b0[p];
        r1 += arow[p] * b1[p];
        r2 += arow[p] * b2[p];
        r3 += arow[p] * b3[p];
      }
      if (accumulate) {
        crow[j] += r0;
        crow[j + 1] += r1;
        crow[j + 2] += r2;
        crow[j + 3] += r3;
      } else {
        crow[j] = r0;
        crow[j + 1] = r1;
        crow[j + 2] = r2;
        crow[j + 3] = r3;
      }
    }
    for (; j < n; ++j) {
      const float s = dot_avx2(arow, b + j * k, k);
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void gemm_tn_acc_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4)
      fma4_row(crow, n, a[p * m + i], a[(p + 1) * m + i], a[(p + 2) * m + i], a[(p + 3) * m + i], b + p * n,
               b + (p + 1) * n, b + (p + 2) * n, b + (p + 3) * n);
    for (; p < k; ++p) axpy_avx2(a[p * m + i], b + p * n, crow, n);
  }
}

std::size_t count_equal_u64_avx2(const std::uint64_t* a, const std::uint64_t* b, std::size_t n) {
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    const int mask = _mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpeq_epi64(va, vb)));
    count += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(mask)));
  }
  for (; i < n; ++i) count += a[i] == b[i];
  return count;
}

void hamming_batch_avx2(std::uint64_t query, const std::uint64_t* fps, std::size_t n, std::uint32_t* out) {
  const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4, 0, 1, 1, 2, 1, 2, 2, 3, 1,
                                       2, 2, 3, 2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0F);
  const __m256i vq = _mm256_set1_epi64x(static_cast<long long>(query));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i x = _mm256_xor_si256(vq, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(fps + i)));
    const __m256i lo = _mm256_and_si256(x, low_mask);
    const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(x, 4), low_mask);
    const __m256i bytes = _mm256_add_epi8(_mm256_shuffle_epi8(lut, lo), _mm256_shuffle_epi8(lut, hi));
    const __m256i sums = _mm256_sad_epu8(bytes, _mm256_setzero_si256());
    alignas(32) std::uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), sums);
    for (int l = 0; l < 4; ++l) out[i + l] = static_cast<std::uint32_t>(lanes[l]);
  }
  for (; i < n; ++i) out[i] = static_cast<std::uint32_t>(std::popcount(query ^ fps[i]));
}

void simhash_accumulate_avx2(std::uint64_t hash, std::int32_t weight, std::int32_t* counters) {
  const __m256i lane = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
  const __m256i one = _mm256_set1_epi32(1);
  const __m256i pos = _mm256_set1_epi32(weight);
  const __m256i neg = _mm256_set1_epi32(-weight);
  const __m256i words[2] = {_mm256_set1_epi32(static_cast<int>(static_cast<std::uint32_t>(hash))),
                            _mm256_set1_epi32(static_cast<int>(static_cast<std::uint32_t>(hash >> 32)))};
  for (int v = 0; v < 8; ++v) {
    const __m256i shift = _mm256_add_epi32(lane, _mm256_set1_epi32((v % 4) * 8));
    const __m256i bits = _mm256_and_si256(_mm256_srlv_epi32(words[v / 4], shift), one);
    const __m256i delta = _mm256_blendv_epi8(neg, pos, _mm256_cmpeq_epi32(bits, one));
    __m256i* dst = reinterpret_cast<__m256i*>(counters + v * 8);
    _mm256_storeu_si256(dst, _mm256_add_epi32(_mm256_loadu_si256(dst), delta));
  }
}

}  // namespace

const KernelTable* avx2_table_impl() noexcept {
  static const KernelTable table{
      Isa::kAvx2,        "avx2",           dot_avx2,
      axpy_avx2,         gemm_nn_avx2,     gemm_nt_avx2,
      gemm_tn_acc_avx2,  count_equal_u64_avx2, hamming_batch_avx2,
      simhash_accumulate_avx2,
  };
  return &table;
}

}  // namespace dupsim::kernels

#else

namespace dupsim::kernels {
const KernelTable* avx2_table_impl() noexcept { return nullptr; }
}  // namespace dupsim::kernels

#endif
