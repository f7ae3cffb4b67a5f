#pragma once

// Data-parallel inner loops used by the embedder, the index and the hash
// baselines. Each kernel has a scalar reference implementation and, where the
// target allows it, AVX2 and NEON variants. The variant is picked once at
// startup from CPUID (or DUPSIM_ISA=scalar|avx2|neon) and can be overridden
// by tests. All matrices are dense row-major and contiguous.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <type_traits>

namespace dupsim::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  const char* name;

  float (*dot)(const float* a, const float* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  // C[m,n] = (accumulate ? C : 0) + A[m,k] * B[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                  bool accumulate);
  // C[m,n] = (accumulate ? C : 0) + A[m,k] * B[n,k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                  bool accumulate);
  // C[m,n] += A[k,m]^T * B[k,n]
  void (*gemm_tn_acc)(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);

  // Number of positions where a[i] == b[i].
  std::size_t (*count_equal_u64)(const std::uint64_t* a, const std::uint64_t* b, std::size_t n);
  // out[i] = popcount(query ^ fps[i])
  void (*hamming_batch)(std::uint64_t query, const std::uint64_t* fps, std::size_t n, std::uint32_t* out);
  // counters[b] += ((hash >> b) & 1) ? weight : -weight, for b in [0, 64)
  void (*simhash_accumulate)(std::uint64_t hash, std::int32_t weight, std::int32_t* counters);
};

const KernelTable& scalar_table() noexcept;
// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

const KernelTable& active() noexcept;
Isa active_isa() noexcept;
// Returns false when the requested variant is unavailable; the active table is
// left unchanged in that case.
bool force_isa(Isa isa) noexcept;
const char* isa_name(Isa isa) noexcept;
bool parse_isa(std::string_view name, Isa& out) noexcept;

// Precision-generic front ends. float routes through the active table; double
// always uses the scalar reference (it exists for gradient checking).
namespace ref {

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const T s = dot(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

template <class T>
void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace ref

template <class T>
inline T dot(const T* a, const T* b, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) return active().dot(a, b, n);
  else return ref::dot(a, b, n);
}

template <class T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) active().axpy(alpha, x, y, n);
  else ref::axpy(alpha, x, y, n);
}

template <class T>
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                    bool accumulate = false) {
  if constexpr (std::is_same_v<T, float>) active().gemm_nn(m, n, k, a, b, c, accumulate);
  else ref::gemm_nn(m, n, k, a, b, c, accumulate);
}

template <class T>
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                    bool accumulate = false) {
  if constexpr (std::is_same_v<T, float>) active().gemm_nt(m, n, k, a, b, c, accumulate);
  else ref::gemm_nt(m, n, k, a, b, c, accumulate);
}

template <class T>
inline void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  if constexpr (std::is_same_v<T, float>) active().gemm_tn_acc(m, n, k, a, b, c);
  else ref::gemm_tn_acc(m, n, k, a, b, c);
}

}  // namespace dupsim::kernels
