#include <atomic>
#include <cstdlib>
#include <string_view>

#include "dupsim/kernels.hpp"

namespace dupsim::kernels {

const KernelTable* avx2_table_impl() noexcept;
const KernelTable* neon_table_impl() noexcept;

namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* detect() noexcept {
  if (const char* env = std::getenv("DUPSIM_ISA")) {
    Isa requested;
    if (parse_isa(env, requested)) {
      if (requested == Isa::kScalar) return &scalar_table();
      if (requested == Isa::kAvx2 && avx2_table()) return avx2_table();
      if (requested == Isa::kNeon && neon_table()) return neon_table();
    }
  }
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() noexcept {
  static std::atomic<const KernelTable*> current{detect()};
  return current;
}

}  // namespace

const KernelTable* avx2_table() noexcept {
  static const KernelTable* t = cpu_has_avx2() ? avx2_table_impl() : nullptr;
  return t;
}

const KernelTable* neon_table() noexcept { return neon_table_impl(); }

const KernelTable& active() noexcept { return *slot().load(std::memory_order_relaxed); }

Isa active_isa() noexcept { return active().isa; }

bool force_isa(Isa isa) noexcept {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::kScalar: t = &scalar_table(); break;
    case Isa::kAvx2: t = avx2_table(); break;
    case Isa::kNeon: t = neon_table(); break;
  }
  if (!t) return false;
  slot().store(t, std::memory_order_relaxed);
  return true;
}

const char* isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

bool parse_isa(std::string_view name, Isa& out) noexcept {
  if (name == "scalar") out = Isa::kScalar;
  else if (name == "avx2") out = Isa::kAvx2;
  else if (name == "neon") out = Isa::kNeon;
  else return false;
  return true;
}

}  // namespace dupsim::kernels
