#include <atomic>
#include <cstdlib>
#include <string>

#include "hyposcreen/kernels.hpp"

namespace hyposcreen::kernels {
namespace {

constexpr KernelTable kScalarTable{scalar::dot, scalar::squared_distance, scalar::axpy,
                                   scalar::sum};
#if defined(HYPOSCREEN_HAVE_AVX2)
constexpr KernelTable kAvx2Table{avx2::dot, avx2::squared_distance, avx2::axpy, avx2::sum};
#endif
#if defined(HYPOSCREEN_HAVE_NEON)
constexpr KernelTable kNeonTable{neon::dot, neon::squared_distance, neon::axpy, neon::sum};
#endif

Isa detect() {
  if (const char* env = std::getenv("HYPOSCREEN_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::Scalar;
    if (want == "avx2" && isa_available(Isa::Avx2)) return Isa::Avx2;
    if (want == "neon" && isa_available(Isa::Neon)) return Isa::Neon;
  }
  if (isa_available(Isa::Avx2)) return Isa::Avx2;
  if (isa_available(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{&table_for(detect())};
  return table;
}

std::atomic<Isa>& current_isa() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(HYPOSCREEN_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(HYPOSCREEN_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  switch (isa) {
#if defined(HYPOSCREEN_HAVE_AVX2)
    case Isa::Avx2: return kAvx2Table;
#endif
#if defined(HYPOSCREEN_HAVE_NEON)
    case Isa::Neon: return kNeonTable;
#endif
    default: return kScalarTable;
  }
}

Isa active_isa() { return current_isa().load(); }

const KernelTable& active_table() { return *current().load(std::memory_order_relaxed); }

bool force_isa(Isa isa) {
  if (!isa_available(isa)) return false;
  current_isa().store(isa);
  current().store(&table_for(isa));
  return true;
}

}  // namespace hyposcreen::kernels
