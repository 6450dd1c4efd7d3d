#pragma once

// Inner-loop arithmetic shared by the model fitting, nearest-neighbour, PCA and
// clustering code. Each kernel has a scalar reference implementation plus
// vectorized variants; the variant is chosen once at runtime from the CPU
// feature set and can be pinned with HYPOSCREEN_SIMD=scalar|avx2|neon.

#include <cstddef>
#include <span>
#include <string_view>

namespace hyposcreen::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

// True when the variant was compiled in and the running CPU supports it.
bool isa_available(Isa isa);

Isa active_isa();

// Overrides the runtime choice. Returns false (and leaves the choice
// unchanged) when the requested variant is unavailable.
bool force_isa(Isa isa);

// Table of kernel entry points for one instruction set.
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
};

const KernelTable& table_for(Isa isa);
const KernelTable& active_table();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_table().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active_table().squared_distance(a.data(), b.data(), a.size());
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active_table().axpy(alpha, x.data(), y.data(), x.size());
}

inline double sum(std::span<const double> a) { return active_table().sum(a.data(), a.size()); }

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* a, std::size_t n);
}  // namespace scalar

#if defined(HYPOSCREEN_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* a, std::size_t n);
}  // namespace avx2
#endif

#if defined(HYPOSCREEN_HAVE_NEON)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* a, std::size_t n);
}  // namespace neon
#endif

}  // namespace hyposcreen::kernels
