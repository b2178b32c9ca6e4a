#pragma once

// Per-user vector kernels used in the simulation inner loops. Each kernel has
// a scalar reference implementation plus SIMD variants (AVX2 on x86-64, NEON
// on AArch64) picked at runtime. Elementwise kernels are bitwise identical to
// the scalar path; reductions differ only in summation order.
//
// The environment variable NETOPT_SIMD=scalar|avx2|neon|auto overrides the
// startup choice.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace netopt::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  const char* name;
  double (*sum)(const double* a, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// out = max(0, q + a - x)
  void (*queue_update)(const double* q, const double* a, const double* x, double* out,
                       std::size_t n);
  /// acc += x
  void (*accumulate)(double* acc, const double* x, std::size_t n);
  /// Returns 1/2 (sum y)^2 + 1/2 sum w y^2 and, when grad is non-null,
  /// writes grad = sum(y) + w * y.
  double (*quadratic_penalty)(const double* y, const double* w, double* grad, std::size_t n);
  /// sum max(0, k a - served)
  double (*shortfall)(double k, const double* a, const double* served, std::size_t n);
  /// sum max(0, served - k a)
  double (*surplus)(double k, const double* a, const double* served, std::size_t n);
};

const KernelTable& scalar_table();
/// Tables compiled in and supported by the host, scalar first.
std::vector<const KernelTable*> available();
const KernelTable& active();
/// Switches the active table; returns false when the ISA is unavailable.
bool select(Isa isa);
bool parse_isa(std::string_view text, Isa& out);

inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }
double dot(std::span<const double> a, std::span<const double> b);
void queue_update(std::span<const double> q, std::span<const double> a,
                  std::span<const double> x, std::span<double> out);
void accumulate(std::span<double> acc, std::span<const double> x);
double quadratic_penalty(std::span<const double> y, std::span<const double> w,
                         std::span<double> grad = {});
double shortfall(double k, std::span<const double> a, std::span<const double> served);
double surplus(double k, std::span<const double> a, std::span<const double> served);

namespace detail {
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace netopt::kernels
