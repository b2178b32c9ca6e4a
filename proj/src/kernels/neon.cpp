// AArch64 variant; NEON is part of the base ISA there, so no runtime probe.

#include <arm_neon.h>

#include <algorithm>

#include "netopt/kernels.hpp"

namespace netopt::kernels {
namespace {

inline double hsum(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

double sum_neon(const double* a, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(a + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void queue_update_neon(const double* q, const double* a, const double* x, double* out,
                       std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vsubq_f64(vaddq_f64(vld1q_f64(q + i), vld1q_f64(a + i)), vld1q_f64(x + i));
    vst1q_f64(out + i, vmaxq_f64(v, zero));
  }
  for (; i < n; ++i) out[i] = std::max(0.0, (q[i] + a[i]) - x[i]);
}

void accumulate_neon(double* acc, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), vld1q_f64(x + i)));
  for (; i < n; ++i) acc[i] += x[i];
}

double quadratic_penalty_neon(const double* y, const double* w, double* grad, std::size_t n) {
  float64x2_t tot = vdupq_n_f64(0.0);
  float64x2_t diag = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t yv = vld1q_f64(y + i);
    tot = vaddq_f64(tot, yv);
    diag = vaddq_f64(diag, vmulq_f64(vmulq_f64(vld1q_f64(w + i), yv), yv));
  }
  double total = hsum(tot);
  double d = hsum(diag);
  for (std::size_t j = i; j < n; ++j) {
    total += y[j];
    d += w[j] * y[j] * y[j];
  }
  if (grad != nullptr) {
    const float64x2_t tv = vdupq_n_f64(total);
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
      vst1q_f64(grad + j, vaddq_f64(tv, vmulq_f64(vld1q_f64(w + j), vld1q_f64(y + j))));
    }
    for (; j < n; ++j) grad[j] = total + w[j] * y[j];
  }
  return 0.5 * total * total + 0.5 * d;
}

template <bool Shortfall>
double gap_neon(double k, const double* a, const double* served, std::size_t n) {
  const float64x2_t kv = vdupq_n_f64(k);
  const float64x2_t zero = vdupq_n_f64(0.0);
  float64x2_t acc = zero;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t target = vmulq_f64(kv, vld1q_f64(a + i));
    const float64x2_t got = vld1q_f64(served + i);
    const float64x2_t gap = Shortfall ? vsubq_f64(target, got) : vsubq_f64(got, target);
    acc = vaddq_f64(acc, vmaxq_f64(gap, zero));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double gap = Shortfall ? k * a[i] - served[i] : served[i] - k * a[i];
    s += std::max(0.0, gap);
  }
  return s;
}

double shortfall_neon(double k, const double* a, const double* served, std::size_t n) {
  return gap_neon<true>(k, a, served, n);
}

double surplus_neon(double k, const double* a, const double* served, std::size_t n) {
  return gap_neon<false>(k, a, served, n);
}

constexpr KernelTable kNeon{
    Isa::neon,      "neon",           sum_neon,       dot_neon,     queue_update_neon,
    accumulate_neon, quadratic_penalty_neon, shortfall_neon, surplus_neon,
};

}  // namespace

namespace detail {
const KernelTable* neon_table() { return &kNeon; }
}  // namespace detail

}  // namespace netopt::kernels
