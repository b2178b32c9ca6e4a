// Compiled with -mavx2; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>

#include "netopt/kernels.hpp"

namespace netopt::kernels {
namespace {

inline double hsum(__m256d v) {
  // Fixed (l0 + l1) + (l2 + l3) order keeps reductions reproducible.
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void queue_update_avx2(const double* q, const double* a, const double* x, double* out,
                       std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_sub_pd(_mm256_add_pd(_mm256_loadu_pd(q + i), _mm256_loadu_pd(a + i)),
                              _mm256_loadu_pd(x + i));
    // maxpd returns its second operand on NaN, matching std::max(0.0, v).
    _mm256_storeu_pd(out + i, _mm256_max_pd(v, zero));
  }
  for (; i < n; ++i) out[i] = std::max(0.0, (q[i] + a[i]) - x[i]);
}

void accumulate_avx2(double* acc, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) acc[i] += x[i];
}

double quadratic_penalty_avx2(const double* y, const double* w, double* grad, std::size_t n) {
  __m256d tot = _mm256_setzero_pd();
  __m256d diag = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    tot = _mm256_add_pd(tot, yv);
    diag = _mm256_add_pd(diag, _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i), yv), yv));
  }
  double total = hsum(tot);
  double d = hsum(diag);
  for (std::size_t j = i; j < n; ++j) {
    total += y[j];
    d += w[j] * y[j] * y[j];
  }
  if (grad != nullptr) {
    const __m256d tv = _mm256_set1_pd(total);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      _mm256_storeu_pd(grad + j,
                       _mm256_add_pd(tv, _mm256_mul_pd(_mm256_loadu_pd(w + j), _mm256_loadu_pd(y + j))));
    }
    for (; j < n; ++j) grad[j] = total + w[j] * y[j];
  }
  return 0.5 * total * total + 0.5 * d;
}

template <bool Shortfall>
double gap_avx2(double k, const double* a, const double* served, std::size_t n) {
  const __m256d kv = _mm256_set1_pd(k);
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d target = _mm256_mul_pd(kv, _mm256_loadu_pd(a + i));
    const __m256d got = _mm256_loadu_pd(served + i);
    const __m256d gap = Shortfall ? _mm256_sub_pd(target, got) : _mm256_sub_pd(got, target);
    acc = _mm256_add_pd(acc, _mm256_max_pd(gap, zero));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double gap = Shortfall ? k * a[i] - served[i] : served[i] - k * a[i];
    s += std::max(0.0, gap);
  }
  return s;
}

double shortfall_avx2(double k, const double* a, const double* served, std::size_t n) {
  return gap_avx2<true>(k, a, served, n);
}

double surplus_avx2(double k, const double* a, const double* served, std::size_t n) {
  return gap_avx2<false>(k, a, served, n);
}

constexpr KernelTable kAvx2{
    Isa::avx2,      "avx2",           sum_avx2,       dot_avx2,     queue_update_avx2,
    accumulate_avx2, quadratic_penalty_avx2, shortfall_avx2, surplus_avx2,
};

}  // namespace

namespace detail {
const KernelTable* avx2_table() { return &kAvx2; }
}  // namespace detail

}  // namespace netopt::kernels
