#include "netopt/kernels.hpp"

#include <algorithm>

namespace netopt::kernels {
namespace {

double sum_scalar(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void queue_update_scalar(const double* q, const double* a, const double* x, double* out,
                         std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(0.0, (q[i] + a[i]) - x[i]);
}

void accumulate_scalar(double* acc, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i];
}

double quadratic_penalty_scalar(const double* y, const double* w, double* grad, std::size_t n) {
  const double total = sum_scalar(y, n);
  double diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag += w[i] * y[i] * y[i];
  if (grad != nullptr) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = total + w[i] * y[i];
  }
  return 0.5 * total * total + 0.5 * diag;
}

double shortfall_scalar(double k, const double* a, const double* served, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::max(0.0, k * a[i] - served[i]);
  return s;
}

double surplus_scalar(double k, const double* a, const double* served, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::max(0.0, served[i] - k * a[i]);
  return s;
}

constexpr KernelTable kScalar{
    Isa::scalar,      "scalar",           sum_scalar,       dot_scalar,     queue_update_scalar,
    accumulate_scalar, quadratic_penalty_scalar, shortfall_scalar, surplus_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace netopt::kernels
