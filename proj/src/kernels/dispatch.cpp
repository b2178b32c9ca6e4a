#include <atomic>
#include <cstdlib>
#include <stdexcept>

#include "netopt/error.hpp"
#include "netopt/kernels.hpp"

namespace netopt::kernels {

namespace detail {
#if !defined(NETOPT_HAVE_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif
#if !defined(NETOPT_HAVE_NEON)
const KernelTable* neon_table() { return nullptr; }
#endif
}  // namespace detail

namespace {

bool host_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(NETOPT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Isa::neon:
      return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable* table_for(Isa isa) {
  if (!host_supports(isa)) return nullptr;
  switch (isa) {
    case Isa::scalar:
      return &scalar_table();
    case Isa::avx2:
      return detail::avx2_table();
    case Isa::neon:
      return detail::neon_table();
  }
  return nullptr;
}

const KernelTable* best_available() {
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (const KernelTable* t = table_for(isa)) return t;
  }
  return &scalar_table();
}

const KernelTable* initial_table() {
  const char* env = std::getenv("NETOPT_SIMD");
  if (env != nullptr) {
    Isa isa{};
    if (parse_isa(env, isa)) {
      if (const KernelTable* t = table_for(isa)) return t;
    }
  }
  return best_available();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

void check_same(std::size_t a, std::size_t b) {
  if (a != b) throw InvalidArgument("kernel operands differ in length");
}

}  // namespace

std::vector<const KernelTable*> available() {
  std::vector<const KernelTable*> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (const KernelTable* t = table_for(isa)) out.push_back(t);
  }
  return out;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (t == nullptr) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

bool parse_isa(std::string_view text, Isa& out) {
  if (text == "scalar") {
    out = Isa::scalar;
  } else if (text == "avx2") {
    out = Isa::avx2;
  } else if (text == "neon") {
    out = Isa::neon;
  } else if (text == "auto") {
    out = best_available()->isa;
  } else {
    return false;
  }
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

void queue_update(std::span<const double> q, std::span<const double> a, std::span<const double> x,
                  std::span<double> out) {
  check_same(q.size(), a.size());
  check_same(q.size(), x.size());
  check_same(q.size(), out.size());
  active().queue_update(q.data(), a.data(), x.data(), out.data(), q.size());
}

void accumulate(std::span<double> acc, std::span<const double> x) {
  check_same(acc.size(), x.size());
  active().accumulate(acc.data(), x.data(), acc.size());
}

double quadratic_penalty(std::span<const double> y, std::span<const double> w,
                         std::span<double> grad) {
  check_same(y.size(), w.size());
  if (!grad.empty()) check_same(y.size(), grad.size());
  return active().quadratic_penalty(y.data(), w.data(), grad.empty() ? nullptr : grad.data(),
                                    y.size());
}

double shortfall(double k, std::span<const double> a, std::span<const double> served) {
  check_same(a.size(), served.size());
  return active().shortfall(k, a.data(), served.data(), a.size());
}

double surplus(double k, std::span<const double> a, std::span<const double> served) {
  check_same(a.size(), served.size());
  return active().surplus(k, a.data(), served.data(), a.size());
}

}  // namespace netopt::kernels
