#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "netopt/kernels.hpp"

using namespace netopt::kernels;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar is always available and listed first") {
    const auto tables = available();
    REQUIRE(!tables.empty());
    CHECK(tables.front()->isa == Isa::scalar);
    Isa isa{};
    CHECK(parse_isa("scalar", isa));
    CHECK(isa == Isa::scalar);
    CHECK(!parse_isa("sse9", isa));
  }

  TEST_CASE("every table agrees with the scalar reference") {
    const KernelTable& ref = scalar_table();
    std::mt19937_64 rng(99);
    for (const KernelTable* t : available()) {
      CAPTURE(t->name);
      for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 11u, 16u, 33u}) {
        CAPTURE(n);
        const auto a = random_vector(rng, n, -2.0, 2.0);
        const auto b = random_vector(rng, n, 0.0, 3.0);
        const auto w = random_vector(rng, n, 1.0, 5.0);
        const double tol = 1e-13 * (1.0 + static_cast<double>(n));
        CHECK(std::abs(t->sum(a.data(), n) - ref.sum(a.data(), n)) <= tol);
        CHECK(std::abs(t->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol);

        // Elementwise kernels are bitwise identical.
        std::vector<double> o1(n), o2(n);
        t->queue_update(b.data(), w.data(), a.data(), o1.data(), n);
        ref.queue_update(b.data(), w.data(), a.data(), o2.data(), n);
        CHECK(o1 == o2);
        std::vector<double> acc1 = b, acc2 = b;
        t->accumulate(acc1.data(), a.data(), n);
        ref.accumulate(acc2.data(), a.data(), n);
        CHECK(acc1 == acc2);

        std::vector<double> g1(n), g2(n);
        const double p1 = t->quadratic_penalty(b.data(), w.data(), g1.data(), n);
        const double p2 = ref.quadratic_penalty(b.data(), w.data(), g2.data(), n);
        CHECK(std::abs(p1 - p2) <= tol * (1.0 + std::abs(p2)));
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(g1[i] - g2[i]) <= tol * (1.0 + std::abs(g2[i])));

        CHECK(std::abs(t->shortfall(2.5, w.data(), b.data(), n) - ref.shortfall(2.5, w.data(), b.data(), n)) <=
              tol * 10.0);
        CHECK(std::abs(t->surplus(0.5, w.data(), b.data(), n) - ref.surplus(0.5, w.data(), b.data(), n)) <=
              tol * 10.0);
      }
    }
  }

  TEST_CASE("scalar kernel values") {
    const KernelTable& k = scalar_table();
    const double y[] = {1.0, 2.0};
    const double w[] = {1.0, 1.0};
    double g[2];
    // 1/2 * 9 + 1/2 * (1 + 4)
    CHECK(k.quadratic_penalty(y, w, g, 2) == 7.0);
    CHECK(g[0] == 4.0);
    CHECK(g[1] == 5.0);
    const double a[] = {1.0, 2.0};
    const double served[] = {3.0, 1.0};
    CHECK(k.shortfall(2.0, a, served, 2) == 3.0);
    CHECK(k.surplus(2.0, a, served, 2) == 1.0);
    double out[2];
    const double q[] = {5.0, 0.0};
    k.queue_update(q, a, served, out, 2);
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 1.0);
  }

  TEST_CASE("selection switches the active table") {
    const Isa before = active().isa;
    CHECK(select(Isa::scalar));
    CHECK(active().isa == Isa::scalar);
    for (const KernelTable* t : available()) CHECK(select(t->isa));
    CHECK(select(before));
  }
}
