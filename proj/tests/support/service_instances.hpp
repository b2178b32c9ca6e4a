#pragma once

// Random service instances whose optimal allocation is strictly positive in
// every state, so the allocation map is smooth around the optimum.

#include <random>

#include "netopt/primal2.hpp"
#include "support/systems.hpp"

namespace netopt::testing {

struct ServiceInstance {
  Matrix gammas;
  QuarticPenalty penalty{Matrix::Ones(1, 1), 0.0};
  Vector f;
  Vector A;
  double V = 1.0;
  Vector lambda_star;
};

inline primal2::OracleOptions tight_oracle() {
  primal2::OracleOptions o;
  o.rel_tol = 1e-13;
  return o;
}

/// Smallest allocation over users and states at lambda.
inline double min_allocation(const Penalty& pen, const Vector& lambda, double V) {
  double lo = 1e300;
  for (std::size_t s = 0; s < pen.states(); ++s)
    lo = std::min(lo, primal2::per_slot_allocation(pen, s, lambda, V).minCoeff());
  return lo;
}

/// N users, S states, quartic coefficient c; redraws until every optimal
/// allocation is at least `margin`.
inline ServiceInstance random_service_instance(std::mt19937_64& rng, int N = 4, int S = 3,
                                               double c = 0.5, double margin = 0.05) {
  for (;;) {
    ServiceInstance inst;
    inst.gammas.resize(N, S);
    for (int n = 0; n < N; ++n)
      for (int s = 0; s < S; ++s) inst.gammas(n, s) = uniform(rng, 0.5, 1.0);
    inst.penalty = QuarticPenalty(inst.gammas, c);
    inst.f = random_distribution(rng, static_cast<std::size_t>(S), 1.0);
    inst.A.resize(N);
    for (auto& a : inst.A) a = uniform(rng, 0.3, 0.6);
    inst.lambda_star = primal2::dual2_oracle(inst.penalty, inst.f, inst.A, inst.V, tight_oracle()).lambda;
    if (min_allocation(inst.penalty, inst.lambda_star, inst.V) >= margin) return inst;
  }
}

}  // namespace netopt::testing
