#pragma once

// Test systems built straight from their defining formulas, plus a
// non-quadratic penalty used where first-order updates must show curvature.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "netopt/model.hpp"

namespace netopt::testing {

inline RateSystem reference_rate_system() {
  RateSystem sys;
  sys.capacity = 10.0;
  sys.step_size = 0.003;
  for (int n = 1; n <= 11; ++n)
    sys.users.push_back({UserId{n}, PowerUtility(0.14 + 0.06 * n), 1.4 + 0.6 * n});
  return sys;
}

inline Matrix reference_service_gammas_matrix(const std::vector<std::int64_t>& ids,
                                              std::size_t states = 5) {
  Matrix g(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(states));
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t s = 1; s <= states; ++s)
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s - 1)) =
          0.2 + 0.1 * static_cast<double>((static_cast<std::int64_t>(s) + ids[i] + 5) % 7);
  return g;
}

inline StochasticSystem reference_service_system(double V = 100.0) {
  StochasticSystem sys;
  std::vector<std::int64_t> ids;
  for (int n = 1; n <= 11; ++n) {
    ids.push_back(n);
    sys.ids.push_back(UserId{n});
  }
  sys.penalty = QuadraticPenalty(reference_service_gammas_matrix(ids));
  sys.f = Vector::Constant(5, 0.2);
  sys.A.resize(11);
  for (int n = 1; n <= 11; ++n) sys.A[n - 1] = 1.8 + 0.2 * n;
  sys.V = V;
  return sys;
}

/// P_s(y) = 1/2 (sum y)^2 + sum y_n^2 / (2 gamma_{n,s}) + c/4 sum y_n^4.
class QuarticPenalty final : public Penalty {
 public:
  QuarticPenalty(Matrix gammas, double c) : gammas_(std::move(gammas)), c_(c) {}

  std::size_t users() const override { return static_cast<std::size_t>(gammas_.rows()); }
  std::size_t states() const override { return static_cast<std::size_t>(gammas_.cols()); }

  double value(std::size_t s, const Vector& y) const override {
    const auto col = gammas_.col(static_cast<Eigen::Index>(s)).array();
    const double total = y.sum();
    return 0.5 * total * total + (y.array().square() / (2.0 * col)).sum() +
           0.25 * c_ * y.array().pow(4).sum();
  }
  Vector gradient(std::size_t s, const Vector& y) const override {
    const auto col = gammas_.col(static_cast<Eigen::Index>(s)).array();
    return (Vector::Constant(y.size(), y.sum()).array() + y.array() / col + c_ * y.array().cube())
        .matrix();
  }
  Matrix hessian(std::size_t s, const Vector& y) const override {
    const auto col = gammas_.col(static_cast<Eigen::Index>(s)).array();
    Matrix h = Matrix::Ones(y.size(), y.size());
    h.diagonal().array() += 1.0 / col + 3.0 * c_ * y.array().square();
    return h;
  }
  double strong_convexity(std::size_t s) const override {
    return 1.0 / gammas_.col(static_cast<Eigen::Index>(s)).maxCoeff();
  }

 private:
  Matrix gammas_;
  double c_;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random rate-control system with N in [3, 8].
inline RateSystem random_rate_system(std::mt19937_64& rng) {
  RateSystem sys;
  const int n = std::uniform_int_distribution<int>(3, 8)(rng);
  for (int i = 0; i < n; ++i)
    sys.users.push_back({UserId{i + 1}, PowerUtility(uniform(rng, 0.2, 0.8)), uniform(rng, 1.0, 4.0)});
  sys.capacity = uniform(rng, 5.0, 15.0);
  return sys;
}

/// Random probability vector with every entry at least floor / size.
inline Vector random_distribution(std::mt19937_64& rng, std::size_t states, double floor = 0.2) {
  Vector f(static_cast<Eigen::Index>(states));
  for (auto& v : f) v = floor / static_cast<double>(states) + uniform(rng, 0.0, 1.0);
  return f / f.sum();
}

}  // namespace netopt::testing
