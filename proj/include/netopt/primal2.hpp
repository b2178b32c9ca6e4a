#pragma once

// Drift-plus-penalty for stochastic service allocation with a multiplier
// offset, plus the sensitivity-matrix machinery behind the zero-shot
// multiplier-vector updates.

#include <cstddef>
#include <vector>

#include "netopt/estimate.hpp"
#include "netopt/model.hpp"

namespace netopt::primal2 {

/// g_s(lam) = argmin_{y >= 0} V P_s(y) - lam'y.
///
/// Active-set iteration: solve the stationarity system on the inactive set,
/// drop every negative coordinate, repeat. For a quadratic penalty each pass
/// is one linear solve and the dropped set only grows, so at most N + 1
/// passes are needed; other penalties run damped Newton inside each pass and
/// may re-admit coordinates whose KKT sign is violated.
Vector per_slot_allocation(const Penalty& penalty, std::size_t s, const Vector& lam, double V);

/// Local Jacobian dg_{m,s}/dlam_n at the allocation y = g_s(lam): (1/V) times
/// the inverse of the penalty Hessian restricted to the inactive set, zero in
/// rows/columns of coordinates at 0 with strict slack V dP/dy_n > lam_n.
/// Coordinates at 0 with slack exactly 0 count as inactive.
Matrix grad_g(const Penalty& penalty, std::size_t s, const Vector& y, const Vector& lam, double V);

/// H_{n,m} = sum_s f_s (grad_g_s)_{n,m}.
Matrix build_H(const Vector& f, const std::vector<Matrix>& grad_g_by_state);

/// Pre-change operating point.
struct Snapshot {
  Vector lambda_star;
  /// N x S, column s holds g_s(lambda*).
  Matrix g;
  std::vector<Matrix> grad_g;
  Vector f;
  Vector A;
  double V = 100.0;
  std::vector<UserId> ids;

  std::size_t size() const { return static_cast<std::size_t>(lambda_star.size()); }
  void validate() const;
  Matrix H() const { return build_H(f, grad_g); }
};

/// g and grad_g evaluated analytically at `lambda` for every state.
Snapshot snapshot_at(const Penalty& penalty, const Vector& f, const Vector& A, double V,
                     const Vector& lambda, std::vector<UserId> ids = {});

/// Result of solving H x = b for a zero-shot update.
struct SensitivitySolve {
  Vector x;
  double rcond = 1.0;
  bool regularized = false;
};

/// LU with partial pivoting. When the reciprocal condition estimate drops
/// below min_rcond the system is solved with H + mu I, mu = 1e-8 trace(H)/N.
SensitivitySolve solve_sensitivity(const Matrix& H, const Vector& b, double min_rcond = 1e-12);

/// lambda* + H^{-1}(A_new - A), clamped at 0.
ZeroShotEstimate zeroshot_requirements(const Snapshot& snap, const Vector& A_new);

/// The user at `leaving` has its requirement set to 0; its entry is dropped
/// from the result.
ZeroShotEstimate zeroshot_leave(const Snapshot& snap, std::size_t leaving);

/// A newcomer with requirement `requirement` is spread evenly over the
/// existing users; the newcomer's entry (last) is the mean of their estimates.
ZeroShotEstimate zeroshot_join(const Snapshot& snap, double requirement);

/// lambda* + Hhat^{-1} d with Hhat built from f_new and
/// d_n = sum_s (f_s - f_new_s) g_{n,s}(lambda*), clamped at 0.
ZeroShotEstimate zeroshot_distribution(const Snapshot& snap, const Vector& f_new);

struct QueueState {
  Vector Q;
  Vector lambda0;

  Vector multipliers() const { return lambda0 + Q; }
};

/// Q <- max(0, Q + A - x).
QueueState queue_step(const QueueState& q, const Vector& A, const Vector& x);

/// Allocation for this slot with multipliers lambda0 + Q.
Vector dpp_step(const StochasticSystem& sys, const QueueState& q, std::size_t state);

struct OracleOptions {
  /// Stop when ||sum_s f_s g_s(lambda) - A||_inf <= rel_tol * max(A).
  double rel_tol = 1e-8;
  int max_iterations = 100000;
  /// Once the residual is within 1e3 * rel_tol, try projected Newton steps
  /// (kept only when they reduce the residual).
  bool newton_polish = true;
};

struct OracleResult {
  Vector lambda;
  /// ||sum_s f_s g_s(lambda) - A||_inf / max(A).
  double residual = 0.0;
  int iterations = 0;
};

/// Maximizes the concave dual by projected gradient ascent with backtracking.
OracleResult dual2_oracle(const Penalty& penalty, const Vector& f, const Vector& A, double V,
                          const OracleOptions& opts = {});
OracleResult dual2_oracle(const StochasticSystem& sys, const OracleOptions& opts = {});

/// Expected served rate sum_s f_s g_s(lambda).
Vector mean_service(const Penalty& penalty, const Vector& f, const Vector& lambda, double V);

/// Expected penalty sum_s f_s P_s(g_s(lambda)), unscaled by V.
double mean_penalty(const Penalty& penalty, const Vector& f, const Vector& lambda, double V);

/// Snapshot at lambda* = lambda0 + Q.
Snapshot snapshot_build(const StochasticSystem& sys, const QueueState& q);

/// lambda0 <- lambda0 + (lam_new - lam_old); Q unchanged.
QueueState apply_offset_shift(const QueueState& q, const Vector& lam_old, const Vector& lam_new);

/// Leave: drops entry `leaving` from Q, lambda0 and lam_old, then shifts by the
/// (already reduced) estimate.
QueueState apply_offset_shift_leave(const QueueState& q, std::size_t leaving,
                                    const Vector& lam_old, const Vector& lam_new);

/// Join: shifts the existing users and appends the newcomer with
/// lambda0 = lam_new[N] and Q = 0.
QueueState apply_offset_shift_join(const QueueState& q, const Vector& lam_old,
                                   const Vector& lam_new);

}  // namespace netopt::primal2
