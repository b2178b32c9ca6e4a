#include "netopt/primal2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "netopt/error.hpp"
#include "netopt/kernels.hpp"

namespace netopt::primal2 {

namespace {

using Index = Eigen::Index;

std::vector<Index> indices_where(const std::vector<char>& mask) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<Index>(i));
  }
  return out;
}

Matrix restrict(const Matrix& m, const std::vector<Index>& idx) {
  const auto k = static_cast<Index>(idx.size());
  Matrix out(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) out(i, j) = m(idx[i], idx[j]);
  }
  return out;
}

Vector restrict(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
  return out;
}

void check_allocation_inputs(const Penalty& penalty, std::size_t s, const Vector& lam, double V) {
  if (!(V > 0.0)) throw InvalidArgument("trade-off constant V must be positive");
  if (s >= penalty.states()) throw InvalidArgument("channel state out of range");
  if (static_cast<std::size_t>(lam.size()) != penalty.users()) {
    throw InvalidArgument("multiplier vector length does not match the number of users");
  }
  if (!lam.allFinite()) throw InvalidArgument("multipliers must be finite");
}

Vector allocate_quadratic(const Penalty& penalty, std::size_t s, const Vector& lam, double V) {
  const auto n = lam.size();
  std::vector<char> free(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) free[static_cast<std::size_t>(i)] = lam[i] > 0.0;
  const Matrix hess = penalty.hessian(s, Vector::Zero(n));

  for (Index pass = 0; pass <= n + 1; ++pass) {
    const auto idx = indices_where(free);
    Vector y = Vector::Zero(n);
    if (idx.empty()) return y;
    const Vector sol = restrict(hess, idx).llt().solve(restrict(lam, idx) / V);
    bool dropped = false;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double v = sol[static_cast<Index>(k)];
      if (v > 0.0) {
        y[idx[k]] = v;
      } else {
        free[static_cast<std::size_t>(idx[k])] = 0;
        dropped = true;
      }
    }
    if (!dropped) return y;
  }
  throw SolverFailure("per-slot allocation: active set did not settle within N + 1 passes");
}

Vector allocate_general(const Penalty& penalty, std::size_t s, const Vector& lam, double V) {
  const auto n = lam.size();
  std::vector<char> free(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) free[static_cast<std::size_t>(i)] = lam[i] > 0.0;
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  const double tol = 1e-13 * scale;
  Vector y = Vector::Zero(n);

  const auto objective = [&](const Vector& z) { return V * penalty.value(s, z) - lam.dot(z); };

  for (Index pass = 0; pass <= 4 * (n + 1); ++pass) {
    const auto idx = indices_where(free);
    for (Index i = 0; i < n; ++i) {
      if (!free[static_cast<std::size_t>(i)]) y[i] = 0.0;
    }
    // Damped Newton on the restricted, unconstrained problem.
    for (int it = 0; it < 100 && !idx.empty(); ++it) {
      const Vector grad = restrict(Vector(V * penalty.gradient(s, y) - lam), idx);
      const double gnorm = grad.cwiseAbs().maxCoeff();
      if (gnorm <= tol) break;
      const Vector step = -restrict(Matrix(V * penalty.hessian(s, y)), idx).llt().solve(grad);
      const double f0 = objective(y);
      double t = 1.0;
      Vector trial = y;
      for (int ls = 0; ls < 60; ++ls) {
        trial = y;
        for (std::size_t k = 0; k < idx.size(); ++k) trial[idx[k]] += t * step[static_cast<Index>(k)];
        const Vector g1 = restrict(Vector(V * penalty.gradient(s, trial) - lam), idx);
        if (objective(trial) <= f0 + 1e-4 * t * grad.dot(step) ||
            g1.cwiseAbs().maxCoeff() < gnorm) {
          break;
        }
        t *= 0.5;
      }
      y = trial;
    }

    bool changed = false;
    for (Index i : idx) {
      if (!(y[i] > 0.0)) {
        y[i] = 0.0;
        free[static_cast<std::size_t>(i)] = 0;
        changed = true;
      }
    }
    if (changed) continue;

    const Vector slack = V * penalty.gradient(s, y) - lam;
    Index worst = -1;
    double most = -tol;
    for (Index i = 0; i < n; ++i) {
      if (!free[static_cast<std::size_t>(i)] && slack[i] < most) {
        most = slack[i];
        worst = i;
      }
    }
    if (worst < 0) return y;
    free[static_cast<std::size_t>(worst)] = 1;
  }
  throw SolverFailure("per-slot allocation: active set did not settle");
}

ZeroShotEstimate make_estimate(EstimateSource source, Vector raw, const SensitivitySolve& solve) {
  ZeroShotEstimate est;
  est.source = source;
  est.clamped = raw.size() > 0 && raw.minCoeff() < 0.0;
  est.lambda = raw.cwiseMax(0.0);
  est.regularized = solve.regularized;
  est.rcond = solve.rcond;
  return est;
}

double max_requirement(const Vector& A) { return A.size() == 0 ? 0.0 : A.maxCoeff(); }

}  // namespace

Vector per_slot_allocation(const Penalty& penalty, std::size_t s, const Vector& lam, double V) {
  check_allocation_inputs(penalty, s, lam, V);
  return penalty.is_quadratic() ? allocate_quadratic(penalty, s, lam, V)
                                : allocate_general(penalty, s, lam, V);
}

Matrix grad_g(const Penalty& penalty, std::size_t s, const Vector& y, const Vector& lam, double V) {
  check_allocation_inputs(penalty, s, lam, V);
  const auto n = lam.size();
  if (y.size() != n) throw InvalidArgument("allocation length does not match the number of users");
  const Vector slack = V * penalty.gradient(s, y) - lam;
  std::vector<char> free(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    free[static_cast<std::size_t>(i)] = y[i] > 0.0 || slack[i] <= 0.0;
  }
  const auto idx = indices_where(free);
  Matrix out = Matrix::Zero(n, n);
  if (idx.empty()) return out;
  const Matrix sub = restrict(penalty.hessian(s, y), idx);
  Eigen::LLT<Matrix> llt(sub);
  if (llt.info() != Eigen::Success) throw SolverFailure("penalty Hessian is not positive definite");
  const Matrix inv = llt.solve(Matrix::Identity(sub.rows(), sub.cols())) / V;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out(idx[i], idx[j]) = inv(static_cast<Index>(i), static_cast<Index>(j));
    }
  }
  return out;
}

Matrix build_H(const Vector& f, const std::vector<Matrix>& grad_g_by_state) {
  if (static_cast<std::size_t>(f.size()) != grad_g_by_state.size() || grad_g_by_state.empty()) {
    throw InvalidArgument("need one Jacobian per channel state");
  }
  Matrix h = Matrix::Zero(grad_g_by_state[0].rows(), grad_g_by_state[0].cols());
  for (std::size_t s = 0; s < grad_g_by_state.size(); ++s) {
    if (grad_g_by_state[s].rows() != h.rows() || grad_g_by_state[s].cols() != h.cols()) {
      throw InvalidArgument("per-state Jacobians differ in shape");
    }
    const double w = f[static_cast<Index>(s)];
    if (w != 0.0) h += w * grad_g_by_state[s];
  }
  return h;
}

void Snapshot::validate() const {
  const auto n = lambda_star.size();
  const auto states = f.size();
  if (n == 0) throw InvalidArgument("snapshot has no users");
  if (g.rows() != n || g.cols() != states || A.size() != n ||
      static_cast<Index>(grad_g.size()) != states) {
    throw InvalidArgument("snapshot dimensions disagree");
  }
  for (const Matrix& m : grad_g) {
    if (m.rows() != n || m.cols() != n) throw InvalidArgument("snapshot Jacobian has the wrong shape");
  }
  if (!ids.empty() && static_cast<Index>(ids.size()) != n) {
    throw InvalidArgument("snapshot ids disagree with the multiplier length");
  }
  if (!(lambda_star.minCoeff() >= 0.0)) throw InvalidArgument("snapshot multipliers must be nonnegative");
  if (!(A.minCoeff() >= 0.0)) throw InvalidArgument("snapshot requirements must be nonnegative");
  if (!(g.minCoeff() >= 0.0)) throw InvalidArgument("snapshot rates must be nonnegative");
  if (!(V > 0.0)) throw InvalidArgument("trade-off constant V must be positive");
}

Snapshot snapshot_at(const Penalty& penalty, const Vector& f, const Vector& A, double V,
                     const Vector& lambda, std::vector<UserId> ids) {
  if (static_cast<std::size_t>(f.size()) != penalty.states()) {
    throw InvalidArgument("distribution length does not match the penalty's states");
  }
  Snapshot snap;
  snap.lambda_star = lambda;
  snap.f = f;
  snap.A = A;
  snap.V = V;
  snap.ids = std::move(ids);
  snap.g.resize(lambda.size(), f.size());
  snap.grad_g.reserve(penalty.states());
  for (std::size_t s = 0; s < penalty.states(); ++s) {
    const Vector y = per_slot_allocation(penalty, s, lambda, V);
    snap.g.col(static_cast<Index>(s)) = y;
    snap.grad_g.push_back(grad_g(penalty, s, y, lambda, V));
  }
  snap.validate();
  return snap;
}

SensitivitySolve solve_sensitivity(const Matrix& H, const Vector& b, double min_rcond) {
  if (H.rows() != H.cols() || H.rows() != b.size()) {
    throw InvalidArgument("sensitivity system dimensions disagree");
  }
  Eigen::PartialPivLU<Matrix> lu(H);
  SensitivitySolve out;
  // Eigen's estimate can report 1 for an exactly singular matrix, so the
  // pivot spread of U bounds it as well.
  const Vector pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double spread = pivots.maxCoeff() > 0.0 ? pivots.minCoeff() / pivots.maxCoeff() : 0.0;
  out.rcond = std::min(lu.rcond(), spread);
  if (out.rcond >= min_rcond) {
    out.x = lu.solve(b);
    if (out.x.allFinite()) return out;
  }
  const double mu = 1e-8 * H.trace() / static_cast<double>(H.rows());
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    std::ostringstream os;
    os << "sensitivity matrix is singular (rcond " << out.rcond << ", trace " << H.trace() << ")";
    throw SolverFailure(os.str());
  }
  Eigen::PartialPivLU<Matrix> ridge(H + mu * Matrix::Identity(H.rows(), H.cols()));
  out.x = ridge.solve(b);
  out.regularized = true;
  if (!out.x.allFinite()) {
    std::ostringstream os;
    os << "sensitivity solve failed even with ridge " << mu << " (rcond " << out.rcond << ")";
    throw SolverFailure(os.str());
  }
  return out;
}

ZeroShotEstimate zeroshot_requirements(const Snapshot& snap, const Vector& A_new) {
  snap.validate();
  if (A_new.size() != snap.A.size()) throw InvalidArgument("new requirement vector has the wrong length");
  if (!(A_new.minCoeff() >= 0.0)) throw InvalidArgument("requirements must be nonnegative");
  const SensitivitySolve solve = solve_sensitivity(snap.H(), A_new - snap.A);
  return make_estimate(EstimateSource::requirements, snap.lambda_star + solve.x, solve);
}

ZeroShotEstimate zeroshot_leave(const Snapshot& snap, std::size_t leaving) {
  snap.validate();
  if (leaving >= snap.size()) throw InvalidArgument("leaving user index out of range");
  if (snap.size() < 2) throw InvalidArgument("the last user cannot leave");
  Vector A_hat = snap.A;
  A_hat[static_cast<Index>(leaving)] = 0.0;
  const SensitivitySolve solve = solve_sensitivity(snap.H(), A_hat - snap.A);
  const Vector full = snap.lambda_star + solve.x;
  const auto n = full.size();
  const auto k = static_cast<Index>(leaving);
  Vector reduced(n - 1);
  reduced.head(k) = full.head(k);
  reduced.tail(n - 1 - k) = full.tail(n - 1 - k);
  return make_estimate(EstimateSource::service_user_leave, reduced, solve);
}

ZeroShotEstimate zeroshot_join(const Snapshot& snap, double requirement) {
  snap.validate();
  if (!(requirement >= 0.0) || !std::isfinite(requirement)) {
    throw InvalidArgument("joining user's requirement must be finite and nonnegative");
  }
  const auto n = snap.A.size();
  const Vector delta = Vector::Constant(n, requirement / static_cast<double>(n));
  const SensitivitySolve solve = solve_sensitivity(snap.H(), delta);
  ZeroShotEstimate est =
      make_estimate(EstimateSource::service_user_join, snap.lambda_star + solve.x, solve);
  Vector extended(n + 1);
  extended.head(n) = est.lambda;
  extended[n] = est.lambda.mean();
  est.lambda = std::move(extended);
  return est;
}

ZeroShotEstimate zeroshot_distribution(const Snapshot& snap, const Vector& f_new) {
  snap.validate();
  if (f_new.size() != snap.f.size()) throw InvalidArgument("new distribution has the wrong number of states");
  validate_distribution(f_new, "new state distribution");
  const Matrix H_hat = build_H(f_new, snap.grad_g);
  const Vector d = snap.g * (snap.f - f_new);
  const SensitivitySolve solve = solve_sensitivity(H_hat, d);
  return make_estimate(EstimateSource::distribution, snap.lambda_star + solve.x, solve);
}

QueueState queue_step(const QueueState& q, const Vector& A, const Vector& x) {
  if (x.size() > 0 && !(x.minCoeff() >= 0.0)) throw InvalidArgument("served rates must be nonnegative");
  QueueState out{Vector(q.Q.size()), q.lambda0};
  kernels::queue_update({q.Q.data(), static_cast<std::size_t>(q.Q.size())},
                        {A.data(), static_cast<std::size_t>(A.size())},
                        {x.data(), static_cast<std::size_t>(x.size())},
                        {out.Q.data(), static_cast<std::size_t>(out.Q.size())});
  return out;
}

Vector dpp_step(const StochasticSystem& sys, const QueueState& q, std::size_t state) {
  if (q.Q.size() != q.lambda0.size()) throw InvalidArgument("queue and offset lengths differ");
  return per_slot_allocation(sys.penalty, state, q.multipliers(), sys.V);
}

Vector mean_service(const Penalty& penalty, const Vector& f, const Vector& lambda, double V) {
  Vector m = Vector::Zero(lambda.size());
  for (std::size_t s = 0; s < penalty.states(); ++s) {
    const double w = f[static_cast<Index>(s)];
    if (w != 0.0) m += w * per_slot_allocation(penalty, s, lambda, V);
  }
  return m;
}

double mean_penalty(const Penalty& penalty, const Vector& f, const Vector& lambda, double V) {
  double total = 0.0;
  for (std::size_t s = 0; s < penalty.states(); ++s) {
    const double w = f[static_cast<Index>(s)];
    if (w != 0.0) total += w * penalty.value(s, per_slot_allocation(penalty, s, lambda, V));
  }
  return total;
}

OracleResult dual2_oracle(const Penalty& penalty, const Vector& f, const Vector& A, double V,
                          const OracleOptions& opts) {
  if (static_cast<std::size_t>(f.size()) != penalty.states()) {
    throw InvalidArgument("distribution length does not match the penalty's states");
  }
  validate_distribution(f, "state distribution");
  if (static_cast<std::size_t>(A.size()) != penalty.users() || A.size() == 0) {
    throw InvalidArgument("requirement vector length does not match the number of users");
  }
  if (!(A.minCoeff() > 0.0)) throw InvalidArgument("service requirements must be positive");
  if (!(V > 0.0)) throw InvalidArgument("trade-off constant V must be positive");

  const double scale = max_requirement(A);
  // Lipschitz bound of the dual gradient: ||dg_s/dlam|| <= 1 / (V delta_s).
  double lipschitz = 0.0;
  for (std::size_t s = 0; s < penalty.states(); ++s) {
    lipschitz += f[static_cast<Index>(s)] / (V * penalty.strong_convexity(s));
  }
  double step = 1.0 / lipschitz;

  const auto dual_value = [&](const Vector& lam) {
    double total = lam.dot(A);
    for (std::size_t s = 0; s < penalty.states(); ++s) {
      const double w = f[static_cast<Index>(s)];
      if (w == 0.0) continue;
      const Vector y = per_slot_allocation(penalty, s, lam, V);
      total += w * (V * penalty.value(s, y) - lam.dot(y));
    }
    return total;
  };

  Vector lam = Vector::Zero(A.size());
  Vector r = A - mean_service(penalty, f, lam, V);
  double res = r.cwiseAbs().maxCoeff() / scale;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    if (res <= opts.rel_tol) return {lam, res, it - 1};

    if (opts.newton_polish && res <= 1e-2) {
      std::vector<Matrix> jac;
      jac.reserve(penalty.states());
      for (std::size_t s = 0; s < penalty.states(); ++s) {
        const Vector y = per_slot_allocation(penalty, s, lam, V);
        jac.push_back(grad_g(penalty, s, y, lam, V));
      }
      try {
        const Vector cand = (lam + solve_sensitivity(build_H(f, jac), r).x).cwiseMax(0.0);
        const Vector rc = A - mean_service(penalty, f, cand, V);
        const double res_c = rc.cwiseAbs().maxCoeff() / scale;
        if (res_c < 0.5 * res) {
          lam = cand;
          r = rc;
          res = res_c;
          continue;
        }
      } catch (const SolverFailure&) {
        // Fall through to a gradient step.
      }
    }

    // Projected gradient ascent; backtrack on the sufficient-increase test,
    // allowing for round-off in the dual value.
    const double d0 = dual_value(lam);
    Vector cand;
    for (int ls = 0; ls < 60; ++ls) {
      cand = (lam + step * r).cwiseMax(0.0);
      const Vector delta = cand - lam;
      const double d1 = dual_value(cand);
      const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(d0);
      if (d1 >= d0 + r.dot(delta) - delta.squaredNorm() / (2.0 * step) - slack) break;
      step *= 0.5;
    }
    lam = cand;
    r = A - mean_service(penalty, f, lam, V);
    res = r.cwiseAbs().maxCoeff() / scale;
  }
  if (res <= opts.rel_tol) return {lam, res, opts.max_iterations};
  std::ostringstream os;
  os << "dual oracle hit the iteration cap " << opts.max_iterations << " with residual " << res
     << " (target " << opts.rel_tol << ")";
  throw SolverFailure(os.str());
}

OracleResult dual2_oracle(const StochasticSystem& sys, const OracleOptions& opts) {
  sys.validate();
  return dual2_oracle(sys.penalty, sys.f, sys.A, sys.V, opts);
}

Snapshot snapshot_build(const StochasticSystem& sys, const QueueState& q) {
  if (static_cast<std::size_t>(q.Q.size()) != sys.size() || q.lambda0.size() != q.Q.size()) {
    throw InvalidArgument("queue state does not match the system's users");
  }
  return snapshot_at(sys.penalty, sys.f, sys.A, sys.V, q.multipliers(), sys.ids);
}

QueueState apply_offset_shift(const QueueState& q, const Vector& lam_old, const Vector& lam_new) {
  if (lam_old.size() != q.Q.size() || lam_new.size() != q.Q.size() ||
      q.lambda0.size() != q.Q.size()) {
    throw InvalidArgument("offset shift dimensions disagree");
  }
  return {q.Q, q.lambda0 + (lam_new - lam_old)};
}

QueueState apply_offset_shift_leave(const QueueState& q, std::size_t leaving,
                                    const Vector& lam_old, const Vector& lam_new) {
  const auto n = q.Q.size();
  if (static_cast<Index>(leaving) >= n || lam_old.size() != n || lam_new.size() != n - 1) {
    throw InvalidArgument("offset shift dimensions disagree");
  }
  const auto k = static_cast<Index>(leaving);
  const auto drop = [&](const Vector& v) {
    Vector out(n - 1);
    out.head(k) = v.head(k);
    out.tail(n - 1 - k) = v.tail(n - 1 - k);
    return out;
  };
  return apply_offset_shift({drop(q.Q), drop(q.lambda0)}, drop(lam_old), lam_new);
}

QueueState apply_offset_shift_join(const QueueState& q, const Vector& lam_old,
                                   const Vector& lam_new) {
  const auto n = q.Q.size();
  if (lam_old.size() != n || lam_new.size() != n + 1) {
    throw InvalidArgument("offset shift dimensions disagree");
  }
  const QueueState shifted = apply_offset_shift(q, lam_old, lam_new.head(n));
  QueueState out{Vector(n + 1), Vector(n + 1)};
  out.Q.head(n) = shifted.Q;
  out.Q[n] = 0.0;
  out.lambda0.head(n) = shifted.lambda0;
  out.lambda0[n] = lam_new[n];
  return out;
}

}  // namespace netopt::primal2
