#include "netopt/primal1.hpp"

#include <cmath>
#include <sstream>

#include "netopt/error.hpp"
#include "netopt/kernels.hpp"

namespace netopt::primal1 {

namespace {

ZeroShotEstimate scalar_estimate(EstimateSource source, double raw) {
  ZeroShotEstimate est;
  est.source = source;
  est.clamped = raw < 0.0;
  est.lambda = Vector::Constant(1, raw < 0.0 ? 0.0 : raw);
  return est;
}

}  // namespace

double best_response(const Utility& u, double q) {
  if (!(q > 0.0)) throw InvalidArgument("best response needs a positive effective price");
  return u.best_response(q);
}

double best_response_derivative(const Utility& u, double q) {
  if (!(q > 0.0)) throw InvalidArgument("best-response slope needs a positive effective price");
  return u.best_response_derivative(q);
}

double demand(const RateSystem& sys, double lambda) {
  double total = 0.0;
  for (const RateUser& user : sys.users) {
    total += user.p * best_response(user.utility, lambda * user.p);
  }
  return total;
}

double dual_price_step(double lambda, std::span<const double> rates, std::span<const double> p,
                       double capacity, double step, DemandForm form) {
  if (!(step > 0.0)) throw InvalidArgument("price step size must be positive");
  if (rates.size() != p.size()) throw InvalidArgument("rates and channel costs differ in length");
  const double used = form == DemandForm::weighted ? kernels::dot(rates, p) : kernels::sum(rates);
  return std::max(0.0, lambda + step * (used - capacity));
}

OracleResult oracle_lambda(const RateSystem& sys, const OracleOptions& opts) {
  sys.validate();
  if (sys.users.empty()) throw InvalidArgument("price oracle needs at least one user");
  const double cap = sys.capacity;
  const double tol = opts.rel_tol * cap;

  double lo = 1e-12;
  double hi = 1.0;
  // Demand is strictly decreasing: grow the bracket until it straddles C.
  for (int k = 0; demand(sys, hi) > cap; ++k) {
    if (k > 2000 || !std::isfinite(hi)) throw SolverFailure("price oracle: cannot bracket from above");
    hi *= 2.0;
  }
  for (int k = 0; demand(sys, lo) < cap; ++k) {
    if (k > 2000 || lo == 0.0) throw SolverFailure("price oracle: cannot bracket from below");
    lo *= 0.5;
  }

  OracleResult best{hi, std::abs(demand(sys, hi) - cap) / cap, 0};
  for (int it = 1; it <= opts.max_iterations; ++it) {
    // Geometric midpoints while the bracket spans orders of magnitude.
    const double mid = hi > 4.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    const double d = demand(sys, mid);
    const double resid = std::abs(d - cap);
    if (resid / cap < best.residual) best = {mid, resid / cap, it};
    if (resid <= tol) return {mid, resid / cap, it};
    if (mid <= lo || mid >= hi) break;
    if (d > cap) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  std::ostringstream os;
  os << "price oracle did not reach relative residual " << opts.rel_tol << " (best "
     << best.residual << " at lambda=" << best.lambda << ")";
  throw SolverFailure(os.str());
}

void Snapshot::validate() const {
  const auto n = g.size();
  if (n == 0) throw InvalidArgument("snapshot has no users");
  if (gprime.size() != n || p.size() != n || static_cast<Eigen::Index>(ids.size()) != n) {
    throw InvalidArgument("snapshot vectors disagree in length");
  }
  if (!(lambda_star >= 0.0)) throw InvalidArgument("snapshot price must be nonnegative");
  if (!(capacity > 0.0)) throw InvalidArgument("snapshot capacity must be positive");
  if (!(g.minCoeff() >= 0.0)) throw InvalidArgument("snapshot rates must be nonnegative");
  if (!(gprime.maxCoeff() < 0.0)) throw InvalidArgument("snapshot rate slopes must be negative");
  if (!(p.minCoeff() > 0.0)) throw InvalidArgument("snapshot channel costs must be positive");
}

Snapshot analytic_snapshot(const RateSystem& sys, double lambda) {
  Snapshot snap;
  const auto n = static_cast<Eigen::Index>(sys.size());
  snap.lambda_star = lambda;
  snap.capacity = sys.capacity;
  snap.p = sys.channel_costs();
  snap.g.resize(n);
  snap.gprime.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RateUser& u = sys.users[static_cast<std::size_t>(i)];
    snap.g[i] = best_response(u.utility, lambda * u.p);
    snap.gprime[i] = best_response_derivative(u.utility, lambda * u.p);
    snap.ids.push_back(u.id);
  }
  return snap;
}

ZeroShotEstimate zeroshot_capacity(const Snapshot& snap, double new_capacity) {
  snap.validate();
  if (!(new_capacity > 0.0)) throw InvalidArgument("new capacity must be positive");
  const double slope = snap.p.cwiseAbs2().dot(snap.gprime);
  return scalar_estimate(EstimateSource::capacity,
                         snap.lambda_star + (new_capacity - snap.capacity) / slope);
}

ZeroShotEstimate zeroshot_leave(const Snapshot& snap, std::size_t leaving) {
  snap.validate();
  if (leaving >= snap.size()) throw InvalidArgument("leaving user index out of range");
  if (snap.size() < 2) throw InvalidArgument("the last user cannot leave");
  const auto k = static_cast<Eigen::Index>(leaving);
  double slope = 0.0;
  for (Eigen::Index i = 0; i < snap.g.size(); ++i) {
    if (i != k) slope += snap.p[i] * snap.p[i] * snap.gprime[i];
  }
  const double freed = snap.p[k] * snap.g[k];
  return scalar_estimate(EstimateSource::user_leave, snap.lambda_star + freed / slope);
}

NewcomerQuantities newcomer_quantities(const Snapshot& snap,
                                       const std::optional<RateUser>& newcomer) {
  snap.validate();
  if (newcomer) {
    if (!(snap.lambda_star > 0.0)) {
      throw InvalidArgument("known-newcomer estimate needs a positive pre-change price");
    }
    const double q = snap.lambda_star * newcomer->p;
    return {newcomer->p, best_response(newcomer->utility, q),
            best_response_derivative(newcomer->utility, q)};
  }
  return {snap.p.mean(), snap.g.mean(), snap.gprime.mean()};
}

ZeroShotEstimate zeroshot_join(const Snapshot& snap, const std::optional<RateUser>& newcomer) {
  return zeroshot_join(snap, newcomer_quantities(snap, newcomer),
                       newcomer ? EstimateSource::user_join_known
                                : EstimateSource::user_join_unknown);
}

ZeroShotEstimate zeroshot_join(const Snapshot& snap, const NewcomerQuantities& nc,
                               EstimateSource source) {
  snap.validate();
  if (!(nc.p > 0.0) || !(nc.g >= 0.0) || !(nc.gprime < 0.0)) {
    throw InvalidArgument("newcomer needs p > 0, g >= 0 and g' < 0");
  }
  const double slope = snap.p.cwiseAbs2().dot(snap.gprime) + nc.p * nc.p * nc.gprime;
  return scalar_estimate(source, snap.lambda_star - nc.p * nc.g / slope);
}

ZeroShotEstimate zeroshot_channel(const Snapshot& snap, const Vector& p_new) {
  snap.validate();
  if (p_new.size() != snap.p.size()) throw InvalidArgument("new channel costs have the wrong length");
  if (!(p_new.minCoeff() > 0.0)) throw InvalidArgument("new channel costs must be positive");
  const double lam = snap.lambda_star;
  const Vector dp = p_new - snap.p;
  const Vector weight = snap.g + lam * p_new.cwiseProduct(snap.gprime);
  const double slope = p_new.cwiseAbs2().dot(snap.gprime);
  return scalar_estimate(EstimateSource::channel_quality, lam - dp.dot(weight) / slope);
}

Snapshot snapshot_from_trace(const SimTrace& trace, const RateSystem& sys, const Snapshot* previous,
                             const TraceSnapshotOptions& opts) {
  const auto& recs = trace.records();
  if (recs.size() < 2) throw InsufficientTrace("need at least two rounds to read off rate slopes");
  const TraceRecord& cur = recs.back();
  const TraceRecord& prev = recs[recs.size() - 2];
  if (prev.t <= trace.last_change() || prev.epoch != cur.epoch) {
    throw InsufficientTrace("need two rounds since the last change at t=" +
                            std::to_string(trace.last_change()) + ", trace ends at t=" +
                            std::to_string(cur.t));
  }
  const auto& users = trace.epoch_of(cur).users;
  if (users.size() != sys.size()) throw InvalidArgument("trace user set does not match the system");
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i] != sys.users[i].id) throw InvalidArgument("trace user order does not match the system");
  }

  Snapshot snap;
  const auto n = static_cast<Eigen::Index>(sys.size());
  snap.lambda_star = cur.multipliers[0];
  snap.capacity = sys.capacity;
  snap.p = sys.channel_costs();
  snap.g = cur.rates;
  snap.gprime.resize(n);
  snap.ids = users;

  const double dlam = cur.multipliers[0] - prev.multipliers[0];
  const bool degenerate = !(std::abs(dlam) >= opts.min_price_gap);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!degenerate) {
      const double slope = (cur.rates[i] - prev.rates[i]) / (dlam * snap.p[i]);
      if (std::isfinite(slope) && slope < 0.0) {
        snap.gprime[i] = slope;
        continue;
      }
    }
    const UserId id = users[static_cast<std::size_t>(i)];
    bool filled = false;
    if (previous != nullptr) {
      for (std::size_t j = 0; j < previous->ids.size(); ++j) {
        if (previous->ids[j] == id) {
          snap.gprime[i] = previous->gprime[static_cast<Eigen::Index>(j)];
          filled = true;
          break;
        }
      }
    }
    if (!filled) {
      if (!opts.analytic_fallback) {
        throw InsufficientTrace("degenerate price secant and no earlier slope for user " +
                                to_string(id));
      }
      const RateUser& u = sys.users[static_cast<std::size_t>(i)];
      snap.gprime[i] = best_response_derivative(u.utility, snap.lambda_star * u.p);
    }
  }
  return snap;
}

}  // namespace netopt::primal1
