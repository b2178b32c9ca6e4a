#pragma once

// Dual decomposition for distributed rate control: users best-respond to a
// per-unit bandwidth price, the access point adjusts the price by the
// capacity violation, and abrupt changes are absorbed by first-order price
// corrections computed from the pre-change operating point.

#include <optional>
#include <span>
#include <vector>

#include "netopt/estimate.hpp"
#include "netopt/model.hpp"

namespace netopt::primal1 {

/// g(q) = argmax_{x >= 0} U(x) - q x. Requires q > 0.
double best_response(const Utility& u, double q);

/// g'(q) = 1 / U''(g(q)); strictly negative. Requires q > 0.
double best_response_derivative(const Utility& u, double q);

/// Total bandwidth sum_n p_n g_n(lambda p_n) requested at price lambda.
double demand(const RateSystem& sys, double lambda);

/// How the price step measures constraint violation.
enum class DemandForm {
  /// sum_n p_n x_n - C, the priced constraint.
  weighted,
  /// sum_n x_n - C, as some textbook statements of the update read.
  literal,
};

double dual_price_step(double lambda, std::span<const double> rates, std::span<const double> p,
                       double capacity, double step, DemandForm form = DemandForm::weighted);

struct OracleOptions {
  /// Stop when |demand - C| <= rel_tol * C.
  double rel_tol = 1e-10;
  int max_iterations = 200;
};

struct OracleResult {
  double lambda = 0.0;
  /// |demand(lambda) - C| / C.
  double residual = 0.0;
  int iterations = 0;
};

/// Exact optimal price by bisection on the strictly decreasing demand.
OracleResult oracle_lambda(const RateSystem& sys, const OracleOptions& opts = {});

/// Pre-change operating point: price and each user's rate and rate slope.
struct Snapshot {
  double lambda_star = 0.0;
  /// g_n(lambda* p_n)
  Vector g;
  /// g'_n(lambda* p_n)
  Vector gprime;
  double capacity = 0.0;
  Vector p;
  std::vector<UserId> ids;

  std::size_t size() const { return static_cast<std::size_t>(g.size()); }
  void validate() const;
};

/// Snapshot with exact g and g' from the users' utilities.
Snapshot analytic_snapshot(const RateSystem& sys, double lambda);

/// Price after a capacity change C -> new_capacity.
ZeroShotEstimate zeroshot_capacity(const Snapshot& snap, double new_capacity);

/// Price after the user at `leaving` (snapshot index) departs.
ZeroShotEstimate zeroshot_leave(const Snapshot& snap, std::size_t leaving);

/// What the access point plugs in for a joining user.
struct NewcomerQuantities {
  double p = 1.0;
  /// g_{N+1}(lambda* p_{N+1})
  double g = 0.0;
  /// g'_{N+1}(lambda* p_{N+1})
  double gprime = -1.0;
};

/// Newcomer quantities from its utility when known, otherwise the arithmetic
/// means of p, g and g' over the users already in the snapshot.
NewcomerQuantities newcomer_quantities(const Snapshot& snap, const std::optional<RateUser>& newcomer);

/// Price after a user joins.
ZeroShotEstimate zeroshot_join(const Snapshot& snap, const std::optional<RateUser>& newcomer);
ZeroShotEstimate zeroshot_join(const Snapshot& snap, const NewcomerQuantities& newcomer,
                               EstimateSource source = EstimateSource::user_join_known);

/// Price after channel costs change p -> p_new.
ZeroShotEstimate zeroshot_channel(const Snapshot& snap, const Vector& p_new);

struct TraceSnapshotOptions {
  /// Price differences below this are treated as a degenerate secant.
  double min_price_gap = 1e-12;
  /// When the secant is degenerate and no earlier snapshot covers a user,
  /// fall back to the analytic slope from the system's utilities.
  bool analytic_fallback = true;
};

/// Reads lambda*, g and g' off the last two rounds of the trace: lambda_T,
/// x_{n,T} and the secant (x_{n,T} - x_{n,T-1}) / ((lambda_T - lambda_{T-1}) p_n).
/// `sys` is the system in force during those rounds.
Snapshot snapshot_from_trace(const SimTrace& trace, const RateSystem& sys,
                             const Snapshot* previous = nullptr,
                             const TraceSnapshotOptions& opts = {});

}  // namespace netopt::primal1
