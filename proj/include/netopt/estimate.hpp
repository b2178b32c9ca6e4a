#pragma once

#include <string>

#include "netopt/model.hpp"

namespace netopt {

/// Which closed-form update produced a multiplier estimate.
enum class EstimateSource {
  capacity,
  user_leave,
  user_join_known,
  user_join_unknown,
  channel_quality,
  requirements,
  service_user_leave,
  service_user_join,
  distribution,
};

std::string to_string(EstimateSource source);

/// Proposed post-change multiplier(s): one entry for the rate-control price,
/// one per user for the service problem.
struct ZeroShotEstimate {
  EstimateSource source = EstimateSource::capacity;
  Vector lambda;
  /// Some component was raised to 0 to keep the dual feasible.
  bool clamped = false;
  /// A ridge term was added to an ill-conditioned sensitivity matrix.
  bool regularized = false;
  /// Reciprocal condition estimate of the matrix that was solved (1 for scalars).
  double rcond = 1.0;

  double scalar() const { return lambda[0]; }
};

}  // namespace netopt
