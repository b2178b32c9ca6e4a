#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace netopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct UserId {
  std::int64_t value = 0;
  auto operator<=>(const UserId&) const = default;
};

std::string to_string(UserId id);

// ---------------------------------------------------------------------------
// Utilities
// ---------------------------------------------------------------------------

/// Twice-differentiable, strictly increasing, strictly concave utility with a
/// closed-form best response g(q) = argmax_{x >= 0} U(x) - q x.
class Utility {
 public:
  virtual ~Utility() = default;

  virtual double value(double x) const = 0;
  virtual double derivative(double x) const = 0;
  virtual double second_derivative(double x) const = 0;
  virtual double best_response(double q) const = 0;
  virtual double best_response_derivative(double q) const = 0;
  /// Smallest |U''| on (0, upper]; the strong-concavity constant on that range.
  virtual double concavity_bound(double upper) const = 0;
};

/// U(x) = x^gamma / gamma with 0 < gamma < 1.
class PowerUtility final : public Utility {
 public:
  explicit PowerUtility(double gamma);

  double gamma() const { return gamma_; }

  double value(double x) const override;
  double derivative(double x) const override;
  double second_derivative(double x) const override;
  double best_response(double q) const override;
  double best_response_derivative(double q) const override;
  double concavity_bound(double upper) const override;

 private:
  double gamma_;
};

double utility_value(const Utility& u, double x);

// ---------------------------------------------------------------------------
// Rate-control system
// ---------------------------------------------------------------------------

struct RateUser {
  UserId id;
  PowerUtility utility{0.5};
  /// Bandwidth needed per unit of delivered data.
  double p = 1.0;
};

struct RateSystem {
  std::vector<RateUser> users;
  double capacity = 1.0;
  double step_size = 0.003;

  void validate() const;
  std::size_t size() const { return users.size(); }
  std::optional<std::size_t> index_of(UserId id) const;
  Vector channel_costs() const;
};

// ---------------------------------------------------------------------------
// Penalties
// ---------------------------------------------------------------------------

/// State-indexed strongly convex penalty P_s(y) over the nonnegative orthant.
/// The allocation, sensitivity and oracle machinery only consume this surface.
class Penalty {
 public:
  virtual ~Penalty() = default;

  virtual std::size_t users() const = 0;
  virtual std::size_t states() const = 0;
  virtual double value(std::size_t s, const Vector& y) const = 0;
  virtual Vector gradient(std::size_t s, const Vector& y) const = 0;
  virtual Matrix hessian(std::size_t s, const Vector& y) const = 0;
  /// delta with z' Hess z >= delta |z|^2 for every y in state s.
  virtual double strong_convexity(std::size_t s) const = 0;
  /// True when the Hessian does not depend on y (lets the allocator stop
  /// after a single Newton step per active set).
  virtual bool is_quadratic() const { return false; }
};

/// P_s(y) = 1/2 (sum y)^2 + sum_n y_n^2 / (2 gamma_{n,s}).
class QuadraticPenalty final : public Penalty {
 public:
  QuadraticPenalty() = default;
  /// gammas is users x states, every entry > 0.
  explicit QuadraticPenalty(Matrix gammas);

  const Matrix& gammas() const { return gammas_; }
  std::span<const double> inverse_gammas(std::size_t s) const;

  std::size_t users() const override { return static_cast<std::size_t>(gammas_.rows()); }
  std::size_t states() const override { return static_cast<std::size_t>(gammas_.cols()); }
  double value(std::size_t s, const Vector& y) const override;
  Vector gradient(std::size_t s, const Vector& y) const override;
  Matrix hessian(std::size_t s, const Vector& y) const override;
  double strong_convexity(std::size_t s) const override;
  bool is_quadratic() const override { return true; }

  QuadraticPenalty without_user(std::size_t index) const;
  QuadraticPenalty with_user(const Vector& gammas_by_state) const;

 private:
  Matrix gammas_;
  Matrix inverse_gammas_;
};

struct PenaltyEval {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

PenaltyEval penalty_eval(const Penalty& penalty, std::size_t s, const Vector& y);

// ---------------------------------------------------------------------------
// Stochastic service system
// ---------------------------------------------------------------------------

struct StochasticSystem {
  std::vector<UserId> ids;
  QuadraticPenalty penalty;
  /// Channel-state distribution.
  Vector f;
  /// Long-term service requirement per user.
  Vector A;
  double V = 100.0;

  void validate() const;
  std::size_t size() const { return ids.size(); }
  std::size_t states() const { return static_cast<std::size_t>(f.size()); }
  std::optional<std::size_t> index_of(UserId id) const;
};

/// Gamma table used by the bundled service scenarios:
/// gamma_{n,s} = 0.2 + 0.1 * ((s + n + 5) mod 7) with 1-based n, s.
Vector reference_service_gammas(std::int64_t user_index, std::size_t states);

void validate_distribution(const Vector& f, const char* what);

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

struct CapacityChange {
  double capacity = 0.0;
};

struct UserLeave {
  UserId id;
};

/// A rate-control user joining. When parameters_known is false the price
/// update may not look at the newcomer's utility or channel cost.
struct RateUserJoin {
  RateUser user;
  bool parameters_known = false;
};

/// A service user joining with its requirement and per-state penalty weights.
struct ServiceUserJoin {
  UserId id;
  double requirement = 0.0;
  Vector gammas;
};

struct ChannelQualityChange {
  Vector p;
};

struct RequirementChange {
  Vector A;
};

struct DistributionChange {
  Vector f;
};

using EventKind = std::variant<CapacityChange, UserLeave, RateUserJoin, ServiceUserJoin,
                               ChannelQualityChange, RequirementChange, DistributionChange>;

/// Change applied at the end of round/slot `at`.
struct DynamicsEvent {
  std::int64_t at = 1;
  EventKind kind;
};

std::string event_name(const EventKind& kind);

/// Applies a change to a system; throws InvalidArgument when the event does not
/// fit the system (wrong dimension, unknown id, wrong problem kind).
void apply_event(RateSystem& sys, const EventKind& kind);
void apply_event(StochasticSystem& sys, const EventKind& kind);

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

/// One contiguous stretch of rounds with a fixed user set.
struct TraceEpoch {
  std::int64_t start = 1;
  std::vector<UserId> users;
};

struct TraceRecord {
  std::int64_t t = 0;
  /// Rate control: announced price (size 1). Service: lambda0 + Q_t.
  Vector multipliers;
  Vector rates;
  /// Service only: queue lengths after this slot's update.
  Vector queues;
  /// Service only: realized channel state, -1 otherwise.
  int state = -1;
  std::size_t epoch = 0;
  bool event = false;
};

class SimTrace {
 public:
  void begin_epoch(std::int64_t start, std::vector<UserId> users);
  void append(TraceRecord record);
  /// Marks the last appended record as the round at which a change happened.
  void mark_event();

  const std::vector<TraceRecord>& records() const { return records_; }
  const std::vector<TraceEpoch>& epochs() const { return epochs_; }
  const TraceEpoch& epoch_of(const TraceRecord& r) const { return epochs_.at(r.epoch); }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }
  const TraceRecord& back() const { return records_.back(); }
  /// Time of the most recent change (0 when none happened yet).
  std::int64_t last_change() const { return last_change_; }

 private:
  std::vector<TraceRecord> records_;
  std::vector<TraceEpoch> epochs_;
  std::int64_t last_change_ = 0;
};

}  // namespace netopt
