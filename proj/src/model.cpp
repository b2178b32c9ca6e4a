#include "netopt/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "netopt/error.hpp"
#include "netopt/kernels.hpp"

namespace netopt {

std::string to_string(UserId id) { return std::to_string(id.value); }

// ---------------------------------------------------------------------------
// PowerUtility

PowerUtility::PowerUtility(double gamma) : gamma_(gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidArgument("power utility exponent must lie in (0, 1), got " +
                          std::to_string(gamma));
  }
}

double PowerUtility::value(double x) const { return std::pow(x, gamma_) / gamma_; }

double PowerUtility::derivative(double x) const { return std::pow(x, gamma_ - 1.0); }

double PowerUtility::second_derivative(double x) const {
  return (gamma_ - 1.0) * std::pow(x, gamma_ - 2.0);
}

double PowerUtility::best_response(double q) const { return std::pow(q, 1.0 / (gamma_ - 1.0)); }

double PowerUtility::best_response_derivative(double q) const {
  return std::pow(q, (2.0 - gamma_) / (gamma_ - 1.0)) / (gamma_ - 1.0);
}

double PowerUtility::concavity_bound(double upper) const {
  // |U''| = (1 - gamma) x^(gamma - 2) is decreasing in x.
  return (1.0 - gamma_) * std::pow(upper, gamma_ - 2.0);
}

double utility_value(const Utility& u, double x) {
  if (!(x >= 0.0)) throw InvalidArgument("utility is defined for nonnegative rates only");
  return u.value(x);
}

// ---------------------------------------------------------------------------
// RateSystem

void RateSystem::validate() const {
  if (!(capacity > 0.0)) throw InvalidArgument("capacity must be positive");
  if (!(step_size > 0.0)) throw InvalidArgument("step size must be positive");
  std::set<UserId> seen;
  for (const RateUser& u : users) {
    if (!(u.p > 0.0)) throw InvalidArgument("user " + to_string(u.id) + ": p must be positive");
    if (!seen.insert(u.id).second) throw InvalidArgument("duplicate user id " + to_string(u.id));
  }
}

std::optional<std::size_t> RateSystem::index_of(UserId id) const {
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i].id == id) return i;
  }
  return std::nullopt;
}

Vector RateSystem::channel_costs() const {
  Vector p(static_cast<Eigen::Index>(users.size()));
  for (std::size_t i = 0; i < users.size(); ++i) p[static_cast<Eigen::Index>(i)] = users[i].p;
  return p;
}

// ---------------------------------------------------------------------------
// QuadraticPenalty

QuadraticPenalty::QuadraticPenalty(Matrix gammas) : gammas_(std::move(gammas)) {
  if (gammas_.size() > 0 && !(gammas_.minCoeff() > 0.0)) {
    throw InvalidArgument("penalty weights gamma_{n,s} must be positive");
  }
  inverse_gammas_ = gammas_.cwiseInverse();
}

std::span<const double> QuadraticPenalty::inverse_gammas(std::size_t s) const {
  // Column-major storage: column s is contiguous over users.
  return {inverse_gammas_.col(static_cast<Eigen::Index>(s)).data(), users()};
}

double QuadraticPenalty::value(std::size_t s, const Vector& y) const {
  return kernels::quadratic_penalty({y.data(), static_cast<std::size_t>(y.size())},
                                    inverse_gammas(s));
}

Vector QuadraticPenalty::gradient(std::size_t s, const Vector& y) const {
  Vector g(y.size());
  kernels::quadratic_penalty({y.data(), static_cast<std::size_t>(y.size())}, inverse_gammas(s),
                             {g.data(), static_cast<std::size_t>(g.size())});
  return g;
}

Matrix QuadraticPenalty::hessian(std::size_t s, const Vector&) const {
  const auto n = static_cast<Eigen::Index>(users());
  Matrix h = Matrix::Ones(n, n);
  h.diagonal() += inverse_gammas_.col(static_cast<Eigen::Index>(s));
  return h;
}

double QuadraticPenalty::strong_convexity(std::size_t s) const {
  return inverse_gammas_.col(static_cast<Eigen::Index>(s)).minCoeff();
}

QuadraticPenalty QuadraticPenalty::without_user(std::size_t index) const {
  const auto n = gammas_.rows();
  const auto i = static_cast<Eigen::Index>(index);
  Matrix g(n - 1, gammas_.cols());
  g.topRows(i) = gammas_.topRows(i);
  g.bottomRows(n - 1 - i) = gammas_.bottomRows(n - 1 - i);
  return QuadraticPenalty(std::move(g));
}

QuadraticPenalty QuadraticPenalty::with_user(const Vector& gammas_by_state) const {
  if (gammas_by_state.size() != gammas_.cols()) {
    throw InvalidArgument("newcomer penalty weights must have one entry per channel state");
  }
  Matrix g(gammas_.rows() + 1, gammas_.cols());
  g.topRows(gammas_.rows()) = gammas_;
  g.row(gammas_.rows()) = gammas_by_state.transpose();
  return QuadraticPenalty(std::move(g));
}

PenaltyEval penalty_eval(const Penalty& penalty, std::size_t s, const Vector& y) {
  if (s >= penalty.states()) throw InvalidArgument("channel state out of range");
  if (static_cast<std::size_t>(y.size()) != penalty.users()) {
    throw InvalidArgument("rate vector length does not match the number of users");
  }
  if (y.size() > 0 && !(y.minCoeff() >= 0.0)) {
    throw InvalidArgument("penalty is defined on the nonnegative orthant only");
  }
  return {penalty.value(s, y), penalty.gradient(s, y), penalty.hessian(s, y)};
}

// ---------------------------------------------------------------------------
// StochasticSystem

void validate_distribution(const Vector& f, const char* what) {
  if (f.size() == 0) throw InvalidArgument(std::string(what) + " is empty");
  if (!(f.minCoeff() >= 0.0)) throw InvalidArgument(std::string(what) + " has negative entries");
  if (std::abs(f.sum() - 1.0) > 1e-9) {
    std::ostringstream os;
    os << what << " sums to " << f.sum() << ", expected 1";
    throw InvalidArgument(os.str());
  }
}

void StochasticSystem::validate() const {
  if (!(V > 0.0)) throw InvalidArgument("trade-off constant V must be positive");
  validate_distribution(f, "state distribution");
  if (penalty.users() != ids.size() || static_cast<std::size_t>(A.size()) != ids.size()) {
    throw InvalidArgument("user count disagrees between ids, requirements and penalty");
  }
  if (penalty.states() != states()) {
    throw InvalidArgument("penalty state count disagrees with the distribution");
  }
  if (A.size() > 0 && !(A.minCoeff() > 0.0)) {
    throw InvalidArgument("service requirements must be positive");
  }
  std::set<UserId> seen;
  for (UserId id : ids) {
    if (!seen.insert(id).second) throw InvalidArgument("duplicate user id " + to_string(id));
  }
}

std::optional<std::size_t> StochasticSystem::index_of(UserId id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

Vector reference_service_gammas(std::int64_t user_index, std::size_t states) {
  Vector g(static_cast<Eigen::Index>(states));
  for (std::size_t s = 1; s <= states; ++s) {
    const auto k = (static_cast<std::int64_t>(s) + user_index + 5) % 7;
    g[static_cast<Eigen::Index>(s - 1)] = 0.2 + 0.1 * static_cast<double>(k);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Events

namespace {
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vector erase_entry(const Vector& v, std::size_t index) {
  const auto n = v.size();
  const auto i = static_cast<Eigen::Index>(index);
  Vector out(n - 1);
  out.head(i) = v.head(i);
  out.tail(n - 1 - i) = v.tail(n - 1 - i);
  return out;
}

Vector append_entry(const Vector& v, double x) {
  Vector out(v.size() + 1);
  out.head(v.size()) = v;
  out[v.size()] = x;
  return out;
}
}  // namespace

std::string event_name(const EventKind& kind) {
  return std::visit(Overloaded{
                        [](const CapacityChange&) { return std::string("capacity"); },
                        [](const UserLeave&) { return std::string("user_leave"); },
                        [](const RateUserJoin&) { return std::string("user_join"); },
                        [](const ServiceUserJoin&) { return std::string("user_join"); },
                        [](const ChannelQualityChange&) { return std::string("channel_quality"); },
                        [](const RequirementChange&) { return std::string("requirements"); },
                        [](const DistributionChange&) { return std::string("distribution"); },
                    },
                    kind);
}

void apply_event(RateSystem& sys, const EventKind& kind) {
  std::visit(Overloaded{
                 [&](const CapacityChange& e) {
                   if (!(e.capacity > 0.0)) throw InvalidArgument("new capacity must be positive");
                   sys.capacity = e.capacity;
                 },
                 [&](const UserLeave& e) {
                   auto idx = sys.index_of(e.id);
                   if (!idx) throw InvalidArgument("leaving user " + to_string(e.id) + " is not present");
                   if (sys.size() == 1) throw InvalidArgument("the last user cannot leave");
                   sys.users.erase(sys.users.begin() + static_cast<std::ptrdiff_t>(*idx));
                 },
                 [&](const RateUserJoin& e) {
                   if (sys.index_of(e.user.id)) {
                     throw InvalidArgument("joining user " + to_string(e.user.id) + " already present");
                   }
                   if (!(e.user.p > 0.0)) throw InvalidArgument("joining user needs p > 0");
                   sys.users.push_back(e.user);
                 },
                 [&](const ChannelQualityChange& e) {
                   if (static_cast<std::size_t>(e.p.size()) != sys.size()) {
                     throw InvalidArgument("channel-quality vector has the wrong length");
                   }
                   if (!(e.p.minCoeff() > 0.0)) throw InvalidArgument("channel costs must be positive");
                   for (std::size_t i = 0; i < sys.size(); ++i) {
                     sys.users[i].p = e.p[static_cast<Eigen::Index>(i)];
                   }
                 },
                 [&](const auto& e) {
                   throw InvalidArgument("event '" + event_name(EventKind{e}) +
                                         "' does not apply to a rate-control system");
                 },
             },
             kind);
}

void apply_event(StochasticSystem& sys, const EventKind& kind) {
  std::visit(Overloaded{
                 [&](const UserLeave& e) {
                   auto idx = sys.index_of(e.id);
                   if (!idx) throw InvalidArgument("leaving user " + to_string(e.id) + " is not present");
                   if (sys.size() == 1) throw InvalidArgument("the last user cannot leave");
                   sys.ids.erase(sys.ids.begin() + static_cast<std::ptrdiff_t>(*idx));
                   sys.A = erase_entry(sys.A, *idx);
                   sys.penalty = sys.penalty.without_user(*idx);
                 },
                 [&](const ServiceUserJoin& e) {
                   if (sys.index_of(e.id)) {
                     throw InvalidArgument("joining user " + to_string(e.id) + " already present");
                   }
                   if (!(e.requirement > 0.0)) throw InvalidArgument("joining user needs A > 0");
                   sys.penalty = sys.penalty.with_user(e.gammas);
                   sys.ids.push_back(e.id);
                   sys.A = append_entry(sys.A, e.requirement);
                 },
                 [&](const RequirementChange& e) {
                   if (static_cast<std::size_t>(e.A.size()) != sys.size()) {
                     throw InvalidArgument("requirement vector has the wrong length");
                   }
                   if (!(e.A.minCoeff() > 0.0)) throw InvalidArgument("requirements must be positive");
                   sys.A = e.A;
                 },
                 [&](const DistributionChange& e) {
                   if (static_cast<std::size_t>(e.f.size()) != sys.states()) {
                     throw InvalidArgument("distribution has the wrong number of states");
                   }
                   validate_distribution(e.f, "new state distribution");
                   sys.f = e.f;
                 },
                 [&](const auto& e) {
                   throw InvalidArgument("event '" + event_name(EventKind{e}) +
                                         "' does not apply to a service system");
                 },
             },
             kind);
}

// ---------------------------------------------------------------------------
// SimTrace

void SimTrace::begin_epoch(std::int64_t start, std::vector<UserId> users) {
  epochs_.push_back({start, std::move(users)});
}

void SimTrace::append(TraceRecord record) {
  if (epochs_.empty()) throw InvalidArgument("trace needs an epoch before records");
  if (!records_.empty() && record.t != records_.back().t + 1) {
    throw InvalidArgument("trace records must be contiguous in time");
  }
  if (record.rates.size() > 0 && !(record.rates.minCoeff() >= 0.0)) {
    throw InvalidArgument("negative rate recorded at t=" + std::to_string(record.t));
  }
  if (record.queues.size() > 0 && !(record.queues.minCoeff() >= 0.0)) {
    throw InvalidArgument("negative queue recorded at t=" + std::to_string(record.t));
  }
  record.epoch = epochs_.size() - 1;
  records_.push_back(std::move(record));
}

void SimTrace::mark_event() {
  if (records_.empty()) throw InvalidArgument("no round to mark");
  records_.back().event = true;
  last_change_ = records_.back().t;
}

}  // namespace netopt
