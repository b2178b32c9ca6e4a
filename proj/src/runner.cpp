#include "netopt/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>
#include <type_traits>

#include "netopt/error.hpp"
#include "netopt/kernels.hpp"
#include "netopt/rng.hpp"

namespace netopt {

namespace {

std::span<const double> view(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::vector<UserId> user_ids(const RateSystem& sys) {
  std::vector<UserId> ids;
  ids.reserve(sys.size());
  for (const RateUser& u : sys.users) ids.push_back(u.id);
  return ids;
}

double frame_shortfall(VslcForm form, double k, const Vector& A, const Vector& served) {
  return form == VslcForm::shortfall ? kernels::shortfall(k, view(A), view(served))
                                     : kernels::surplus(k, view(A), view(served));
}

const DynamicsEvent* event_at(const std::vector<DynamicsEvent>& events, std::size_t& next,
                              std::int64_t t) {
  if (next < events.size() && events[next].at == t) return &events[next++];
  return nullptr;
}

void require_kind(const ScenarioConfig& cfg, ProblemKind kind) {
  if (cfg.problem != kind) throw InvalidArgument("scenario is for a different problem kind");
}

}  // namespace

void ScenarioConfig::validate() const {
  if (horizon < 1) throw ScenarioError("horizon must be at least 1");
  if (runs < 1) throw ScenarioError("runs must be at least 1");
  if (metric_window < 1) throw ScenarioError("metric_window must be at least 1");
  if (threads < 0) throw ScenarioError("threads must be nonnegative");
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].at < 1) {
      throw ScenarioError("event " + std::to_string(i) + " at t=" + std::to_string(events[i].at) +
                          " must be at t >= 1");
    }
    if (i > 0 && events[i].at <= events[i - 1].at) {
      throw ScenarioError("events must be strictly increasing in time: event " + std::to_string(i) +
                          " at t=" + std::to_string(events[i].at) + " follows event " +
                          std::to_string(i - 1) + " at t=" + std::to_string(events[i - 1].at));
    }
  }
  if (!events.empty() && events.back().at >= horizon) {
    throw ScenarioError("horizon " + std::to_string(horizon) + " must extend beyond the last event at t=" +
                        std::to_string(events.back().at));
  }
  try {
    if (problem == ProblemKind::primal1) {
      if (!(primal1.initial_price > 0.0)) throw InvalidArgument("initial_price must be positive");
      if (!(primal1.price_floor > 0.0)) throw InvalidArgument("price_floor must be positive");
      RateSystem sys = primal1.system;
      sys.validate();
      if (sys.users.empty()) throw InvalidArgument("rate-control system has no users");
      for (const DynamicsEvent& e : events) {
        apply_event(sys, e.kind);
        sys.validate();
      }
    } else {
      StochasticSystem sys = primal2.system;
      sys.validate();
      if (sys.size() == 0) throw InvalidArgument("service system has no users");
      if (primal2.offset_init == OffsetInit::given &&
          static_cast<std::size_t>(primal2.lambda0.size()) != sys.size()) {
        throw InvalidArgument("initial multiplier vector has the wrong length");
      }
      for (const DynamicsEvent& e : events) {
        apply_event(sys, e.kind);
        sys.validate();
      }
    }
  } catch (const InvalidArgument& e) {
    throw ScenarioError(e.what());
  }
}

RunResult run_primal1(const ScenarioConfig& cfg) {
  require_kind(cfg, ProblemKind::primal1);
  cfg.validate();
  const Primal1Config& pc = cfg.primal1;
  RateSystem sys = pc.system;
  RunResult out;
  out.problem = ProblemKind::primal1;
  out.seed = cfg.seed;
  const auto horizon = static_cast<std::size_t>(cfg.horizon);
  out.lambda.reserve(horizon);
  out.total_utility.reserve(horizon);
  out.total_demand.reserve(horizon);
  out.capacity.reserve(horizon);
  out.event_flag.reserve(horizon);

  out.trace.begin_epoch(1, user_ids(sys));
  std::optional<primal1::Snapshot> last_snapshot;
  std::size_t next_event = 0;
  double lambda = pc.initial_price;

  for (std::int64_t t = 1; t <= cfg.horizon; ++t) {
    const double announced = std::max(lambda, pc.price_floor);
    const Vector p = sys.channel_costs();
    Vector x(p.size());
    double utility = 0.0;
    for (std::size_t i = 0; i < sys.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      x[k] = primal1::best_response(sys.users[i].utility, announced * p[k]);
      utility += sys.users[i].utility.value(x[k]);
    }
    const double used = kernels::dot(view(x), view(p));
    out.lambda.push_back(announced);
    out.total_utility.push_back(utility);
    out.total_demand.push_back(used);
    out.capacity.push_back(sys.capacity);
    out.trace.append({t, Vector::Constant(1, announced), x, Vector(), -1, 0, false});

    double next =
        primal1::dual_price_step(announced, view(x), view(p), sys.capacity, sys.step_size, pc.demand_form);

    const DynamicsEvent* ev = event_at(cfg.events, next_event, t);
    out.event_flag.push_back(ev != nullptr);
    if (ev == nullptr) {
      lambda = next;
      continue;
    }

    EventOutcome outcome;
    outcome.at = t;
    outcome.kind = event_name(ev->kind);
    outcome.lambda_before = Vector::Constant(1, announced);
    const RateSystem before = sys;
    apply_event(sys, ev->kind);
    if (cfg.zero_shot) {
      const primal1::Snapshot snap = primal1::snapshot_from_trace(
          out.trace, before, last_snapshot ? &*last_snapshot : nullptr);
      ZeroShotEstimate est = std::visit(
          [&](const auto& e) -> ZeroShotEstimate {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, CapacityChange>) {
              return primal1::zeroshot_capacity(snap, e.capacity);
            } else if constexpr (std::is_same_v<E, UserLeave>) {
              return primal1::zeroshot_leave(snap, *before.index_of(e.id));
            } else if constexpr (std::is_same_v<E, RateUserJoin>) {
              return primal1::zeroshot_join(
                  snap, e.parameters_known ? std::optional<RateUser>(e.user) : std::nullopt);
            } else if constexpr (std::is_same_v<E, ChannelQualityChange>) {
              return primal1::zeroshot_channel(snap, e.p);
            } else {
              throw InvalidArgument("event '" + event_name(EventKind{e}) +
                                    "' does not apply to a rate-control system");
            }
          },
          ev->kind);
      next = est.scalar();
      outcome.estimate = std::move(est);
      last_snapshot = snap;
    }
    out.trace.mark_event();
    out.trace.begin_epoch(t + 1, user_ids(sys));
    out.events.push_back(std::move(outcome));
    lambda = next;
  }

  for (std::size_t i = 0; i < out.events.size(); ++i) {
    EventOutcome& e = out.events[i];
    const std::int64_t last = i + 1 < out.events.size() ? out.events[i + 1].at : cfg.horizon;
    const double target = out.capacity[static_cast<std::size_t>(e.at)];
    const bool sustained = cfg.sweep && cfg.sweep->sustained;
    const double band = cfg.sweep ? cfg.sweep->band : 0.01;
    e.convergence = convergence_time(out.total_demand, e.at, last, target, band, sustained);
  }
  return out;
}

RunResult run_primal2(const ScenarioConfig& cfg, std::uint64_t seed) {
  require_kind(cfg, ProblemKind::primal2);
  cfg.validate();
  const Primal2Config& pc = cfg.primal2;
  StochasticSystem sys = pc.system;
  RunResult out;
  out.problem = ProblemKind::primal2;
  out.seed = seed;
  const auto horizon = static_cast<std::size_t>(cfg.horizon);
  out.penalty_instant.reserve(horizon);
  out.penalty_ravg.reserve(horizon);
  out.vslc.reserve(horizon);
  out.event_flag.reserve(horizon);

  const auto n0 = static_cast<Eigen::Index>(sys.size());
  primal2::QueueState q{Vector::Zero(n0), Vector::Zero(n0)};
  switch (pc.offset_init) {
    case OffsetInit::oracle:
      q.lambda0 = primal2::dual2_oracle(sys).lambda;
      break;
    case OffsetInit::zero:
      break;
    case OffsetInit::given:
      q.lambda0 = pc.lambda0;
      break;
  }

  const CounterRng rng(seed);
  out.trace.begin_epoch(1, sys.ids);
  std::size_t next_event = 0;
  std::int64_t frame_start = 0;
  Vector served = Vector::Zero(n0);
  const auto window = static_cast<std::int64_t>(cfg.metric_window);

  for (std::int64_t t = 1; t <= cfg.horizon; ++t) {
    const std::size_t state = draw_categorical(sys.f, rng.uniform(static_cast<std::uint64_t>(t)));
    const Vector mult = q.multipliers();
    const Vector x = primal2::per_slot_allocation(sys.penalty, state, mult, sys.V);
    const double pen = sys.penalty.value(state, x);
    q = primal2::queue_step(q, sys.A, x);
    out.trace.append({t, mult, x, q.Q, static_cast<int>(state), 0, false});

    kernels::accumulate({served.data(), static_cast<std::size_t>(served.size())}, view(x));
    out.penalty_instant.push_back(pen);
    const std::int64_t first = std::max(frame_start + 1, t - window + 1);
    double acc = 0.0;
    for (std::int64_t k = first; k <= t; ++k) acc += out.penalty_instant[static_cast<std::size_t>(k - 1)];
    out.penalty_ravg.push_back(acc / static_cast<double>(t - first + 1));
    out.vslc.push_back(
        frame_shortfall(pc.vslc_form, static_cast<double>(t - frame_start), sys.A, served));

    const DynamicsEvent* ev = event_at(cfg.events, next_event, t);
    out.event_flag.push_back(ev != nullptr);
    if (ev == nullptr) continue;

    EventOutcome outcome;
    outcome.at = t;
    outcome.kind = event_name(ev->kind);
    outcome.lambda_before = mult;
    const StochasticSystem before = sys;
    apply_event(sys, ev->kind);
    if (cfg.zero_shot) {
      const primal2::Snapshot snap = primal2::snapshot_at(before.penalty, before.f, before.A,
                                                          before.V, mult, before.ids);
      std::visit(
          [&](const auto& e) {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, RequirementChange>) {
              outcome.estimate = primal2::zeroshot_requirements(snap, e.A);
              q = primal2::apply_offset_shift(q, mult, outcome.estimate->lambda);
            } else if constexpr (std::is_same_v<E, UserLeave>) {
              const std::size_t idx = *before.index_of(e.id);
              outcome.estimate = primal2::zeroshot_leave(snap, idx);
              q = primal2::apply_offset_shift_leave(q, idx, mult, outcome.estimate->lambda);
            } else if constexpr (std::is_same_v<E, ServiceUserJoin>) {
              outcome.estimate = primal2::zeroshot_join(snap, e.requirement);
              q = primal2::apply_offset_shift_join(q, mult, outcome.estimate->lambda);
            } else if constexpr (std::is_same_v<E, DistributionChange>) {
              outcome.estimate = primal2::zeroshot_distribution(snap, e.f);
              q = primal2::apply_offset_shift(q, mult, outcome.estimate->lambda);
            } else {
              throw InvalidArgument("event '" + event_name(EventKind{e}) +
                                    "' does not apply to a service system");
            }
          },
          ev->kind);
    } else if (const auto* leave = std::get_if<UserLeave>(&ev->kind)) {
      const std::size_t idx = *before.index_of(leave->id);
      const Vector zeros = Vector::Zero(q.Q.size() - 1);
      q = primal2::apply_offset_shift_leave(q, idx, Vector::Zero(q.Q.size()), zeros);
    } else if (std::holds_alternative<ServiceUserJoin>(ev->kind)) {
      const auto n = q.Q.size();
      q = primal2::apply_offset_shift_join(q, Vector::Zero(n), Vector::Zero(n + 1));
    }
    out.trace.mark_event();
    out.trace.begin_epoch(t + 1, sys.ids);
    out.events.push_back(std::move(outcome));
    frame_start = t;
    served = Vector::Zero(static_cast<Eigen::Index>(sys.size()));
  }
  return out;
}

RunResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (cfg.problem == ProblemKind::primal1) {
    RunResult r = run_primal1(cfg);
    r.seed = seed;
    return r;
  }
  return run_primal2(cfg, seed);
}

double vslc(const SimTrace& trace, std::int64_t t, const Vector& A, VslcForm form) {
  const auto& recs = trace.records();
  if (recs.empty() || t < recs.front().t || t > recs.back().t) {
    throw InvalidArgument("round " + std::to_string(t) + " is outside the trace");
  }
  const auto pos = static_cast<std::size_t>(t - recs.front().t);
  std::size_t begin = 0;
  for (std::size_t k = pos; k-- > 0;) {
    if (recs[k].event) {
      begin = k + 1;
      break;
    }
  }
  Vector served = Vector::Zero(A.size());
  for (std::size_t k = begin; k <= pos; ++k) {
    if (recs[k].rates.size() != A.size()) {
      throw InvalidArgument("requirement vector does not match the users in the frame");
    }
    served += recs[k].rates;
  }
  const auto frame_start = begin == 0 ? recs.front().t - 1 : recs[begin - 1].t;
  return frame_shortfall(form, static_cast<double>(t - frame_start), A, served);
}

ConvergenceTime convergence_time(const std::vector<double>& series, std::int64_t event_at,
                                 std::int64_t last_round, double target, double band,
                                 bool sustained) {
  if (!(band > 0.0)) throw InvalidArgument("convergence band must be positive");
  last_round = std::min<std::int64_t>(last_round, static_cast<std::int64_t>(series.size()));
  const double lo = target * (1.0 - band);
  const double hi = target * (1.0 + band);
  const auto in_band = [&](std::int64_t r) {
    const double v = series[static_cast<std::size_t>(r - 1)];
    return v >= lo && v <= hi;
  };
  const ConvergenceTime never{std::max<std::int64_t>(0, last_round - event_at), false};
  for (std::int64_t r = event_at + 1; r <= last_round; ++r) {
    if (!in_band(r)) continue;
    if (sustained) {
      bool stays = true;
      for (std::int64_t k = r + 1; k <= last_round && stays; ++k) stays = in_band(k);
      if (!stays) continue;
    }
    return {r - (event_at + 1), true};
  }
  return never;
}

std::vector<std::string> metric_names(ProblemKind problem) {
  if (problem == ProblemKind::primal1) return {"lambda", "total_utility", "total_demand", "capacity"};
  return {"penalty_instant", "penalty_ravg50", "vslc"};
}

const std::vector<double>& metric_series(const RunResult& run, const std::string& name) {
  if (name == "lambda") return run.lambda;
  if (name == "total_utility") return run.total_utility;
  if (name == "total_demand") return run.total_demand;
  if (name == "capacity") return run.capacity;
  if (name == "penalty_instant") return run.penalty_instant;
  if (name == "penalty_ravg50") return run.penalty_ravg;
  if (name == "vslc") return run.vslc;
  throw InvalidArgument("unknown metric '" + name + "'");
}

const MetricStats& MonteCarloResult::metric(const std::string& name) const {
  for (const MetricStats& m : metrics) {
    if (m.name == name) return m;
  }
  throw InvalidArgument("unknown metric '" + name + "'");
}

MonteCarloResult monte_carlo(const ScenarioConfig& cfg, std::size_t keep_traces) {
  cfg.validate();
  const auto runs = static_cast<std::size_t>(cfg.runs);
  MonteCarloResult out;
  out.runs.resize(runs);
  std::vector<std::exception_ptr> errors(runs);

  std::size_t workers = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, runs);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < runs; i = next.fetch_add(1)) {
      try {
        out.runs[i] = run_scenario(cfg, cfg.seed + i);
        if (i >= keep_traces) out.runs[i].trace = SimTrace{};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  out.event_flag = out.runs.front().event_flag;
  const auto horizon = static_cast<std::size_t>(cfg.horizon);
  for (const std::string& name : metric_names(cfg.problem)) {
    MetricStats stats{name, std::vector<double>(horizon, 0.0), std::vector<double>(horizon, 0.0)};
    // Welford's update in seed order: identical runs give exactly zero spread.
    std::vector<double>& m2 = stats.stddev;
    double count = 0.0;
    for (const RunResult& r : out.runs) {
      const auto& s = metric_series(r, name);
      count += 1.0;
      for (std::size_t k = 0; k < horizon; ++k) {
        const double d = s[k] - stats.mean[k];
        stats.mean[k] += d / count;
        m2[k] += d * (s[k] - stats.mean[k]);
      }
    }
    for (double& v : m2) v = runs > 1 ? std::sqrt(v / static_cast<double>(runs - 1)) : 0.0;
    out.metrics.push_back(std::move(stats));
  }
  return out;
}

}  // namespace netopt
