#pragma once

// End-to-end drivers for the online algorithms over an event timeline, the
// per-round metrics, and Monte Carlo aggregation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "netopt/estimate.hpp"
#include "netopt/model.hpp"
#include "netopt/primal1.hpp"
#include "netopt/primal2.hpp"

namespace netopt {

enum class ProblemKind { primal1, primal2 };

/// Violation-since-last-change accounting.
enum class VslcForm {
  /// sum_n max(0, (t - T) A_n - served_n)
  shortfall,
  /// sum_n max(0, served_n - (t - T) A_n), the display read literally.
  surplus,
};

/// Where lambda0 starts for the service problem.
enum class OffsetInit { oracle, zero, given };

struct Primal1Config {
  RateSystem system;
  /// Price announced in round 1; a zero price is undefined for power utilities.
  double initial_price = 1.0;
  /// Announced prices are floored here when the update clamps to 0.
  double price_floor = 1e-9;
  primal1::DemandForm demand_form = primal1::DemandForm::weighted;
};

struct Primal2Config {
  StochasticSystem system;
  OffsetInit offset_init = OffsetInit::oracle;
  /// Used when offset_init is `given`.
  Vector lambda0;
  VslcForm vslc_form = VslcForm::shortfall;
};

/// Parameter grid for convergence-time sweeps. Each value is written to the
/// scenario at `key` (dotted path) before the run.
struct SweepConfig {
  std::string key;
  std::vector<double> values;
  double band = 0.01;
  bool sustained = false;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ProblemKind problem = ProblemKind::primal1;
  Primal1Config primal1;
  Primal2Config primal2;
  /// Strictly increasing in `at`; each change applies at the end of round `at`.
  std::vector<DynamicsEvent> events;
  std::int64_t horizon = 300;
  bool zero_shot = true;
  int runs = 1;
  std::uint64_t seed = 1;
  int metric_window = 50;
  /// Worker threads for Monte Carlo; 0 picks the hardware concurrency.
  int threads = 0;
  std::optional<SweepConfig> sweep;

  void validate() const;
};

struct ConvergenceTime {
  /// Rounds after the event until the series is in band; the remaining
  /// horizon when it never gets there.
  std::int64_t rounds = 0;
  bool converged = false;
};

struct EventOutcome {
  std::int64_t at = 0;
  std::string kind;
  /// Multiplier(s) read off at the event (lambda_T, or lambda0 + Q_T).
  Vector lambda_before;
  std::optional<ZeroShotEstimate> estimate;
  /// Rate control only: rounds until total demand is within 1% of capacity.
  std::optional<ConvergenceTime> convergence;
};

/// Per-round metric series, index k holds round k + 1.
struct RunResult {
  ProblemKind problem = ProblemKind::primal1;
  std::uint64_t seed = 0;
  SimTrace trace;
  std::vector<char> event_flag;
  // Rate control
  std::vector<double> lambda;
  std::vector<double> total_utility;
  std::vector<double> total_demand;
  std::vector<double> capacity;
  // Service
  std::vector<double> penalty_instant;
  std::vector<double> penalty_ravg;
  std::vector<double> vslc;
  std::vector<EventOutcome> events;
};

RunResult run_primal1(const ScenarioConfig& cfg);
RunResult run_primal2(const ScenarioConfig& cfg, std::uint64_t seed);
/// Dispatches on cfg.problem with seed cfg.seed.
RunResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

/// VSLC at round t of the trace with per-user requirements A in force since the
/// last change before t.
double vslc(const SimTrace& trace, std::int64_t t, const Vector& A,
            VslcForm form = VslcForm::shortfall);

/// First round after `event_at` whose value lies in target * [1 - band, 1 + band],
/// counted from round event_at + 1 (so 0 means immediately). `series[k]` is
/// round k + 1; only rounds up to `last_round` are examined. With `sustained`
/// the series must also stay in band through `last_round`.
ConvergenceTime convergence_time(const std::vector<double>& series, std::int64_t event_at,
                                 std::int64_t last_round, double target, double band,
                                 bool sustained = false);

struct MetricStats {
  std::string name;
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct MonteCarloResult {
  /// Runs in seed order; traces beyond the first `keep_traces` are dropped.
  std::vector<RunResult> runs;
  std::vector<MetricStats> metrics;
  std::vector<char> event_flag;

  const MetricStats& metric(const std::string& name) const;
};

/// Runs cfg.runs independent replications with seeds cfg.seed + i and reports
/// per-round mean and sample standard deviation of every metric.
MonteCarloResult monte_carlo(const ScenarioConfig& cfg, std::size_t keep_traces = 1);

/// Metric names recorded for a problem kind, in CSV column order.
std::vector<std::string> metric_names(ProblemKind problem);
const std::vector<double>& metric_series(const RunResult& run, const std::string& name);

}  // namespace netopt
