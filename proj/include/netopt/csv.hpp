#pragma once

// CSV emission. Every file has a header row, LF line endings, a fixed column
// order and locale-independent numbers with 12 significant digits.
//
//   primal1 runs:      run,round,lambda,total_utility,total_demand,capacity,event_flag
//   primal2 runs:      run,slot,penalty_instant,penalty_ravg50,vslc,event_flag
//   primal2 users:     run,slot,user,rate,queue
//   aggregate:         round|slot, <metric>_mean, <metric>_std ..., event_flag
//   events:            run,at,kind,source,user,lambda_before,estimate,clamped,regularized,rcond,convergence_rounds,converged
//   sweep:             z,conv_time_zeroshot,conv_time_baseline
//   oracle:            epoch,start,kind,user,lambda,residual,objective

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "netopt/runner.hpp"

namespace netopt::csv {

/// printf-style %.12g without the locale: 12 significant digits, trailing
/// zeros dropped, -0 written as 0.
std::string format_number(double v);

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  Writer& cell(std::string_view text);
  Writer& cell(double v);
  Writer& cell(std::int64_t v);
  Writer& cell(std::uint64_t v);
  Writer& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
  Writer& empty();
  void end_row();

  void header(const std::vector<std::string>& columns);

 private:
  std::ostream& os_;
  bool first_ = true;
};

/// One row per (run, round) for every run in `runs`, run index = seed offset.
void write_runs(std::ostream& os, const std::vector<RunResult>& runs);

/// Per-user rates and queues of one service run.
void write_users(std::ostream& os, const RunResult& run, std::size_t run_index);

void write_aggregate(std::ostream& os, ProblemKind problem, const MonteCarloResult& mc);

void write_events(std::ostream& os, const RunResult& run, std::size_t run_index);

struct SweepRow {
  double z = 0.0;
  std::int64_t zero_shot = 0;
  std::int64_t baseline = 0;
};

void write_sweep(std::ostream& os, const std::vector<SweepRow>& rows);

struct OracleRow {
  std::size_t epoch = 0;
  std::int64_t start = 1;
  std::string kind;
  std::optional<UserId> user;
  double lambda = 0.0;
  double residual = 0.0;
  double objective = 0.0;
};

void write_oracle(std::ostream& os, const std::vector<OracleRow>& rows);

}  // namespace netopt::csv
