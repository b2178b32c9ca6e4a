#include "netopt/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "netopt/error.hpp"

namespace netopt::csv {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return {buf, res.ptr};
}

Writer& Writer::cell(std::string_view text) {
  if (!first_) os_ << ',';
  first_ = false;
  if (text.find_first_of(",\"\n") == std::string_view::npos) {
    os_ << text;
  } else {
    os_ << '"';
    for (char c : text) {
      if (c == '"') os_ << '"';
      os_ << c;
    }
    os_ << '"';
  }
  return *this;
}

Writer& Writer::cell(double v) { return cell(format_number(v)); }

Writer& Writer::cell(std::int64_t v) { return cell(std::to_string(v)); }

Writer& Writer::cell(std::uint64_t v) { return cell(std::to_string(v)); }

Writer& Writer::empty() { return cell(std::string_view{}); }

void Writer::end_row() {
  os_ << '\n';
  first_ = true;
}

void Writer::header(const std::vector<std::string>& columns) {
  for (const std::string& c : columns) cell(c);
  end_row();
}

namespace {

const char* time_column(ProblemKind problem) {
  return problem == ProblemKind::primal1 ? "round" : "slot";
}

}  // namespace

void write_runs(std::ostream& os, const std::vector<RunResult>& runs) {
  if (runs.empty()) throw InvalidArgument("no runs to write");
  const ProblemKind problem = runs.front().problem;
  Writer w(os);
  std::vector<std::string> cols{"run", time_column(problem)};
  for (const std::string& m : metric_names(problem)) cols.push_back(m);
  cols.emplace_back("event_flag");
  w.header(cols);
  const auto names = metric_names(problem);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const RunResult& run = runs[r];
    std::vector<const std::vector<double>*> series;
    for (const std::string& m : names) series.push_back(&metric_series(run, m));
    for (std::size_t k = 0; k < run.event_flag.size(); ++k) {
      w.cell(r).cell(k + 1);
      for (const auto* s : series) w.cell((*s)[k]);
      w.cell(run.event_flag[k] ? 1 : 0);
      w.end_row();
    }
  }
}

void write_users(std::ostream& os, const RunResult& run, std::size_t run_index) {
  Writer w(os);
  w.header({"run", "slot", "user", "rate", "queue"});
  for (const TraceRecord& rec : run.trace.records()) {
    const auto& users = run.trace.epoch_of(rec).users;
    for (std::size_t i = 0; i < users.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      w.cell(run_index).cell(rec.t).cell(users[i].value).cell(rec.rates[k]);
      if (rec.queues.size() > k) {
        w.cell(rec.queues[k]);
      } else {
        w.empty();
      }
      w.end_row();
    }
  }
}

void write_aggregate(std::ostream& os, ProblemKind problem, const MonteCarloResult& mc) {
  Writer w(os);
  std::vector<std::string> cols{time_column(problem)};
  for (const MetricStats& m : mc.metrics) {
    cols.push_back(m.name + "_mean");
    cols.push_back(m.name + "_std");
  }
  cols.emplace_back("event_flag");
  w.header(cols);
  for (std::size_t k = 0; k < mc.event_flag.size(); ++k) {
    w.cell(k + 1);
    for (const MetricStats& m : mc.metrics) w.cell(m.mean[k]).cell(m.stddev[k]);
    w.cell(mc.event_flag[k] ? 1 : 0);
    w.end_row();
  }
}

void write_events(std::ostream& os, const RunResult& run, std::size_t run_index) {
  Writer w(os);
  w.header({"run", "at", "kind", "source", "user", "lambda_before", "estimate", "clamped",
            "regularized", "rcond", "convergence_rounds", "converged"});
  const auto tail = [&](const EventOutcome& e) {
    if (e.estimate) {
      w.cell(e.estimate->clamped ? 1 : 0).cell(e.estimate->regularized ? 1 : 0).cell(e.estimate->rcond);
    } else {
      w.empty().empty().empty();
    }
    if (e.convergence) {
      w.cell(e.convergence->rounds).cell(e.convergence->converged ? 1 : 0);
    } else {
      w.empty().empty();
    }
    w.end_row();
  };

  const auto& recs = run.trace.records();
  for (const EventOutcome& e : run.events) {
    const std::string source = e.estimate ? to_string(e.estimate->source) : "";
    if (run.problem == ProblemKind::primal1) {
      w.cell(run_index).cell(e.at).cell(e.kind).cell(source).empty().cell(e.lambda_before[0]);
      if (e.estimate) {
        w.cell(e.estimate->scalar());
      } else {
        w.empty();
      }
      tail(e);
      continue;
    }
    // One row per user present before or after the change.
    std::vector<UserId> before;
    std::vector<UserId> after;
    if (!recs.empty()) {
      const auto pos = static_cast<std::size_t>(e.at - recs.front().t);
      before = run.trace.epoch_of(recs.at(pos)).users;
      after = pos + 1 < recs.size() ? run.trace.epoch_of(recs[pos + 1]).users : before;
    }
    std::vector<UserId> all = before;
    for (UserId id : after) {
      if (std::find(all.begin(), all.end(), id) == all.end()) all.push_back(id);
    }
    for (UserId id : all) {
      w.cell(run_index).cell(e.at).cell(e.kind).cell(source).cell(id.value);
      const auto ib = std::find(before.begin(), before.end(), id);
      if (ib != before.end()) {
        w.cell(e.lambda_before[ib - before.begin()]);
      } else {
        w.empty();
      }
      const auto ia = std::find(after.begin(), after.end(), id);
      if (e.estimate && ia != after.end()) {
        w.cell(e.estimate->lambda[ia - after.begin()]);
      } else {
        w.empty();
      }
      tail(e);
    }
  }
}

void write_sweep(std::ostream& os, const std::vector<SweepRow>& rows) {
  Writer w(os);
  w.header({"z", "conv_time_zeroshot", "conv_time_baseline"});
  for (const SweepRow& r : rows) {
    w.cell(r.z).cell(r.zero_shot).cell(r.baseline);
    w.end_row();
  }
}

void write_oracle(std::ostream& os, const std::vector<OracleRow>& rows) {
  Writer w(os);
  w.header({"epoch", "start", "kind", "user", "lambda", "residual", "objective"});
  for (const OracleRow& r : rows) {
    w.cell(r.epoch).cell(r.start).cell(r.kind);
    if (r.user) {
      w.cell(r.user->value);
    } else {
      w.empty();
    }
    w.cell(r.lambda).cell(r.residual).cell(r.objective);
    w.end_row();
  }
}

}  // namespace netopt::csv
