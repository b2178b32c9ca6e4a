#include <doctest.h>

#include <cmath>

#include "netopt/error.hpp"
#include "netopt/rng.hpp"
#include "netopt/runner.hpp"
#include "support/fixtures.hpp"
#include "support/systems.hpp"

using namespace netopt;

namespace {

ScenarioConfig rate_config() {
  ScenarioConfig cfg;
  cfg.problem = ProblemKind::primal1;
  cfg.primal1.system = testing::reference_rate_system();
  cfg.horizon = 300;
  return cfg;
}

ScenarioConfig service_config(std::int64_t horizon = 400) {
  ScenarioConfig cfg;
  cfg.problem = ProblemKind::primal2;
  cfg.primal2.system = testing::reference_service_system();
  cfg.horizon = horizon;
  return cfg;
}

SimTrace constant_trace(int slots, const Vector& x, std::int64_t event_at = 0) {
  SimTrace trace;
  trace.begin_epoch(1, {UserId{1}, UserId{2}});
  for (int t = 1; t <= slots; ++t) {
    TraceRecord r;
    r.t = t;
    r.multipliers = Vector::Zero(2);
    r.rates = x;
    trace.append(r);
    if (t == event_at) trace.mark_event();
  }
  return trace;
}

}  // namespace

TEST_SUITE("runner") {
  TEST_CASE("vslc examples") {
    Vector A(2);
    A << 1.0, 2.0;
    const SimTrace rich = constant_trace(10, Vector::Constant(2, 5.0));
    for (int t = 1; t <= 10; ++t) CHECK(vslc(rich, t, A) == 0.0);

    const SimTrace idle = constant_trace(10, Vector::Zero(2), 4);
    // Frame restarts after the change at t = 4.
    CHECK(vslc(idle, 4, A) == doctest::Approx(4.0 * 3.0));
    CHECK(vslc(idle, 7, A) == doctest::Approx(3.0 * 3.0));
    CHECK(vslc(idle, 10, A) == doctest::Approx(6.0 * 3.0));
    CHECK_THROWS_AS(vslc(idle, 0, A), InvalidArgument);
    CHECK_THROWS_AS(vslc(idle, 11, A), InvalidArgument);

    // Surplus form counts service above the requirement.
    CHECK(vslc(rich, 2, A, VslcForm::surplus) == doctest::Approx((10.0 - 2.0) + (10.0 - 4.0)));
    CHECK(vslc(idle, 7, A, VslcForm::surplus) == 0.0);
  }

  TEST_CASE("convergence time examples") {
    const std::vector<double> in_band(20, 10.0);
    const ConvergenceTime now = convergence_time(in_band, 5, 20, 10.0, 0.01);
    CHECK(now.converged);
    CHECK(now.rounds == 0);

    std::vector<double> s(20, 12.0);
    for (std::size_t k = 9; k < 20; ++k) s[k] = 10.05;  // rounds 10..20
    const ConvergenceTime later = convergence_time(s, 5, 20, 10.0, 0.01);
    CHECK(later.converged);
    CHECK(later.rounds == 4);

    const ConvergenceTime never = convergence_time(std::vector<double>(20, 12.0), 5, 20, 10.0, 0.01);
    CHECK(!never.converged);
    CHECK(never.rounds == 15);

    std::vector<double> blip(20, 12.0);
    blip[6] = 10.0;                                   // round 7 only
    for (std::size_t k = 12; k < 20; ++k) blip[k] = 10.0;  // rounds 13..20
    CHECK(convergence_time(blip, 5, 20, 10.0, 0.01).rounds == 1);
    CHECK(convergence_time(blip, 5, 20, 10.0, 0.01, true).rounds == 7);
  }

  TEST_CASE("dual decomposition converges to the oracle price without events") {
    const RunResult r = run_primal1(rate_config());
    REQUIRE(r.lambda.size() == 300);
    CHECK(std::abs(r.lambda.back() - fixtures::rate_base) <= 1e-3);
    CHECK(r.events.empty());
  }

  TEST_CASE("metric series lengths equal the horizon") {
    ScenarioConfig cfg = rate_config();
    cfg.events.push_back({100, CapacityChange{9.0}});
    const RunResult r = run_primal1(cfg);
    CHECK(r.lambda.size() == 300);
    CHECK(r.total_demand.size() == 300);
    CHECK(r.event_flag.size() == 300);
    CHECK(r.trace.size() == 300);
    CHECK(r.event_flag[99] == 1);
    CHECK(r.capacity[99] == 10.0);
    CHECK(r.capacity[100] == 9.0);

    ScenarioConfig sc = service_config(200);
    sc.events.push_back({100, RequirementChange{1.3 * sc.primal2.system.A}});
    const RunResult s = run_primal2(sc, 4);
    CHECK(s.penalty_instant.size() == 200);
    CHECK(s.penalty_ravg.size() == 200);
    CHECK(s.vslc.size() == 200);
  }

  TEST_CASE("zero-shot and baseline traces agree up to the first event") {
    ScenarioConfig cfg = rate_config();
    cfg.events.push_back({100, CapacityChange{9.0}});
    const RunResult z = run_primal1(cfg);
    cfg.zero_shot = false;
    const RunResult b = run_primal1(cfg);
    for (std::size_t k = 0; k < 100; ++k) CHECK(z.lambda[k] == b.lambda[k]);
    CHECK(z.lambda[100] != b.lambda[100]);
    REQUIRE(z.events.size() == 1);
    CHECK(z.events[0].estimate.has_value());
    CHECK(!b.events[0].estimate.has_value());

    ScenarioConfig sc = service_config(200);
    sc.events.push_back({100, RequirementChange{1.3 * sc.primal2.system.A}});
    const RunResult zs = run_primal2(sc, 9);
    sc.zero_shot = false;
    const RunResult bs = run_primal2(sc, 9);
    for (std::size_t k = 0; k < 100; ++k) CHECK(zs.penalty_instant[k] == bs.penalty_instant[k]);
  }

  TEST_CASE("zero-shot capacity update beats the baseline on the reference schedule") {
    ScenarioConfig cfg = rate_config();
    cfg.events.push_back({100, CapacityChange{9.0}});
    cfg.events.push_back({200, CapacityChange{12.0}});
    const RunResult z = run_primal1(cfg);
    cfg.zero_shot = false;
    const RunResult b = run_primal1(cfg);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(z.events[i].convergence->rounds <= b.events[i].convergence->rounds);
    }
    CHECK(std::abs(z.events[0].estimate->scalar() - fixtures::rate_c9) < 0.01);
  }

  TEST_CASE("user changes and channel changes run end to end") {
    ScenarioConfig cfg = rate_config();
    cfg.events.push_back({100, UserLeave{UserId{1}}});
    cfg.events.push_back({200, RateUserJoin{{UserId{12}, PowerUtility(0.3), 5.0}, false}});
    const RunResult r = run_primal1(cfg);
    REQUIRE(r.events.size() == 2);
    CHECK(r.events[0].estimate->source == EstimateSource::user_leave);
    CHECK(r.events[1].estimate->source == EstimateSource::user_join_unknown);
    CHECK(r.trace.epochs().size() == 3);
    CHECK(r.trace.records().back().rates.size() == 11);

    ScenarioConfig ch = rate_config();
    Vector p = ch.primal1.system.channel_costs();
    ch.events.push_back({100, ChannelQualityChange{1.2 * p}});
    const RunResult c = run_primal1(ch);
    CHECK(std::abs(c.events[0].estimate->scalar() - fixtures::rate_p_x1_2) < 0.01);
  }

  TEST_CASE("service users leave and join with offset bookkeeping") {
    ScenarioConfig sc = service_config(300);
    sc.events.push_back({100, UserLeave{UserId{11}}});
    sc.events.push_back({200, ServiceUserJoin{UserId{12}, 5.0, reference_service_gammas(12, 5)}});
    const RunResult r = run_primal2(sc, 1);
    REQUIRE(r.events.size() == 2);
    CHECK(r.events[0].estimate->lambda.size() == 10);
    CHECK(r.events[1].estimate->lambda.size() == 11);
    // The newcomer's first multiplier is its estimate: lambda0 = estimate, Q = 0.
    const TraceRecord& first = r.trace.records()[200];
    CHECK(first.multipliers[10] == r.events[1].estimate->lambda[10]);

    sc.zero_shot = false;
    const RunResult b = run_primal2(sc, 1);
    CHECK(b.trace.records()[200].multipliers[10] == 0.0);
  }

  TEST_CASE("repeated runs are identical for a fixed seed") {
    ScenarioConfig sc = service_config(300);
    Vector f(5);
    f << 0.5, 0.5, 0, 0, 0;
    sc.events.push_back({150, DistributionChange{f}});
    const RunResult a = run_primal2(sc, 77);
    const RunResult b = run_primal2(sc, 77);
    CHECK(a.penalty_instant == b.penalty_instant);
    CHECK(a.vslc == b.vslc);
    const RunResult c = run_primal2(sc, 78);
    CHECK(a.penalty_instant != c.penalty_instant);
  }

  TEST_CASE("long-run service from the optimal offset meets the requirements") {
    ScenarioConfig sc = service_config(100000);
    const RunResult r = run_primal2(sc, 3);
    Vector total = Vector::Zero(11);
    for (const TraceRecord& rec : r.trace.records()) total += rec.rates;
    const Vector avg = total / 100000.0;
    for (Eigen::Index n = 0; n < 11; ++n)
      CHECK(avg[n] == doctest::Approx(sc.primal2.system.A[n]).epsilon(0.01));
  }

  TEST_CASE("running average uses the trailing window within a frame") {
    ScenarioConfig sc = service_config(120);
    sc.metric_window = 10;
    sc.events.push_back({50, RequirementChange{1.1 * sc.primal2.system.A}});
    const RunResult r = run_primal2(sc, 2);
    double acc = 0.0;
    for (std::size_t k = 30; k < 40; ++k) acc += r.penalty_instant[k];
    CHECK(r.penalty_ravg[39] == doctest::Approx(acc / 10.0).epsilon(1e-12));
    // Slot 53 averages only slots 51..53.
    const double post = (r.penalty_instant[50] + r.penalty_instant[51] + r.penalty_instant[52]) / 3.0;
    CHECK(r.penalty_ravg[52] == doctest::Approx(post).epsilon(1e-12));
  }

  TEST_CASE("monte carlo statistics") {
    ScenarioConfig one = service_config(100);
    one.runs = 1;
    const MonteCarloResult m1 = monte_carlo(one);
    for (const MetricStats& s : m1.metrics)
      for (double v : s.stddev) CHECK(v == 0.0);

    ScenarioConfig rate = rate_config();
    rate.runs = 3;
    rate.events.push_back({100, CapacityChange{9.0}});
    const MonteCarloResult mr = monte_carlo(rate);
    for (const MetricStats& s : mr.metrics)
      for (double v : s.stddev) CHECK(v == 0.0);

    ScenarioConfig many = service_config(100);
    many.runs = 4;
    many.threads = 2;
    const MonteCarloResult m4 = monte_carlo(many, 4);
    REQUIRE(m4.runs.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(m4.runs[i].seed == many.seed + i);
    const auto& pen = m4.metric("penalty_instant");
    double mean = 0.0;
    for (const RunResult& r : m4.runs) mean += r.penalty_instant[10];
    mean /= 4.0;
    double var = 0.0;
    for (const RunResult& r : m4.runs) var += std::pow(r.penalty_instant[10] - mean, 2);
    CHECK(pen.mean[10] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(pen.stddev[10] == doctest::Approx(std::sqrt(var / 3.0)).epsilon(1e-12));

    many.threads = 1;
    const MonteCarloResult serial = monte_carlo(many);
    CHECK(serial.metric("vslc").mean == m4.metric("vslc").mean);
    CHECK_THROWS_AS(m4.metric("nope"), InvalidArgument);
  }

  TEST_CASE("scenario validation") {
    ScenarioConfig cfg = rate_config();
    cfg.events.push_back({100, CapacityChange{9.0}});
    cfg.events.push_back({100, CapacityChange{12.0}});
    CHECK_THROWS_AS(cfg.validate(), ScenarioError);
    cfg.events.pop_back();
    cfg.horizon = 100;
    CHECK_THROWS_AS(cfg.validate(), ScenarioError);
    cfg.horizon = 300;
    cfg.runs = 0;
    CHECK_THROWS_AS(cfg.validate(), ScenarioError);
    cfg.runs = 1;
    cfg.events.push_back({150, RequirementChange{Vector::Ones(11)}});
    CHECK_THROWS_AS(cfg.validate(), ScenarioError);
  }

  TEST_CASE("counter rng is a pure function of its key") {
    const CounterRng a(5, 0), b(5, 0), c(5, 1), d(6, 0);
    for (std::uint64_t k = 0; k < 100; ++k) {
      CHECK(a.bits(k) == b.bits(k));
      CHECK(a.uniform(k) >= 0.0);
      CHECK(a.uniform(k) < 1.0);
    }
    CHECK(a.bits(3) != c.bits(3));
    CHECK(a.bits(3) != d.bits(3));
  }

  TEST_CASE("categorical draws follow the distribution and skip empty states") {
    Vector f(4);
    f << 0.5, 0.0, 0.3, 0.2;
    const CounterRng rng(11);
    std::vector<int> counts(4, 0);
    const int n = 200000;
    for (int k = 0; k < n; ++k) ++counts[draw_categorical(f, rng.uniform(static_cast<std::uint64_t>(k)))];
    CHECK(counts[1] == 0);
    CHECK(counts[0] / double(n) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(counts[2] / double(n) == doctest::Approx(0.3).epsilon(0.02));
    CHECK(counts[3] / double(n) == doctest::Approx(0.2).epsilon(0.02));
    CHECK(draw_categorical(f, 0.0) == 0);
    CHECK(draw_categorical(f, 0.5) == 2);
    CHECK(draw_categorical(f, std::nextafter(1.0, 0.0)) == 3);
  }
}
