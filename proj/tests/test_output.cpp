#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "netopt/cli.hpp"
#include "netopt/csv.hpp"
#include "support/systems.hpp"

using namespace netopt;
namespace fs = std::filesystem;

namespace {

const fs::path scenario_dir = NETOPT_SCENARIO_DIR;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "netopt");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("netopt-test-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("csv") {
  TEST_CASE("number formatting") {
    CHECK(csv::format_number(0.0) == "0");
    CHECK(csv::format_number(-0.0) == "0");
    CHECK(csv::format_number(1.0) == "1");
    CHECK(csv::format_number(0.1) == "0.1");
    CHECK(csv::format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(csv::format_number(-2.5e-7) == "-2.5e-07");
    CHECK(csv::format_number(123456789012345.0) == "1.23456789012e+14");
  }

  TEST_CASE("writer quotes when needed") {
    std::ostringstream os;
    csv::Writer w(os);
    w.header({"a", "b"});
    w.cell("x,y").cell(std::int64_t{3});
    w.end_row();
    w.empty().cell("say \"hi\"");
    w.end_row();
    CHECK(os.str() == "a,b\n\"x,y\",3\n,\"say \"\"hi\"\"\"\n");
  }

  TEST_CASE("sweep and oracle schemas") {
    std::ostringstream sw;
    csv::write_sweep(sw, {{5.0, 0, 12}, {10.0, 1, 14}});
    CHECK(sw.str() == "z,conv_time_zeroshot,conv_time_baseline\n5,0,12\n10,1,14\n");

    std::ostringstream orc;
    csv::write_oracle(orc, {{0, 1, "initial", std::nullopt, 0.5, 1e-12, 2.0}});
    CHECK(lines(orc.str()).front() == "epoch,start,kind,user,lambda,residual,objective");
    CHECK(lines(orc.str())[1] == "0,1,initial,,0.5,1e-12,2");
  }
}

TEST_SUITE("cli") {
  TEST_CASE("simulate writes both variants for the capacity scenario") {
    const fs::path dir = scratch("simulate");
    const CliResult r = run_cli({"simulate", (scenario_dir / "primal1_capacity.json").string(), "--out", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    for (const char* f : {"primal1_capacity_zeroshot.csv", "primal1_capacity_baseline.csv",
                          "primal1_capacity_zeroshot_events.csv", "primal1_capacity_baseline_events.csv",
                          "primal1_capacity_manifest.json"}) {
      CAPTURE(f);
      CHECK(fs::exists(dir / f));
    }
    const auto rows = lines(slurp(dir / "primal1_capacity_zeroshot.csv"));
    CHECK(rows.front() == "run,round,lambda,total_utility,total_demand,capacity,event_flag");
    CHECK(rows.size() == 301);
    CHECK(lines(slurp(dir / "primal1_capacity_zeroshot_events.csv")).front() ==
          "run,at,kind,source,user,lambda_before,estimate,clamped,regularized,rcond,convergence_rounds,converged");
  }

  TEST_CASE("simulate is byte-for-byte reproducible") {
    const fs::path a = scratch("det-a"), b = scratch("det-b");
    const std::string scen = (scenario_dir / "primal2_users.json").string();
    REQUIRE(run_cli({"simulate", scen, "--out", a.string(), "--runs", "3"}).code == 0);
    REQUIRE(run_cli({"simulate", scen, "--out", b.string(), "--runs", "3", "--threads", "2"}).code == 0);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      if (entry.path().extension() != ".csv") continue;
      CAPTURE(entry.path().filename().string());
      CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
      ++compared;
    }
    CHECK(compared == 8);
  }

  TEST_CASE("runs override produces aggregate statistics") {
    const fs::path dir = scratch("aggregate");
    const CliResult r = run_cli({"simulate", (scenario_dir / "primal2_requirements.json").string(), "--out",
                                 dir.string(), "--runs", "4", "--no-zero-shot"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(!fs::exists(dir / "primal2_requirements_zeroshot.csv"));
    const auto rows = lines(slurp(dir / "primal2_requirements_baseline_aggregate.csv"));
    CHECK(rows.front() ==
          "slot,penalty_instant_mean,penalty_instant_std,penalty_ravg50_mean,penalty_ravg50_std,vslc_mean,vslc_std,event_flag");
    CHECK(rows.size() == 3001);
  }

  TEST_CASE("malformed event ordering exits with 2 and names the timestamps") {
    const fs::path dir = scratch("bad-order");
    const CliResult r = run_cli({"simulate", (scenario_dir / "primal1_capacity.json").string(), "--out",
                                 dir.string(), "--set", "events.1.at=50"});
    CHECK(r.code == 2);
    CHECK(r.err.find("t=50") != std::string::npos);
    CHECK(r.err.find("t=100") != std::string::npos);
  }

  TEST_CASE("missing scenario file exits with 3") {
    const CliResult r = run_cli({"simulate", (scenario_dir / "nope.json").string(), "--out", scratch("missing").string()});
    CHECK(r.code == 3);
  }

  TEST_CASE("unknown options exit with 2") {
    CHECK(run_cli({"simulate", "--bogus"}).code == 2);
    CHECK(run_cli({}).code == 2);
  }

  TEST_CASE("sweep grid sizes") {
    const fs::path dir = scratch("sweep");
    const std::string scen = (scenario_dir / "primal1_capacity_sweep.json").string();
    REQUIRE(run_cli({"sweep", scen, "--out", dir.string()}).code == 0);
    const auto rows = lines(slurp(dir / "primal1_capacity_sweep_sweep.csv"));
    CHECK(rows.size() == 20);
    CHECK(rows.front() == "z,conv_time_zeroshot,conv_time_baseline");

    const fs::path one = scratch("sweep-one");
    REQUIRE(run_cli({"sweep", scen, "--out", one.string(), "--grid", "events.0.percent_change=30"}).code == 0);
    CHECK(lines(slurp(one / "primal1_capacity_sweep_sweep.csv")).size() == 2);
    CHECK(run_cli({"sweep", scen, "--out", one.string(), "--grid", "events.0.percent_change=a:b"}).code == 2);
  }

  TEST_CASE("oracle reports every epoch") {
    const fs::path dir = scratch("oracle");
    const CliResult r = run_cli({"oracle", (scenario_dir / "primal1_capacity.json").string(), "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto rows = lines(slurp(dir / "primal1_capacity_oracle.csv"));
    CHECK(rows.size() == 4);
    CHECK(rows[1].rfind("0,1,initial,,0.4911104256", 0) == 0);
  }

  TEST_CASE("output directory falls back to the environment") {
    const fs::path dir = scratch("env");
    ::setenv("NETOPT_OUT_DIR", dir.string().c_str(), 1);
    const CliResult r = run_cli({"oracle", (scenario_dir / "primal1_users.json").string()});
    ::unsetenv("NETOPT_OUT_DIR");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "primal1_users_oracle.csv"));
  }
}
