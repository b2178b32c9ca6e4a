#include "netopt/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "netopt/csv.hpp"
#include "netopt/error.hpp"
#include "netopt/kernels.hpp"
#include "netopt/scenario_io.hpp"

namespace netopt::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutDirEnv = "NETOPT_OUT_DIR";
constexpr const char* kDefaultOutDir = "netopt-out";

struct CommonOptions {
  std::string scenario;
  std::string out_dir;
  std::vector<std::string> sets;
};

struct SimulateOptions {
  CommonOptions common;
  int runs = 0;
  std::int64_t seed = -1;
  bool no_zero_shot = false;
  double v = 0.0;
  int threads = -1;
};

struct SweepOptions {
  CommonOptions common;
  std::string grid;
};

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  return kDefaultOutDir;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  }
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  body(os);
  os.flush();
  if (!os) throw IoError("write to " + path.string() + " failed");
}

io::ScenarioDocument load_with_overrides(const CommonOptions& opts) {
  io::ScenarioDocument doc = io::read_document(opts.scenario);
  for (const std::string& s : opts.sets) io::apply_override(doc, s);
  return doc;
}

std::string format_vector(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) s += ", ";
    s += csv::format_number(v[i]);
  }
  return s + "]";
}

io::Json string_array(const std::vector<std::string>& v) {
  io::Json a = io::Json::array();
  for (const std::string& s : v) a.push_back(s);
  return a;
}

void write_manifest(const fs::path& path, const std::string& command, const ScenarioConfig& cfg,
                    const std::vector<std::string>& variants, const std::vector<std::string>& outputs) {
  io::Json m = io::Json::object();
  m["tool"] = "netopt";
  m["version"] = NETOPT_VERSION;
  m["command"] = command;
  m["kernels"] = kernels::active().name;
  io::Json seeds = io::Json::array();
  for (int i = 0; i < cfg.runs; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
  m["seeds"] = std::move(seeds);
  m["variants"] = string_array(variants);
  m["outputs"] = string_array(outputs);
  m["scenario"] = io::to_json(cfg);
  write_file(path, [&](std::ostream& os) { os << m.dump(2) << '\n'; });
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& out) {
  io::ScenarioDocument doc = load_with_overrides(opts.common);
  if (opts.runs > 0) io::set_value(doc, "runs", opts.runs);
  if (opts.seed >= 0) io::set_value(doc, "seed", opts.seed);
  if (opts.v > 0.0) io::set_value(doc, "system.V", opts.v);
  if (opts.threads >= 0) io::set_value(doc, "threads", opts.threads);
  if (opts.no_zero_shot) io::set_value(doc, "zero_shot", false);
  const ScenarioConfig cfg = io::resolve(doc);

  const fs::path dir = output_dir(opts.common.out_dir);
  ensure_dir(dir);
  std::vector<std::string> variants;
  if (cfg.zero_shot) variants.emplace_back("zeroshot");
  variants.emplace_back("baseline");

  std::vector<std::string> outputs;
  const auto emit = [&](const std::string& file, const std::function<void(std::ostream&)>& body) {
    write_file(dir / file, body);
    outputs.push_back(file);
  };

  for (const std::string& variant : variants) {
    ScenarioConfig run_cfg = cfg;
    run_cfg.zero_shot = variant == "zeroshot";
    const MonteCarloResult mc = monte_carlo(run_cfg);
    const std::string stem = cfg.name + "_" + variant;
    emit(stem + ".csv", [&](std::ostream& os) { csv::write_runs(os, mc.runs); });
    if (cfg.problem == ProblemKind::primal2) {
      emit(stem + "_users.csv", [&](std::ostream& os) { csv::write_users(os, mc.runs.front(), 0); });
    }
    emit(stem + "_events.csv", [&](std::ostream& os) { csv::write_events(os, mc.runs.front(), 0); });
    if (cfg.runs > 1) {
      emit(stem + "_aggregate.csv",
           [&](std::ostream& os) { csv::write_aggregate(os, cfg.problem, mc); });
    }

    out << variant << ": " << cfg.runs << " run(s), horizon " << cfg.horizon << "\n";
    for (const EventOutcome& e : mc.runs.front().events) {
      out << "  t=" << e.at << " " << e.kind;
      if (e.estimate) {
        out << "  " << to_string(e.estimate->source) << " estimate "
            << format_vector(e.estimate->lambda);
        if (e.estimate->regularized) out << " (ridge, rcond " << e.estimate->rcond << ")";
      }
      if (e.convergence) {
        out << "  demand within 1% after " << e.convergence->rounds << " round(s)"
            << (e.convergence->converged ? "" : " (not reached)");
      }
      out << "\n";
    }
  }
  const std::string manifest = cfg.name + "_manifest.json";
  outputs.push_back(manifest);
  write_manifest(dir / manifest, "simulate", cfg, variants, outputs);
  out << "wrote " << outputs.size() << " file(s) to " << dir.string() << "\n";
  return ok;
}

struct Grid {
  std::string key;
  std::vector<double> values;
};

Grid parse_grid(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ScenarioError("--grid must look like key=start:stop:step or key=v1,v2,...");
  }
  Grid g{text.substr(0, eq), {}};
  const std::string spec = text.substr(eq + 1);
  const auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ScenarioError("--grid value '" + s + "' is not a number");
    }
  };
  if (spec.find(':') != std::string::npos) {
    const auto c1 = spec.find(':');
    const auto c2 = spec.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ScenarioError("--grid range needs start:stop:step");
    const double start = number(spec.substr(0, c1));
    const double stop = number(spec.substr(c1 + 1, c2 - c1 - 1));
    const double step = number(spec.substr(c2 + 1));
    if (!(step > 0.0)) throw ScenarioError("--grid step must be positive");
    for (std::int64_t k = 0; start + static_cast<double>(k) * step <= stop + 1e-9 * step; ++k) {
      g.values.push_back(start + static_cast<double>(k) * step);
    }
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const auto comma = spec.find(',', pos);
      const std::string item = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      g.values.push_back(number(item));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  if (g.values.empty()) throw ScenarioError("--grid is empty");
  return g;
}

io::Json grid_value(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return static_cast<std::int64_t>(v);
  return v;
}

int cmd_sweep(const SweepOptions& opts, std::ostream& out) {
  const io::ScenarioDocument doc = load_with_overrides(opts.common);
  const ScenarioConfig base = io::resolve(doc);
  if (base.problem != ProblemKind::primal1) {
    throw ScenarioError("sweep measures demand convergence and needs a primal1 scenario");
  }
  Grid grid;
  if (!opts.grid.empty()) {
    grid = parse_grid(opts.grid);
  } else if (base.sweep) {
    grid = {base.sweep->key, base.sweep->values};
  } else {
    throw ScenarioError("no grid: pass --grid or give the scenario a 'sweep' section");
  }
  const double band = base.sweep ? base.sweep->band : 0.01;
  const bool sustained = base.sweep && base.sweep->sustained;

  std::vector<csv::SweepRow> rows;
  for (double z : grid.values) {
    io::ScenarioDocument point = doc;
    io::set_value(point, grid.key, grid_value(z));
    ScenarioConfig cfg = io::resolve(point);
    if (cfg.events.empty()) throw ScenarioError("sweep scenario has no event to time");
    cfg.sweep = SweepConfig{grid.key, {z}, band, sustained};
    cfg.runs = 1;
    csv::SweepRow row{z, 0, 0};
    for (bool zero_shot : {true, false}) {
      cfg.zero_shot = zero_shot;
      const RunResult r = run_primal1(cfg);
      const std::int64_t rounds = r.events.front().convergence->rounds;
      (zero_shot ? row.zero_shot : row.baseline) = rounds;
    }
    rows.push_back(row);
  }

  const fs::path dir = output_dir(opts.common.out_dir);
  ensure_dir(dir);
  const std::string file = base.name + "_sweep.csv";
  write_file(dir / file, [&](std::ostream& os) { csv::write_sweep(os, rows); });
  write_manifest(dir / (base.name + "_sweep_manifest.json"), "sweep", base, {"zeroshot", "baseline"},
                 {file});

  out << std::setw(10) << grid.key.substr(grid.key.rfind('.') + 1) << std::setw(12) << "zero-shot"
      << std::setw(12) << "baseline" << "\n";
  for (const csv::SweepRow& r : rows) {
    out << std::setw(10) << csv::format_number(r.z) << std::setw(12) << r.zero_shot << std::setw(12)
        << r.baseline << "\n";
  }
  out << "wrote " << (dir / file).string() << "\n";
  return ok;
}

int cmd_oracle(const CommonOptions& opts, std::ostream& out) {
  const ScenarioConfig cfg = io::resolve(load_with_overrides(opts));
  std::vector<csv::OracleRow> rows;

  const auto report = [&](std::size_t epoch, std::int64_t start, const std::string& kind) {
    out << "epoch " << epoch << " (from t=" << start << ", " << kind << ")\n";
  };

  if (cfg.problem == ProblemKind::primal1) {
    RateSystem sys = cfg.primal1.system;
    for (std::size_t epoch = 0; epoch <= cfg.events.size(); ++epoch) {
      const std::int64_t start = epoch == 0 ? 1 : cfg.events[epoch - 1].at + 1;
      const std::string kind = epoch == 0 ? "initial" : event_name(cfg.events[epoch - 1].kind);
      if (epoch > 0) apply_event(sys, cfg.events[epoch - 1].kind);
      const primal1::OracleResult r = primal1::oracle_lambda(sys);
      double utility = 0.0;
      for (const RateUser& u : sys.users) {
        utility += u.utility.value(primal1::best_response(u.utility, r.lambda * u.p));
      }
      rows.push_back({epoch, start, kind, std::nullopt, r.lambda, r.residual, utility});
      report(epoch, start, kind);
      out << "  lambda* = " << csv::format_number(r.lambda) << "  relative demand residual "
          << csv::format_number(r.residual) << "  total utility " << csv::format_number(utility) << "\n";
    }
  } else {
    StochasticSystem sys = cfg.primal2.system;
    for (std::size_t epoch = 0; epoch <= cfg.events.size(); ++epoch) {
      const std::int64_t start = epoch == 0 ? 1 : cfg.events[epoch - 1].at + 1;
      const std::string kind = epoch == 0 ? "initial" : event_name(cfg.events[epoch - 1].kind);
      if (epoch > 0) apply_event(sys, cfg.events[epoch - 1].kind);
      const primal2::OracleResult r = primal2::dual2_oracle(sys);
      const double objective = primal2::mean_penalty(sys.penalty, sys.f, r.lambda, sys.V);
      for (std::size_t i = 0; i < sys.size(); ++i) {
        rows.push_back({epoch, start, kind, sys.ids[i], r.lambda[static_cast<Eigen::Index>(i)],
                        r.residual, objective});
      }
      report(epoch, start, kind);
      out << "  lambda* = " << format_vector(r.lambda) << "\n  slackness residual "
          << csv::format_number(r.residual) << " (relative to max A)  expected penalty "
          << csv::format_number(objective) << "\n";
    }
  }

  const fs::path dir = output_dir(opts.out_dir);
  ensure_dir(dir);
  const std::string file = cfg.name + "_oracle.csv";
  write_file(dir / file, [&](std::ostream& os) { csv::write_oracle(os, rows); });
  out << "wrote " << (dir / file).string() << "\n";
  return ok;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("scenario", opts.scenario, "Scenario JSON file (or a run manifest)")->required();
  cmd->add_option("--out,-o", opts.out_dir,
                  std::string("Output directory (default $") + kOutDirEnv + " or " + kDefaultOutDir + ")");
  cmd->add_option("--set", opts.sets, "Override a scenario field, key=value (repeatable)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-method network optimization with zero-shot multiplier updates"};
  app.set_version_flag("--version", NETOPT_VERSION);
  app.require_subcommand(1);

  SimulateOptions sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Run a scenario with and without zero-shot updates");
  add_common(simulate, sim.common);
  simulate->add_option("--runs", sim.runs, "Monte Carlo replications")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Base seed; run i uses seed + i")->check(CLI::NonNegativeNumber);
  simulate->add_flag("--no-zero-shot", sim.no_zero_shot, "Run only the baseline policy");
  simulate->add_option("--v", sim.v, "Trade-off constant V for service scenarios")->check(CLI::PositiveNumber);
  simulate->add_option("--threads", sim.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  SweepOptions swp;
  CLI::App* sweep = app.add_subcommand("sweep", "Convergence time after the first event over a parameter grid");
  add_common(sweep, swp.common);
  sweep->add_option("--grid", swp.grid, "key=start:stop:step or key=v1,v2,...");

  CommonOptions orc;
  CLI::App* oracle = app.add_subcommand("oracle", "Exact optimal multipliers for every epoch of a scenario");
  add_common(oracle, orc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : invalid_input;
  }

  try {
    if (*simulate) return cmd_simulate(sim, out);
    if (*sweep) return cmd_sweep(swp, out);
    return cmd_oracle(orc, out);
  } catch (const ScenarioError& e) {
    err << "netopt: invalid scenario: " << e.what() << "\n";
    return invalid_input;
  } catch (const InvalidArgument& e) {
    err << "netopt: invalid input: " << e.what() << "\n";
    return invalid_input;
  } catch (const IoError& e) {
    err << "netopt: " << e.what() << "\n";
    return io_failure;
  } catch (const std::exception& e) {
    err << "netopt: " << e.what() << "\n";
    return runtime_failure;
  }
}

}  // namespace netopt::cli
