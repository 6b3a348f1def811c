#include "spdl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "spdl/verify.hpp"

namespace spdl {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::DemandFactor: return "demand_factor";
    case SweepAxis::CavPenetration: return "cav_penetration";
    case SweepAxis::LeftTurnShare: return "left_turn_share";
  }
  return "?";
}

SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep must look like axis=lo:hi:step, got '" + text + "'");
  const std::string name = text.substr(0, eq);
  const std::string range = text.substr(eq + 1);
  SweepSpec s;
  if (name == "demand_factor")
    s.axis = SweepAxis::DemandFactor;
  else if (name == "cav_penetration")
    s.axis = SweepAxis::CavPenetration;
  else if (name == "left_turn_share")
    s.axis = SweepAxis::LeftTurnShare;
  else
    throw ConfigError("unknown sweep axis '" + name + "' (expected demand_factor, cav_penetration, left_turn_share)");

  const auto parts = split(range, ':');
  if (parts.size() == 3) {
    const double lo = parse_number(parts[0]);
    const double hi = parse_number(parts[1]);
    const double step = parse_number(parts[2]);
    if (!(step > 0.0) || hi < lo) throw ConfigError("sweep range needs lo <= hi and step > 0");
    const long n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) s.values.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
  } else if (parts.size() == 1) {
    for (const auto& v : split(range, ',')) s.values.push_back(parse_number(v));
  } else {
    throw ConfigError("sweep values must be lo:hi:step or a comma list, got '" + range + "'");
  }
  if (s.values.empty()) throw ConfigError("sweep '" + text + "' has no values");
  for (double v : s.values) {
    if (s.axis == SweepAxis::DemandFactor && !(v > 0.0)) throw ConfigError("demand factor must be positive");
    if (s.axis != SweepAxis::DemandFactor && (v < 0.0 || v > 1.0))
      throw ConfigError(std::string(to_string(s.axis)) + " values must lie in [0, 1]");
  }
  return s;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  auto one = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("bad seed '" + s + "'");
    return static_cast<std::uint64_t>(std::stoull(s));
  };
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto lo = one(text.substr(0, dots));
    const auto hi = one(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("seed range '" + text + "' is empty");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  } else {
    for (const auto& s : split(text, ',')) out.push_back(one(s));
  }
  if (out.empty()) throw ConfigError("no seeds given");
  return out;
}

std::vector<Controller> parse_controllers(const std::string& text) {
  std::vector<Controller> out;
  for (const auto& s : split(text, ',')) out.push_back(parse_controller(s));
  if (out.empty()) throw ConfigError("no controllers given");
  return out;
}

void apply_axis(ExperimentConfig& cfg, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::DemandFactor:
      cfg.demand.demand_factor = value;
      break;
    case SweepAxis::CavPenetration:
      cfg.demand.cav_penetration = value;
      break;
    case SweepAxis::LeftTurnShare: {
      const double rest = 1.0 - cfg.demand.right_share;
      cfg.demand.left_share = rest * value;
      cfg.demand.through_share = rest - cfg.demand.left_share;
      break;
    }
  }
}

std::vector<RunCell> expand_cells(const RunRequest& req) {
  std::vector<RunCell> cells;
  std::vector<double> values{0.0};
  if (req.sweep) values = req.sweep->values;
  for (double value : values)
    for (Controller c : req.controllers)
      for (std::uint64_t seed : req.seeds) {
        RunCell cell;
        cell.axis_value = value;
        cell.controller = c;
        cell.seed = seed;
        cell.cfg = req.cfg;
        cell.cfg.controller = c;
        if (req.sweep) apply_axis(cell.cfg, req.sweep->axis, value);
        cell.cfg.validate();
        cells.push_back(std::move(cell));
      }
  return cells;
}

std::vector<RunResult> run_cells(const std::vector<RunCell>& cells, const RunRequest& req) {
  std::vector<RunResult> results(cells.size());
  RunOptions opts;
  opts.keep_vehicles = req.keep_vehicles;
  opts.keep_trajectories = req.keep_trajectories;
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = run_experiment(cells[i].cfg, cells[i].seed, opts);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(req.jobs, static_cast<int>(cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return results;
}

// ---- CSV / JSON ------------------------------------------------------------

void write_config_comment(std::ostream& os, const ExperimentConfig& cfg, const std::string& extra) {
  os << "# spdl resolved configuration\n";
  std::stringstream ss(dump_config(cfg));
  std::string line;
  while (std::getline(ss, line)) os << "# " << line << '\n';
  if (!extra.empty()) {
    std::stringstream es(extra);
    while (std::getline(es, line)) os << "# " << line << '\n';
  }
}

namespace {

void class_columns(std::vector<std::string>& cols, const std::string& prefix) {
  for (const char* f : {"exited", "throughput", "delay_samples", "mean_delay"}) cols.push_back(prefix + "_" + f);
}

void class_values(std::vector<std::string>& vals, const ClassMetrics& c) {
  vals.push_back(std::to_string(c.exited));
  vals.push_back(num(c.throughput));
  vals.push_back(std::to_string(c.delay_samples));
  vals.push_back(num(c.mean_delay));
}

void write_line(std::ostream& os, const std::vector<std::string>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << '\n';
}

std::vector<std::string> metrics_values(const MetricsReport& m) {
  std::vector<std::string> v{std::to_string(m.seed),  to_string(m.controller), num(m.demand_factor),
                             num(m.cav_penetration), num(m.left_share),       to_string(m.process)};
  class_values(v, m.all);
  class_values(v, m.hv);
  class_values(v, m.cav);
  for (const auto& c : m.movement) class_values(v, c);
  v.push_back(std::to_string(m.generated));
  v.push_back(std::to_string(m.exited));
  v.push_back(std::to_string(m.in_system));
  v.push_back(num(m.demand_vph));
  const auto& i = m.integrity;
  for (long x : {i.collisions, i.red_light_crossings, i.planned_cav_stops, i.plan_violations, i.clamped_leader_steps,
                 i.fallback_solves, i.residual_solves, i.solves, i.entry_speed_warnings})
    v.push_back(std::to_string(x));
  return v;
}

std::vector<std::string> key_values(const MetricsReport& m) {
  return {std::to_string(m.seed), to_string(m.controller), num(m.demand_factor), num(m.cav_penetration),
          num(m.left_share)};
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c{"seed", "controller", "demand_factor", "cav_penetration", "left_share",
                               "arrival_process"};
    class_columns(c, "all");
    class_columns(c, "hv");
    class_columns(c, "cav");
    class_columns(c, "right");
    for (int m = 1; m <= 8; ++m) class_columns(c, "m" + std::to_string(m));
    for (const char* f : {"generated", "exited", "in_system", "demand_vph", "collisions", "red_light_crossings",
                          "planned_cav_stops", "plan_violations", "clamped_leader_steps", "fallback_solves",
                          "residual_solves", "solves", "entry_speed_warnings"})
      c.emplace_back(f);
    return c;
  }();
  return cols;
}

void write_metrics_header(std::ostream& os) { write_line(os, metrics_columns()); }

void write_metrics_row(std::ostream& os, const MetricsReport& m) { write_line(os, metrics_values(m)); }

void write_vehicles(std::ostream& os, const MetricsReport& m, const std::vector<VehicleRecord>& v, bool header) {
  if (header) os << "seed,controller,demand_factor,cav_penetration,left_share,id,class,arm,turn,movement,arrival,cross,exit,delay\n";
  const auto key = key_values(m);
  for (const auto& r : v) {
    auto row = key;
    row.push_back(std::to_string(r.id));
    row.emplace_back(to_string(r.kind));
    row.emplace_back(to_string(r.arm));
    row.emplace_back(to_string(r.turn));
    row.push_back(std::to_string(r.movement));
    row.push_back(num(r.arrival));
    row.push_back(num(r.cross));
    row.push_back(num(r.exit));
    row.push_back(num(r.delay()));
    write_line(os, row);
  }
}

void write_trajectories(std::ostream& os, const MetricsReport& m, const std::vector<TrajectorySample>& s,
                        bool header) {
  if (header) os << "seed,controller,demand_factor,cav_penetration,left_share,t,id,class,arm,lane,x,v\n";
  const auto key = key_values(m);
  for (const auto& p : s) {
    auto row = key;
    row.push_back(num(p.t));
    row.push_back(std::to_string(p.id));
    row.emplace_back(to_string(p.kind));
    row.emplace_back(to_string(p.arm));
    row.emplace_back(to_string(p.lane));
    row.push_back(num(p.x));
    row.push_back(num(p.v));
    write_line(os, row);
  }
}

std::string metrics_json(const std::vector<MetricsReport>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  const auto& cols = metrics_columns();
  for (const auto& m : rows) {
    const auto vals = metrics_values(m);
    nlohmann::ordered_json o;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i == 1 || i == 5) {
        o[cols[i]] = vals[i];
        continue;
      }
      const double d = std::strtod(vals[i].c_str(), nullptr);
      if (std::isfinite(d))
        o[cols[i]] = nlohmann::ordered_json::parse(vals[i]);
      else
        o[cols[i]] = nullptr;
    }
    arr.push_back(std::move(o));
  }
  return arr.dump(2);
}

// ---- command line ----------------------------------------------------------

namespace {

struct Options {
  std::string config;
  std::string controller;
  std::string controllers;
  std::string seed;
  std::string seeds;
  std::string sweep;
  bool no_buffer = false;
  std::string out;
  std::string json;
  std::string per_vehicle;
  std::string trajectories;
  std::vector<std::string> set;
  int jobs = 1;
  bool print_config = false;
  std::string verify_suite;
  std::uint64_t verify_seed = 1;
};

ExperimentConfig resolve_config(const Options& o) {
  std::string path = o.config;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnv)) path = env;
  }
  ExperimentConfig cfg = (path.empty() || path == "default") ? ExperimentConfig{} : load_config(path);
  for (const auto& s : o.set) apply_override(cfg, s);
  cfg.validate();
  return cfg;
}

int do_verify(const std::string& suite, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  std::vector<std::string> names;
  if (suite == "all")
    names = verify_suite_names();
  else
    names.push_back(suite);
  bool ok = true;
  for (const auto& n : names) {
    VerifyReport r;
    try {
      r = run_verify_suite(n, seed);
    } catch (const std::invalid_argument& e) {
      err << "error: " << e.what() << '\n';
      return 2;
    }
    write_report(out, r);
    ok = ok && r.ok();
  }
  return ok ? 0 : 1;
}

int do_run(const Options& o, std::ostream& out, std::ostream& err) {
  RunRequest req;
  req.cfg = resolve_config(o);
  if (!o.controllers.empty())
    req.controllers = parse_controllers(o.controllers);
  else if (!o.controller.empty())
    req.controllers = parse_controllers(o.controller);
  else
    req.controllers = {req.cfg.controller};
  if (o.no_buffer)
    for (auto& c : req.controllers)
      if (c == Controller::SPDL) c = Controller::SPDLNoBuffer;
  if (!o.seeds.empty())
    req.seeds = parse_seeds(o.seeds);
  else if (!o.seed.empty())
    req.seeds = parse_seeds(o.seed);
  else
    req.seeds = req.cfg.seeds;
  if (!o.sweep.empty()) req.sweep = parse_sweep(o.sweep);
  req.keep_vehicles = !o.per_vehicle.empty();
  req.keep_trajectories = !o.trajectories.empty();
  req.jobs = o.jobs;

  if (o.print_config) {
    out << dump_config(req.cfg) << '\n';
    return 0;
  }

  const auto cells = expand_cells(req);
  const auto results = run_cells(cells, req);

  std::ostringstream extra;
  extra << "controllers:";
  for (auto c : req.controllers) extra << ' ' << to_string(c);
  extra << "\nseeds:";
  for (auto s : req.seeds) extra << ' ' << s;
  if (req.sweep) {
    extra << "\nsweep " << to_string(req.sweep->axis) << ":";
    for (double v : req.sweep->values) extra << ' ' << num(v);
  }

  auto emit = [&](std::ostream& os) {
    write_config_comment(os, req.cfg, extra.str());
    write_metrics_header(os);
    for (const auto& r : results) write_metrics_row(os, r.metrics);
  };
  if (o.out.empty() || o.out == "-") {
    emit(out);
  } else {
    std::ofstream f(o.out);
    if (!f) throw ConfigError("cannot write '" + o.out + "'");
    emit(f);
  }
  if (!o.json.empty()) {
    std::ofstream f(o.json);
    if (!f) throw ConfigError("cannot write '" + o.json + "'");
    std::vector<MetricsReport> rows;
    for (const auto& r : results) rows.push_back(r.metrics);
    f << metrics_json(rows) << '\n';
  }
  if (!o.per_vehicle.empty()) {
    std::ofstream f(o.per_vehicle);
    if (!f) throw ConfigError("cannot write '" + o.per_vehicle + "'");
    write_config_comment(f, req.cfg, extra.str());
    for (std::size_t i = 0; i < results.size(); ++i)
      write_vehicles(f, results[i].metrics, results[i].vehicles, i == 0);
  }
  if (!o.trajectories.empty()) {
    std::ofstream f(o.trajectories);
    if (!f) throw ConfigError("cannot write '" + o.trajectories + "'");
    write_config_comment(f, req.cfg, extra.str());
    for (std::size_t i = 0; i < results.size(); ++i)
      write_trajectories(f, results[i].metrics, results[i].trajectories, i == 0);
  }
  long unclean = 0;
  for (const auto& r : results) unclean += r.metrics.integrity.clean() ? 0 : 1;
  if (unclean > 0) err << "warning: " << unclean << " run(s) reported integrity violations\n";
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shared-phase dedicated-lane signal control: simulation and verification"};
  app.require_subcommand(0, 1);
  Options o;

  app.add_option("--verify", o.verify_suite, "Run a verification suite (or 'all') and exit");

  auto* run = app.add_subcommand("run", "Run experiments and write metrics CSV");
  run->add_option("--config", o.config,
                  std::string("JSON configuration file, or 'default' (env ") + kConfigEnv + ")");
  run->add_option("--controller", o.controller, "SPDL, SPDL-no-buffer or BP");
  run->add_option("--controllers", o.controllers, "Comma-separated controllers");
  run->add_option("--seed", o.seed, "Single seed");
  run->add_option("--seeds", o.seeds, "Seeds as lo..hi or a comma list");
  run->add_option("--sweep", o.sweep, "axis=lo:hi:step (demand_factor, cav_penetration, left_turn_share)");
  run->add_flag("--no-buffer", o.no_buffer, "Use the extended controller without the buffer zone");
  run->add_option("--out", o.out, "Metrics CSV path (default stdout)");
  run->add_option("--json", o.json, "Also write metrics as JSON");
  run->add_option("--per-vehicle", o.per_vehicle, "Per-vehicle CSV path");
  run->add_option("--trajectories", o.trajectories, "Trajectory CSV path (1 s samples)");
  run->add_option("--set", o.set, "Override section.key=value (repeatable)");
  run->add_option("--jobs", o.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  run->add_flag("--print-config", o.print_config, "Print the resolved configuration and exit");

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  std::string suite;
  verify->add_option("suite", suite, "dp-oracle, trajectory-oracle, queue-conservation, appendix-a-bounds or all")
      ->required();
  verify->add_option("--seed", o.verify_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*verify) return do_verify(suite, o.verify_seed, out, err);
    if (!o.verify_suite.empty()) return do_verify(o.verify_suite, o.verify_seed, out, err);
    if (*run) return do_run(o, out, err);
    out << app.help();
    return 0;
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace spdl
