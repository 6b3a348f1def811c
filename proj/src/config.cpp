#include "spdl/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace spdl {

using nlohmann::json;

const char* to_string(Controller c) {
  switch (c) {
    case Controller::SPDL: return "SPDL";
    case Controller::SPDLNoBuffer: return "SPDL-no-buffer";
    case Controller::BP: return "BP";
  }
  return "?";
}

const char* to_string(ArrivalProcess p) { return p == ArrivalProcess::Uniform ? "uniform" : "poisson"; }

Controller parse_controller(const std::string& s) {
  if (s == "SPDL") return Controller::SPDL;
  if (s == "SPDL-no-buffer" || s == "SPDL_NB" || s == "extended") return Controller::SPDLNoBuffer;
  if (s == "BP") return Controller::BP;
  throw ConfigError("unknown controller '" + s + "' (expected SPDL, SPDL-no-buffer, BP)");
}

ArrivalProcess parse_arrival_process(const std::string& s) {
  if (s == "uniform") return ArrivalProcess::Uniform;
  if (s == "poisson" || s == "Poisson") return ArrivalProcess::Poisson;
  throw ConfigError("unknown arrival process '" + s + "' (expected uniform, poisson)");
}

void DemandSpec::validate() const {
  if (base_rate_per_arm < 0 || demand_factor < 0) throw ConfigError("demand rates must be non-negative");
  if (left_share < 0 || through_share < 0 || right_share < 0) throw ConfigError("turn shares must be non-negative");
  if (std::abs(left_share + through_share + right_share - 1.0) > 1e-9)
    throw ConfigError("turn shares must sum to 1");
  if (cav_penetration < 0 || cav_penetration > 1) throw ConfigError("cav_penetration must lie in [0, 1]");
}

void ExperimentConfig::validate() const {
  timing.validate();
  kin.validate();
  demand.validate();
  if (!(dt_sim > 0)) throw ConfigError("dt_sim must be positive");
  const double ratio = timing.dt / dt_sim;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) throw ConfigError("dt_sim must divide dt");
  if (geometry.jam_plus_length <= 0 || geometry.vehicle_length <= 0 ||
      geometry.vehicle_length > geometry.jam_plus_length)
    throw ConfigError("vehicle_length must lie in (0, jam_plus_length]");
  if (geometry.buffer_length < 0) throw ConfigError("buffer_length must be non-negative");
  if (saturation_left <= 0 || saturation_through <= 0) throw ConfigError("saturation flows must be positive");
  if (tau_hv < 0 || tau_cav < 0) throw ConfigError("reaction times must be non-negative");
  if (prediction_horizon <= 0) throw ConfigError("prediction_horizon must be positive");
  if (tail_cap < 2) throw ConfigError("tail_cap must be at least 2");
  if (max_platoon < 1) throw ConfigError("max_platoon must be positive");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (warmup < 0 || duration <= warmup) throw ConfigError("duration must exceed warmup");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (bp_headway <= 0) throw ConfigError("bp_headway must be positive");
}

namespace {

json grid_to_json(const std::array<std::array<double, 2>, 2>& g) {
  if (g[0][0] == g[0][1] && g[0][0] == g[1][0] && g[0][0] == g[1][1]) return g[0][0];
  return json::array({json::array({g[0][0], g[0][1]}), json::array({g[1][0], g[1][1]})});
}

std::array<std::array<double, 2>, 2> grid_from_json(const json& j) {
  std::array<std::array<double, 2>, 2> g{};
  if (j.is_number()) {
    for (auto& r : g) r.fill(j.get<double>());
    return g;
  }
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected a number or a 2x2 [ring][phase] array");
  for (std::size_t r = 0; r < 2; ++r) {
    if (!j[r].is_array() || j[r].size() != 2) throw ConfigError("expected a 2x2 [ring][phase] array");
    for (std::size_t p = 0; p < 2; ++p) g[r][p] = j[r][p].get<double>();
  }
  return g;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["timing"] = {{"g_min", grid_to_json(c.timing.g_min)},
                 {"g_max", grid_to_json(c.timing.g_max)},
                 {"green_interval", grid_to_json(c.timing.green_interval)},
                 {"all_red", c.timing.all_red},
                 {"dt", c.timing.dt}};
  j["kinematics"] = {{"v_max", c.kin.v_max},
                     {"a_up", c.kin.a_up},
                     {"a_low_mag", c.kin.a_low_mag},
                     {"v0_low", c.kin.v0_low},
                     {"v0_up", c.kin.v0_up},
                     {"passing_zone_length", c.kin.passing_zone_length}};
  j["geometry"] = {{"buffer_length", c.geometry.buffer_length},
                   {"box_through", c.geometry.box_through},
                   {"box_left", c.geometry.box_left},
                   {"box_right", c.geometry.box_right},
                   {"vehicle_length", c.geometry.vehicle_length},
                   {"jam_plus_length", c.geometry.jam_plus_length}};
  j["vehicles"] = {{"tau_hv", c.tau_hv},
                   {"tau_cav", c.tau_cav},
                   {"saturation_left", c.saturation_left},
                   {"saturation_through", c.saturation_through}};
  j["demand"] = {{"base_rate_per_arm", c.demand.base_rate_per_arm},
                 {"demand_factor", c.demand.demand_factor},
                 {"left_share", c.demand.left_share},
                 {"through_share", c.demand.through_share},
                 {"right_share", c.demand.right_share},
                 {"cav_penetration", c.demand.cav_penetration},
                 {"arrival_process", to_string(c.demand.process)}};
  j["optimizer"] = {{"prediction_horizon", c.prediction_horizon},
                    {"tail_cap", c.tail_cap},
                    {"discharge_tol", c.discharge_tol},
                    {"max_platoon", c.max_platoon},
                    {"workers", c.workers}};
  j["simulation"] = {{"dt_sim", c.dt_sim},
                     {"warmup", c.warmup},
                     {"duration", c.duration},
                     {"seeds", c.seeds},
                     {"controller", to_string(c.controller)},
                     {"solve_budget", c.solve_budget}};
  j["bp"] = {{"headway", c.bp_headway}};
  return j;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  const auto& t = j.at("timing");
  c.timing.g_min = grid_from_json(t.at("g_min"));
  c.timing.g_max = grid_from_json(t.at("g_max"));
  c.timing.green_interval = grid_from_json(t.at("green_interval"));
  c.timing.all_red = t.at("all_red").get<double>();
  c.timing.dt = t.at("dt").get<double>();
  const auto& k = j.at("kinematics");
  c.kin.v_max = k.at("v_max").get<double>();
  c.kin.a_up = k.at("a_up").get<double>();
  c.kin.a_low_mag = k.at("a_low_mag").get<double>();
  c.kin.v0_low = k.at("v0_low").get<double>();
  c.kin.v0_up = k.at("v0_up").get<double>();
  c.kin.passing_zone_length = k.at("passing_zone_length").get<double>();
  const auto& g = j.at("geometry");
  c.geometry.buffer_length = g.at("buffer_length").get<double>();
  c.geometry.box_through = g.at("box_through").get<double>();
  c.geometry.box_left = g.at("box_left").get<double>();
  c.geometry.box_right = g.at("box_right").get<double>();
  c.geometry.vehicle_length = g.at("vehicle_length").get<double>();
  c.geometry.jam_plus_length = g.at("jam_plus_length").get<double>();
  const auto& v = j.at("vehicles");
  c.tau_hv = v.at("tau_hv").get<double>();
  c.tau_cav = v.at("tau_cav").get<double>();
  c.saturation_left = v.at("saturation_left").get<double>();
  c.saturation_through = v.at("saturation_through").get<double>();
  const auto& d = j.at("demand");
  c.demand.base_rate_per_arm = d.at("base_rate_per_arm").get<double>();
  c.demand.demand_factor = d.at("demand_factor").get<double>();
  c.demand.left_share = d.at("left_share").get<double>();
  c.demand.through_share = d.at("through_share").get<double>();
  c.demand.right_share = d.at("right_share").get<double>();
  c.demand.cav_penetration = d.at("cav_penetration").get<double>();
  c.demand.process = parse_arrival_process(d.at("arrival_process").get<std::string>());
  const auto& o = j.at("optimizer");
  c.prediction_horizon = o.at("prediction_horizon").get<double>();
  c.tail_cap = o.at("tail_cap").get<int>();
  c.discharge_tol = o.at("discharge_tol").get<double>();
  c.max_platoon = o.at("max_platoon").get<int>();
  c.workers = o.at("workers").get<int>();
  const auto& s = j.at("simulation");
  c.dt_sim = s.at("dt_sim").get<double>();
  c.warmup = s.at("warmup").get<double>();
  c.duration = s.at("duration").get<double>();
  c.seeds = s.at("seeds").get<std::vector<std::uint64_t>>();
  c.controller = parse_controller(s.at("controller").get<std::string>());
  c.solve_budget = s.at("solve_budget").get<double>();
  c.bp_headway = j.at("bp").at("headway").get<double>();
  return c;
}

void check_known_keys(const json& user, const json& defaults, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("section '" + prefix + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown configuration key '" + name + "'");
    if (defaults[it.key()].is_object()) check_known_keys(it.value(), defaults[it.key()], name);
  }
}

ExperimentConfig merged(const ExperimentConfig& base, const json& patch) {
  json d = to_json(base);
  check_known_keys(patch, d, "");
  d.merge_patch(patch);
  try {
    ExperimentConfig c = from_json(d);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed configuration value: ") + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json user;
  try {
    user = json::parse(json_text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  return merged(ExperimentConfig{}, user);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json patch;
  patch[section][key] = value;
  cfg = merged(cfg, patch);
}

std::string dump_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

}  // namespace spdl
