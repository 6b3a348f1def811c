#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spdl/domain.hpp"
#include "spdl/trajectory.hpp"

namespace spdl {

enum class Controller : std::uint8_t { SPDL = 0, SPDLNoBuffer = 1, BP = 2 };
enum class ArrivalProcess : std::uint8_t { Uniform = 0, Poisson = 1 };

const char* to_string(Controller c);
const char* to_string(ArrivalProcess p);
Controller parse_controller(const std::string& s);
ArrivalProcess parse_arrival_process(const std::string& s);

struct DemandSpec {
  double base_rate_per_arm = 900.0;  // veh/h before the demand factor
  double demand_factor = 2.5;
  double left_share = 0.4;
  double through_share = 0.4;
  double right_share = 0.2;
  double cav_penetration = 0.5;
  ArrivalProcess process = ArrivalProcess::Uniform;

  [[nodiscard]] double rate_per_arm() const { return base_rate_per_arm * demand_factor; }
  void validate() const;
};

struct GeometryParams {
  double buffer_length = 200.0;
  double box_through = 30.0;
  double box_left = 25.0;
  double box_right = 15.0;
  double vehicle_length = 4.0;
  double jam_plus_length = 6.0;

  [[nodiscard]] double box_length(Turn t) const {
    return t == Turn::Left ? box_left : t == Turn::Through ? box_through : box_right;
  }
};

/// Every tunable of one experiment. Defaults reproduce the reference setup.
struct ExperimentConfig {
  TimingParams timing = TimingParams::uniform(15.0, 25.0, 4.0, 1.0);
  KinematicParams kin;
  GeometryParams geometry;
  DemandSpec demand;

  double saturation_left = 1550.0;     // veh/h
  double saturation_through = 1650.0;  // veh/h
  double tau_hv = 0.5;
  double tau_cav = 0.0;

  double prediction_horizon = 120.0;  // T, seconds
  int tail_cap = 40;                  // J_max, barriers
  double discharge_tol = 1e-6;        // veh
  int max_platoon = 64;
  int workers = 1;

  double dt_sim = 0.1;
  double warmup = 120.0;
  double duration = 1000.0;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  Controller controller = Controller::SPDL;
  double solve_budget = 30.0;  // wall-clock seconds per rolling-horizon solve

  double bp_headway = 2.0;  // s/veh during blue phases

  [[nodiscard]] bool no_buffer() const { return controller == Controller::SPDLNoBuffer; }
  [[nodiscard]] double saturation(int movement_id) const {
    return movement(movement_id).turn == Turn::Left ? saturation_left : saturation_through;
  }
  [[nodiscard]] FollowParams follow_params(VehicleKind kind) const {
    return FollowParams{kin.v_max, kin.a_up, kin.a_low_mag, geometry.jam_plus_length,
                        kind == VehicleKind::CAV ? tau_cav : tau_hv};
  }
  [[nodiscard]] double free_flow_time(Turn t) const {
    return (geometry.buffer_length + kin.passing_zone_length + geometry.box_length(t)) / kin.v_max;
  }

  /// Throws ConfigError listing the first problem found.
  void validate() const;
};

/// Reads a JSON document of nested sections; missing keys keep defaults,
/// unknown keys are rejected.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
/// Applies "section.key=value" overrides.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace spdl
