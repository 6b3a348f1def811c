#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spdl/config.hpp"
#include "spdl/demand.hpp"
#include "spdl/domain.hpp"

namespace spdl {

enum class LaneKind : std::uint8_t { CAV = 0, HVLeft = 1, HVThrough = 2, Right = 3 };
const char* to_string(LaneKind k);

/// Outcome of one vehicle; times are NaN until reached.
struct VehicleRecord {
  int id = 0;
  VehicleKind kind = VehicleKind::HV;
  Arm arm = Arm::East;
  Turn turn = Turn::Through;
  int movement = 0;  // 0 for right turns
  double arrival = 0.0;
  double free_flow = 0.0;
  double cross = std::numeric_limits<double>::quiet_NaN();
  double exit = std::numeric_limits<double>::quiet_NaN();

  [[nodiscard]] bool exited_by(double t) const { return exit == exit && exit <= t; }
  [[nodiscard]] double delay() const { return exit - arrival - free_flow; }
};

struct IntegrityReport {
  long collisions = 0;
  long red_light_crossings = 0;
  long planned_cav_stops = 0;
  long plan_violations = 0;
  long clamped_leader_steps = 0;
  long fallback_solves = 0;
  long residual_solves = 0;
  long solves = 0;
  long entry_speed_warnings = 0;
  double max_solve_seconds = 0.0;

  [[nodiscard]] bool clean() const {
    return collisions == 0 && red_light_crossings == 0 && planned_cav_stops == 0 && plan_violations == 0;
  }
};

struct ClassMetrics {
  long exited = 0;          // exits inside the measurement period
  double throughput = 0.0;  // veh/h over the measurement period
  long delay_samples = 0;   // exited vehicles that arrived after warm-up
  double mean_delay = 0.0;  // s/veh
};

struct MetricsReport {
  std::uint64_t seed = 0;
  Controller controller = Controller::SPDL;
  double demand_factor = 0.0;
  double cav_penetration = 0.0;
  double left_share = 0.0;
  ArrivalProcess process = ArrivalProcess::Uniform;
  ClassMetrics all;
  ClassMetrics hv;
  ClassMetrics cav;
  std::array<ClassMetrics, 9> movement;  // [0] right turns, [m] signalized movement m
  long generated = 0;
  long exited = 0;
  long in_system = 0;
  double demand_vph = 0.0;  // arrivals during the measurement period, veh/h
  IntegrityReport integrity;
};

struct TrajectorySample {
  double t = 0.0;
  int id = 0;
  VehicleKind kind = VehicleKind::HV;
  Arm arm = Arm::East;
  LaneKind lane = LaneKind::CAV;
  double x = 0.0;
  double v = 0.0;
};

struct RunOptions {
  bool keep_vehicles = false;
  bool keep_trajectories = false;
  double trajectory_sample = 1.0;  // seconds
  /// Replay this two-barrier cycle instead of optimizing.
  std::optional<SignalPlan> fixed_cycle;
};

struct RunResult {
  MetricsReport metrics;
  std::vector<VehicleRecord> vehicles;
  std::vector<TrajectorySample> trajectories;
  std::vector<SignalPlan> cycles;  // committed cycles in order
};

/// Position and speed of one vehicle currently on a lane (front first).
struct LaneVehicle {
  int id = 0;
  double x = 0.0;
  double v = 0.0;
  bool planned = false;
};

/// Fixed-step microscopic simulation under rolling-horizon control.
class Simulation {
 public:
  Simulation(ExperimentConfig cfg, std::vector<ArrivalEvent> arrivals, std::uint64_t seed, RunOptions opts = {});
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Advances one vehicle step; barrier-boundary control actions run first.
  void step();
  void run_until(double t);
  [[nodiscard]] double clock() const;

  [[nodiscard]] std::vector<LaneVehicle> lane(Arm arm, LaneKind kind) const;
  [[nodiscard]] const IntegrityReport& integrity() const;
  [[nodiscard]] const std::vector<SignalPlan>& cycles() const;
  /// Planned stop-line crossing of a released CAV, if it has one.
  [[nodiscard]] std::optional<double> planned_crossing(int id) const;
  [[nodiscard]] std::optional<TrajectoryPlan> leader_plan(int id) const;

  [[nodiscard]] MetricsReport report() const;
  RunResult finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Generates demand from the config and runs to `cfg.duration`.
RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts = {});

}  // namespace spdl
