#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spdl/config.hpp"
#include "spdl/simulator.hpp"

namespace spdl {

/// Environment variable naming the default configuration file.
inline constexpr const char* kConfigEnv = "SPDL_CONFIG";

enum class SweepAxis : std::uint8_t { DemandFactor = 0, CavPenetration = 1, LeftTurnShare = 2 };
const char* to_string(SweepAxis a);

struct SweepSpec {
  SweepAxis axis = SweepAxis::DemandFactor;
  std::vector<double> values;
};

/// "axis=lo:hi:step" or "axis=v1,v2,...". Throws ConfigError.
SweepSpec parse_sweep(const std::string& text);
/// "1..5", "1,2,7" or "3". Throws ConfigError.
std::vector<std::uint64_t> parse_seeds(const std::string& text);
/// Comma-separated controller names. Throws ConfigError.
std::vector<Controller> parse_controllers(const std::string& text);

/// Sets one sweep coordinate. The left-turn share is the left fraction of
/// non-right traffic; the right share is kept.
void apply_axis(ExperimentConfig& cfg, SweepAxis axis, double value);

struct RunCell {
  double axis_value = 0.0;
  Controller controller = Controller::SPDL;
  std::uint64_t seed = 0;
  ExperimentConfig cfg;
};

struct RunRequest {
  ExperimentConfig cfg;
  std::vector<Controller> controllers;
  std::vector<std::uint64_t> seeds;
  std::optional<SweepSpec> sweep;
  bool keep_vehicles = false;
  bool keep_trajectories = false;
  int jobs = 1;
};

/// Cells in output order: axis value, then controller, then seed.
std::vector<RunCell> expand_cells(const RunRequest& req);

/// Runs every cell; results come back in cell order whatever `jobs` is.
std::vector<RunResult> run_cells(const std::vector<RunCell>& cells, const RunRequest& req);

void write_config_comment(std::ostream& os, const ExperimentConfig& cfg, const std::string& extra = {});
const std::vector<std::string>& metrics_columns();
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsReport& m);
void write_vehicles(std::ostream& os, const MetricsReport& m, const std::vector<VehicleRecord>& v, bool header);
void write_trajectories(std::ostream& os, const MetricsReport& m, const std::vector<TrajectorySample>& s,
                        bool header);
std::string metrics_json(const std::vector<MetricsReport>& rows);

/// Entry point of the command-line tool; returns the process exit code.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace spdl
