#pragma once

#include <utility>
#include <vector>

#include "spdl/optimizer.hpp"

namespace spdl {

/// Blue-phase benchmark cycle: each HV barrier is followed by a CAV-only
/// blue phase of G_min and its clearance interval.
struct BPCyclePlan {
  CycleSolution solution;  // HV barriers, CAV term omitted
  int blue_steps = 0;      // blue green + clearance, steps
  double blue_green = 0.0; // seconds

  [[nodiscard]] const SignalPlan& cycle() const { return solution.cycle; }
  /// Blue green window following barrier j.
  [[nodiscard]] PhaseWindow blue_window(std::size_t j, const TimingParams& tp) const;
};

BPCyclePlan bp_plan(OptimizerContext ctx);

struct BlueDischargeResult {
  std::vector<std::pair<int, double>> crossings;  // (id, stop-line time)
  std::vector<CavRequest> remaining;              // rolled to the next blue phase
};

/// First-come first-served point-queue discharge of one dedicated lane at
/// `headway` seconds per vehicle. A CAV joins the queue `to_stop_line`
/// seconds after its arrival and may depart at any offset up to the blue
/// duration.
BlueDischargeResult blue_discharge(const std::vector<CavRequest>& queue, const PhaseWindow& blue, double headway,
                                   double to_stop_line = 0.0);

}  // namespace spdl
