#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "spdl/domain.hpp"

namespace spdl {

/// Fluid HV queue per signalized movement (index = movement id - 1), vehicles.
using QueueState = std::array<double, 8>;

/// Arrival/saturation data per movement, in vehicles per signal step.
///
/// `arrival[m][k]` is the arrival in step t0 + k + 1; entries past the end of
/// the series are zero (the prediction horizon has ended).
struct MovementFlowProfile {
  std::array<std::vector<double>, 8> arrival;
  std::array<double, 8> saturation{};
  QueueState initial{};

  [[nodiscard]] double arrival_at(int movement_id, int step_index) const {
    const auto& s = arrival[static_cast<std::size_t>(movement_id - 1)];
    return step_index >= 0 && static_cast<std::size_t>(step_index) < s.size()
               ? s[static_cast<std::size_t>(step_index)]
               : 0.0;
  }
  /// Constant predicted rates (veh/h) over `horizon_steps`; saturation in veh/h.
  static MovementFlowProfile constant(const std::array<double, 8>& rate_vph,
                                      const std::array<double, 8>& saturation_vph, int horizon_steps,
                                      double dt, const QueueState& initial = {});
};

/// veh/h -> veh per step.
inline double per_step(double vph, double dt) { return vph * dt / 3600.0; }

struct SlotRates {
  std::array<std::array<std::vector<double>, 2>, 2> arrival;  // [ring-1][phase-1]
  std::array<std::array<double, 2>, 2> saturation{};
};

/// Per-slot arrival series and saturation rate implied by an assignment over
/// `steps` steps starting at `first_step`.
SlotRates slot_rates(const PhaseAssignment& a, const MovementFlowProfile& profile, int first_step, int steps);

struct BarrierQueueResult {
  double delay = 0.0;                                // veh*s, all 8 movements
  std::array<std::array<double, 2>, 2> slot_delay{};  // served slots only
  QueueState final{};
  QueueState arrivals{};    // total arrivals per movement over the barrier
  QueueState departures{};  // total departures per movement over the barrier
  std::vector<QueueState> trace;  // queue after each step, when requested
};

/// Evolves all movement queues through one barrier group of `steps` steps that
/// begins `first_step` steps after t0, followed by `trailing_red_steps` steps
/// in which no HV movement is served. Throws ConstraintError if the
/// assignment's greens and intervals do not add up to `steps` in each ring.
BarrierQueueResult evolve_barrier(const PhaseAssignment& a, int steps, const QueueState& initial,
                                  const MovementFlowProfile& profile, int first_step, const TimingParams& tp,
                                  int trailing_red_steps = 0, bool keep_trace = false);

/// Writes "step,q1,...,q8" rows.
void write_queue_trace_csv(std::ostream& os, const std::vector<QueueState>& trace, int first_step);

}  // namespace spdl
