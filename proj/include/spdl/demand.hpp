#pragma once

#include <cstdint>
#include <vector>

#include "spdl/config.hpp"
#include "spdl/domain.hpp"

namespace spdl {

struct ArrivalEvent {
  int id = 0;
  double time = 0.0;  // at the upstream end of the buffer zone
  Arm arm = Arm::East;
  Turn turn = Turn::Through;
  VehicleKind kind = VehicleKind::HV;
};

/// Arrivals on [0, horizon) for the twelve (arm, turn) streams, sorted by
/// time then stream, ids assigned in that order. Deterministic in `seed`.
std::vector<ArrivalEvent> generate_demand(const DemandSpec& d, double horizon, std::uint64_t seed);

}  // namespace spdl
