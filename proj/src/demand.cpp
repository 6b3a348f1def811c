#include "spdl/demand.hpp"

#include <algorithm>
#include <random>
#include <tuple>

namespace spdl {

std::vector<ArrivalEvent> generate_demand(const DemandSpec& d, double horizon, std::uint64_t seed) {
  d.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ArrivalEvent> out;
  const std::array<std::pair<Turn, double>, 3> shares{
      {{Turn::Left, d.left_share}, {Turn::Through, d.through_share}, {Turn::Right, d.right_share}}};
  for (Arm arm : kArms) {
    for (const auto& [turn, share] : shares) {
      const double rate = d.rate_per_arm() * share;  // veh/h
      if (rate <= 0.0) continue;
      const double headway = 3600.0 / rate;
      std::exponential_distribution<double> gap(rate / 3600.0);
      double t = d.process == ArrivalProcess::Uniform ? headway * unit(rng) : gap(rng);
      while (t < horizon) {
        ArrivalEvent e;
        e.time = t;
        e.arm = arm;
        e.turn = turn;
        e.kind = unit(rng) < d.cav_penetration ? VehicleKind::CAV : VehicleKind::HV;
        out.push_back(e);
        t += d.process == ArrivalProcess::Uniform ? headway : gap(rng);
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const ArrivalEvent& a, const ArrivalEvent& b) {
    return std::tie(a.time, a.arm, a.turn) < std::tie(b.time, b.arm, b.turn);
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i) + 1;
  return out;
}

}  // namespace spdl
