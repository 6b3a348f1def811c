#include "spdl/baseline_bp.hpp"

#include <algorithm>
#include <limits>

namespace spdl {

PhaseWindow BPCyclePlan::blue_window(std::size_t j, const TimingParams& tp) const {
  const SignalPlan& c = cycle();
  const double end = c.barrier_start(j, tp) + c.barriers.at(j).steps * tp.dt;
  return {end, blue_green};
}

BPCyclePlan bp_plan(OptimizerContext ctx) {
  ctx.blue_phase = true;
  BPCyclePlan p;
  p.solution = solve_cycle(ctx);
  p.blue_steps = ctx.blue_steps();
  p.blue_green = ctx.cfg.timing.g_min[0][0];
  return p;
}

BlueDischargeResult blue_discharge(const std::vector<CavRequest>& queue, const PhaseWindow& blue, double headway,
                                   double to_stop_line) {
  BlueDischargeResult r;
  double prev = -std::numeric_limits<double>::infinity();
  bool closed = false;
  for (const auto& c : queue) {
    if (!closed) {
      const double t = std::max({blue.start, c.arrival + to_stop_line, prev + headway});
      if (t - blue.start <= blue.duration + 1e-9) {
        r.crossings.emplace_back(c.id, t);
        prev = t;
        continue;
      }
      closed = true;
    }
    r.remaining.push_back(c);
  }
  return r;
}

}  // namespace spdl
