#include "spdl/queue_model.hpp"

#include <algorithm>
#include <ostream>

namespace spdl {

MovementFlowProfile MovementFlowProfile::constant(const std::array<double, 8>& rate_vph,
                                                  const std::array<double, 8>& saturation_vph, int horizon_steps,
                                                  double dt, const QueueState& initial) {
  MovementFlowProfile p;
  for (std::size_t m = 0; m < 8; ++m) {
    p.arrival[m].assign(static_cast<std::size_t>(std::max(horizon_steps, 0)), per_step(rate_vph[m], dt));
    p.saturation[m] = per_step(saturation_vph[m], dt);
  }
  p.initial = initial;
  return p;
}

SlotRates slot_rates(const PhaseAssignment& a, const MovementFlowProfile& profile, int first_step, int steps) {
  SlotRates out;
  for (int r = 0; r < 2; ++r) {
    for (int p = 0; p < 2; ++p) {
      const int m = a.movement[r][p];
      out.saturation[r][p] = profile.saturation[static_cast<std::size_t>(m - 1)];
      auto& series = out.arrival[r][p];
      series.resize(static_cast<std::size_t>(steps));
      for (int k = 0; k < steps; ++k) series[static_cast<std::size_t>(k)] = profile.arrival_at(m, first_step + k);
    }
  }
  return out;
}

BarrierQueueResult evolve_barrier(const PhaseAssignment& a, int steps, const QueueState& initial,
                                  const MovementFlowProfile& profile, int first_step, const TimingParams& tp,
                                  int trailing_red_steps, bool keep_trace) {
  // Green window per movement as (lo, hi]: step k of the barrier is served iff lo < k <= hi.
  std::array<int, 8> lo{};
  std::array<int, 8> hi{};
  for (int r = 1; r <= 2; ++r) {
    const int g1 = a.green[r - 1][0];
    const int g2 = a.green[r - 1][1];
    const int r1 = tp.interval_steps(r, 1);
    const int r2 = tp.interval_steps(r, 2);
    if (g1 + r1 + g2 + r2 != steps)
      throw ConstraintError("ring " + std::to_string(r) + " greens and intervals sum to " +
                            std::to_string(g1 + r1 + g2 + r2) + " steps, barrier has " + std::to_string(steps));
    const auto m1 = static_cast<std::size_t>(a.movement[r - 1][0] - 1);
    const auto m2 = static_cast<std::size_t>(a.movement[r - 1][1] - 1);
    lo[m1] = 0;
    hi[m1] = g1;
    lo[m2] = g1 + r1;
    hi[m2] = steps - r2;
  }

  BarrierQueueResult res;
  QueueState l = initial;
  const double dt = tp.dt;
  const int total = steps + trailing_red_steps;
  if (keep_trace) res.trace.reserve(static_cast<std::size_t>(total));
  for (int k = 1; k <= total; ++k) {
    const int idx = first_step + k - 1;
    for (std::size_t m = 0; m < 8; ++m) {
      const double qa = profile.arrival_at(static_cast<int>(m) + 1, idx);
      double qd = 0.0;
      if (k > lo[m] && k <= hi[m]) qd = std::min(profile.saturation[m], l[m] + qa);
      l[m] = std::max(l[m] + qa - qd, 0.0);
      res.arrivals[m] += qa;
      res.departures[m] += qd;
      res.delay += l[m] * dt;
    }
    if (k <= steps) {
      for (int r = 0; r < 2; ++r)
        for (int p = 0; p < 2; ++p)
          res.slot_delay[r][p] += l[static_cast<std::size_t>(a.movement[r][p] - 1)] * dt;
    }
    if (keep_trace) res.trace.push_back(l);
  }
  res.final = l;
  return res;
}

void write_queue_trace_csv(std::ostream& os, const std::vector<QueueState>& trace, int first_step) {
  os << "step";
  for (int m = 1; m <= 8; ++m) os << ",q" << m;
  os << '\n';
  const auto old = os.precision(9);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    os << first_step + static_cast<int>(k) + 1;
    for (double q : trace[k]) os << ',' << q;
    os << '\n';
  }
  os.precision(old);
}

}  // namespace spdl
