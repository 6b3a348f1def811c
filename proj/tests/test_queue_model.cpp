#include <random>

#include "doctest.h"
#include "spdl/optimizer.hpp"
#include "spdl/queue_model.hpp"

using namespace spdl;

namespace {

const TimingParams kTp = TimingParams::uniform(15, 25, 4, 1);

MovementFlowProfile single_movement(int m, double arrival, double saturation, double initial, int steps) {
  MovementFlowProfile p;
  for (auto& a : p.arrival) a.assign(static_cast<std::size_t>(steps), 0.0);
  p.arrival[static_cast<std::size_t>(m - 1)].assign(static_cast<std::size_t>(steps), arrival);
  p.saturation.fill(saturation);
  p.initial[static_cast<std::size_t>(m - 1)] = initial;
  return p;
}

}  // namespace

TEST_CASE("saturation flow conversion") {
  CHECK(per_step(1650.0, 1.0) == doctest::Approx(0.4583).epsilon(1e-4));
  CHECK(per_step(1550.0, 2.0) == doctest::Approx(2 * 1550.0 / 3600.0));
}

TEST_CASE("slot rates pick the assigned movement's series") {
  const PhaseAssignment a = enumerate_phase_plans(38, Orientation::NorthSouth, kTp).front();
  const int m = a.movement[0][0];
  const auto p = single_movement(m, 0.1, 0.4583, 0.0, 60);
  const SlotRates r = slot_rates(a, p, 0, 38);
  REQUIRE(r.arrival[0][0].size() == 38u);
  for (double v : r.arrival[0][0]) CHECK(v == 0.1);
  for (double v : r.arrival[1][1]) CHECK(v == 0.0);
  CHECK(r.saturation[0][0] == 0.4583);

  const auto zero = single_movement(m, 0.0, 0.4583, 0.0, 60);
  const SlotRates z = slot_rates(a, zero, 0, 38);
  for (const auto& ring : z.arrival)
    for (const auto& s : ring)
      for (double v : s) CHECK(v == 0.0);
}

TEST_CASE("no arrivals and no queues give no delay") {
  const PhaseAssignment a = enumerate_phase_plans(38, Orientation::EastWest, kTp).front();
  MovementFlowProfile p;
  p.saturation.fill(0.45);
  const auto r = evolve_barrier(a, 38, p.initial, p, 0, kTp);
  CHECK(r.delay == 0.0);
  for (double q : r.final) CHECK(q == 0.0);
}

TEST_CASE("one draining slot follows the step recursion") {
  const PhaseAssignment a = enumerate_phase_plans(38, Orientation::EastWest, kTp).front();
  const int m = a.movement[0][0];
  REQUIRE(a.green[0][0] == 15);
  const double qa = 0.1;
  const double qs = 0.4583;
  const auto p = single_movement(m, qa, qs, 3.0, 60);
  const auto r = evolve_barrier(a, 38, p.initial, p, 0, kTp, 0, true);

  double l = 3.0;
  double delay = 0.0;
  int empty_at = 0;
  for (int k = 1; k <= 38; ++k) {
    const double out = k <= 15 ? std::min(qs, l + qa) : 0.0;
    l = std::max(l + qa - out, 0.0);
    delay += l;
    if (l == 0.0 && empty_at == 0) empty_at = k;
    CHECK(r.trace[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(m - 1)] == doctest::Approx(l));
  }
  CHECK(empty_at == 9);
  CHECK(r.slot_delay[0][0] == doctest::Approx(delay));
  CHECK(r.final[static_cast<std::size_t>(m - 1)] == doctest::Approx(23 * qa));
  CHECK(r.delay == doctest::Approx(delay));
}

TEST_CASE("a slot whose phase has not started only accumulates") {
  const PhaseAssignment a = enumerate_phase_plans(38, Orientation::EastWest, kTp).front();
  const int m = a.movement[0][1];
  const auto p = single_movement(m, 0.1, 0.4583, 2.0, 60);
  const auto r = evolve_barrier(a, 38, p.initial, p, 0, kTp, 0, true);
  const int red = a.green[0][0] + kTp.interval_steps(1, 1);
  for (int k = 1; k <= red; ++k)
    CHECK(r.trace[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(m - 1)] ==
          doctest::Approx(2.0 + 0.1 * k));
}

TEST_CASE("unserved movements grow by their arrivals") {
  const PhaseAssignment a = enumerate_phase_plans(38, Orientation::EastWest, kTp).front();
  const auto p = single_movement(3, 0.25, 0.4583, 1.0, 60);
  const auto r = evolve_barrier(a, 38, p.initial, p, 5, kTp, 7);
  CHECK(r.final[2] == 1.0 + 0.25 * 45);
  CHECK(r.departures[2] == 0.0);
}

TEST_CASE("conservation and chaining are exact with dyadic data") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> arr(0, 32);
  for (int trial = 0; trial < 20; ++trial) {
    MovementFlowProfile p;
    for (auto& s : p.arrival) {
      s.resize(200);
      for (auto& v : s) v = arr(rng) / 64.0;
    }
    for (auto& s : p.saturation) s = (16 + arr(rng)) / 64.0;
    for (auto& q : p.initial) q = arr(rng) / 8.0;
    const auto plans = enumerate_phase_plans(48, Orientation::EastWest, kTp);
    const auto& a = plans[static_cast<std::size_t>(trial) * 17 % plans.size()];
    const auto r = evolve_barrier(a, 48, p.initial, p, 3, kTp, 2);
    for (std::size_t m = 0; m < 8; ++m) CHECK(r.final[m] - p.initial[m] == r.arrivals[m] - r.departures[m]);
    const auto again = evolve_barrier(a, 48, p.initial, p, 3, kTp, 2);
    CHECK(again.final == r.final);
    CHECK(again.delay == r.delay);
    const auto b = enumerate_phase_plans(40, Orientation::NorthSouth, kTp).back();
    const auto r2 = evolve_barrier(b, 40, r.final, p, 53, kTp);
    for (std::size_t m = 0; m < 8; ++m) CHECK(r2.final[m] - r.final[m] == r2.arrivals[m] - r2.departures[m]);
  }
}

TEST_CASE("inconsistent barrier length is rejected") {
  const PhaseAssignment a = enumerate_phase_plans(38, Orientation::EastWest, kTp).front();
  MovementFlowProfile p;
  CHECK_THROWS_AS(evolve_barrier(a, 40, p.initial, p, 0, kTp), ConstraintError);
}
