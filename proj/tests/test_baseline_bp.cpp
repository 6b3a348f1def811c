#include <algorithm>

#include "doctest.h"
#include "spdl/baseline_bp.hpp"
#include "spdl/simulator.hpp"
#include "spdl/verify.hpp"

using namespace spdl;

namespace {

std::vector<CavRequest> queued(int n) {
  std::vector<CavRequest> q;
  for (int i = 0; i < n; ++i) q.push_back(CavRequest{i + 1, Arm::East, Turn::Through, 10.0 + i, 10.0 + i});
  return q;
}

}  // namespace

TEST_CASE("empty blue queue") {
  const auto r = blue_discharge({}, PhaseWindow{100.0, 15.0}, 2.0);
  CHECK(r.crossings.empty());
  CHECK(r.remaining.empty());
}

TEST_CASE("five queued CAVs leave two seconds apart") {
  const auto r = blue_discharge(queued(5), PhaseWindow{100.0, 15.0}, 2.0);
  REQUIRE(r.crossings.size() == 5u);
  for (int i = 0; i < 5; ++i) {
    CHECK(r.crossings[static_cast<std::size_t>(i)].first == i + 1);
    CHECK(r.crossings[static_cast<std::size_t>(i)].second == doctest::Approx(100.0 + 2.0 * i));
  }
  CHECK(r.remaining.empty());
}

TEST_CASE("ten queued CAVs: eight served, two roll over") {
  const auto r = blue_discharge(queued(10), PhaseWindow{100.0, 15.0}, 2.0);
  CHECK(r.crossings.size() == 8u);
  CHECK(r.crossings.back().second == doctest::Approx(114.0));
  REQUIRE(r.remaining.size() == 2u);
  CHECK(r.remaining[0].id == 9);
  CHECK(r.remaining[1].id == 10);
}

TEST_CASE("CAVs join the point queue only after reaching the stop line") {
  std::vector<CavRequest> q{CavRequest{1, Arm::East, Turn::Left, 95.0, 95.0}};
  const auto r = blue_discharge(q, PhaseWindow{100.0, 15.0}, 2.0, 10.0);
  REQUIRE(r.crossings.size() == 1u);
  CHECK(r.crossings[0].second == doctest::Approx(105.0));
  const auto late = blue_discharge(q, PhaseWindow{100.0, 15.0}, 2.0, 30.0);
  CHECK(late.crossings.empty());
  CHECK(late.remaining.size() == 1u);
}

TEST_CASE("blue phases add G_min plus clearance after each barrier") {
  OptimizerContext ctx = small_dp_context(4);
  const BPCyclePlan bp = bp_plan(ctx);
  const auto& tp = ctx.cfg.timing;
  CHECK(bp.blue_steps == 19);
  CHECK(bp.blue_green == doctest::Approx(15.0));
  const SignalPlan& c = bp.cycle();
  const int x = c.barriers[0].steps + c.barriers[1].steps;
  CHECK(c.end_time(tp) - c.start_time == doctest::Approx(x + 38.0));
  CHECK(validate_plan(c, tp, ctx.previous).empty());
  const auto w0 = bp.blue_window(0, tp);
  CHECK(w0.start == doctest::Approx(c.start_time + c.barriers[0].steps));
  CHECK(w0.duration == doctest::Approx(15.0));
  const auto w1 = bp.blue_window(1, tp);
  CHECK(w1.start == doctest::Approx(c.barrier_start(1, tp) + c.barriers[1].steps));
}

TEST_CASE("without CAVs the HV plan matches the plain optimizer objective") {
  OptimizerContext ctx = small_dp_context(6);
  for (auto& q : ctx.cavs) q.clear();
  const BPCyclePlan bp = bp_plan(ctx);
  CHECK(bp.solution.value >= 0.0);
  CHECK(bp.cycle().barriers.size() == 2u);
  CHECK(bp.cycle().extra_steps_after_barrier == 19);
}

TEST_CASE("BP CAV delay does not depend on the acceleration limit") {
  ExperimentConfig cfg;
  cfg.controller = Controller::BP;
  cfg.duration = 400.0;
  const auto first = run_experiment(cfg, 3);
  REQUIRE_FALSE(first.cycles.empty());
  RunOptions opts;
  opts.keep_vehicles = true;
  opts.fixed_cycle = first.cycles.front();
  const auto a = run_experiment(cfg, 3, opts);
  cfg.kin.a_up = 3.0;
  const auto b = run_experiment(cfg, 3, opts);
  auto cav_exits = [](const RunResult& r) {
    std::vector<std::pair<int, double>> out;
    for (const auto& v : r.vehicles)
      if (v.kind == VehicleKind::CAV && v.movement != 0) out.emplace_back(v.id, v.exit);
    return out;
  };
  const auto ea = cav_exits(a);
  const auto eb = cav_exits(b);
  REQUIRE(ea.size() == eb.size());
  REQUIRE_FALSE(ea.empty());
  for (std::size_t i = 0; i < ea.size(); ++i) {
    CHECK(ea[i].first == eb[i].first);
    if (ea[i].second == ea[i].second || eb[i].second == eb[i].second) CHECK(ea[i].second == eb[i].second);
  }
  CHECK(a.metrics.cav.mean_delay == b.metrics.cav.mean_delay);
}
