#include <algorithm>
#include <limits>
#include <set>

#include "doctest.h"
#include "spdl/optimizer.hpp"
#include "spdl/verify.hpp"

using namespace spdl;

namespace {

OptimizerContext empty_context() {
  OptimizerContext ctx = small_dp_context(3);
  for (auto& a : ctx.hv.arrival) std::fill(a.begin(), a.end(), 0.0);
  ctx.hv.initial.fill(0.0);
  for (auto& c : ctx.cavs) c.clear();
  return ctx;
}

double best_stage1_by_enumeration(const OptimizerContext& ctx, int x, Orientation o) {
  ChainCache cache(ctx.cfg, ctx.cfg.max_platoon);
  const PlanningState s0 = initial_state(ctx);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : enumerate_phase_plans(x, o, ctx.cfg.timing))
    best = std::min(best, evaluate_barrier(ctx, BarrierPlan{x, a}, s0, cache).total());
  return best;
}

}  // namespace

TEST_CASE("decision bounds") {
  const auto b = decision_bounds(TimingParams::uniform(15, 25, 4, 1));
  CHECK(b.x_min == 38);
  CHECK(b.x_max == 58);
  const auto b2 = decision_bounds(TimingParams::uniform(15, 25, 4, 2));
  CHECK(b2.x_min == 19);
  CHECK(b2.x_max == 29);
  auto tp = TimingParams::uniform(15, 25, 4, 1);
  tp.g_min[0] = {16.0, 16.0};
  CHECK(decision_bounds(tp).x_min == 40);
}

TEST_CASE("phase plan enumeration") {
  const auto tp = TimingParams::uniform(15, 25, 4, 1);
  const auto p38 = enumerate_phase_plans(38, Orientation::EastWest, tp);
  CHECK(p38.size() == 4u);
  for (const auto& a : p38)
    for (const auto& ring : a.green)
      for (int g : ring) CHECK(g == 15);
  const auto p48 = enumerate_phase_plans(48, Orientation::NorthSouth, tp);
  CHECK(p48.size() == 484u);
  for (const auto& a : p48) {
    CHECK(a.orientation() == Orientation::NorthSouth);
    CHECK(a.green[0][0] + a.green[0][1] == 40);
    CHECK(a.green[1][0] + a.green[1][1] == 40);
  }
  std::set<std::array<int, 4>> seqs;
  for (const auto& a : p48) seqs.insert(a.alpha_key());
  CHECK(seqs.size() == 4u);
}

TEST_CASE("synchronized head-lag enumeration") {
  const auto tp = TimingParams::uniform(15, 25, 4, 1);
  const auto all = enumerate_phase_plans(48, Orientation::EastWest, tp, true);
  REQUIRE_FALSE(all.empty());
  for (const auto& a : all) {
    CHECK(a.green[0] == a.green[1]);
    const Movement& r1 = movement(a.movement[0][0]);
    const Movement& r2 = movement(a.movement[1][0]);
    CHECK(r1.arm == r2.arm);
  }
  CHECK(all.size() < enumerate_phase_plans(48, Orientation::EastWest, tp).size());
}

TEST_CASE("DP state spaces with the default bounds") {
  const OptimizerContext ctx = small_dp_context(11);
  ChainCache cache(ctx.cfg, ctx.cfg.max_platoon);
  const DPTable t = forward_recursion(ctx, cache);
  CHECK(t.stages[0].size() == 1u);
  CHECK(t.stages[1].size() == 21u);
  CHECK(t.stages[2].size() == 41u);
  CHECK(t.stages[1].front().state == 38);
  CHECK(t.stages[1].back().state == 58);
  CHECK(t.stages[2].front().state == 76);
  CHECK(t.stages[2].back().state == 116);
}

TEST_CASE("DP matches exhaustive search") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    const OptimizerContext ctx = small_dp_context(seed);
    const CycleSolution dp = solve_cycle(ctx);
    const CycleSolution bf = brute_force_cycle(ctx);
    CAPTURE(seed);
    CHECK(dp.value == bf.value);
    CHECK(dp.x1 == bf.x1);
    CHECK(dp.x2 == bf.x2);
    CHECK(dp.first.plan == bf.first.plan);
    CHECK(dp.second.plan == bf.second.plan);
  }
}

TEST_CASE("zero demand picks the shortest barriers") {
  const OptimizerContext ctx = empty_context();
  const CycleSolution s = solve_cycle(ctx);
  CHECK(s.value == 0.0);
  CHECK(s.x1 == 38);
  CHECK(s.x2 == 38);
  CHECK(validate_plan(s.cycle, ctx.cfg.timing, ctx.previous).empty());
}

TEST_CASE("a single feasible barrier length gives one state per stage") {
  OptimizerContext ctx = small_dp_context(5);
  ctx.cfg.timing = TimingParams::uniform(15, 15, 4, 1);
  ctx.previous = enumerate_phase_plans(38, ctx.previous.orientation(), ctx.cfg.timing).front();
  ChainCache cache(ctx.cfg, ctx.cfg.max_platoon);
  const DPTable t = forward_recursion(ctx, cache);
  CHECK(t.stages[1].size() == 1u);
  CHECK(t.stages[2].size() == 1u);
  const CycleSolution s = backward_recursion(t, ctx);
  CHECK(s.x1 == 38);
  CHECK(s.x2 == 38);
  CHECK(s.value == doctest::Approx(s.first.value + s.second.value));
}

TEST_CASE("a lone HV queue gets the longest split") {
  OptimizerContext ctx = empty_context();
  const Orientation o = opposite(ctx.previous.orientation());
  const int m = ring_movements(1, o)[0];
  ctx.hv.initial[static_cast<std::size_t>(m - 1)] = 12.0;
  ChainCache cache(ctx.cfg, ctx.cfg.max_platoon);
  const StageEvaluation e = evaluate_stage(ctx, 1, 48, initial_state(ctx), std::nullopt, cache);
  const auto slot = e.plan.assignment.slot_of(m);
  REQUIRE(slot);
  const auto [ring, phase] = *slot;
  CHECK(e.plan.assignment.green[static_cast<std::size_t>(ring - 1)][static_cast<std::size_t>(phase - 1)] == 25);
  CHECK(e.value == doctest::Approx(best_stage1_by_enumeration(ctx, 48, o)));
}

TEST_CASE("a lone CAV is valued at its best-sequence plan delay") {
  OptimizerContext ctx = empty_context();
  const Orientation o = opposite(ctx.previous.orientation());
  const Arm arm = o == Orientation::EastWest ? Arm::West : Arm::North;
  const double arrival = ctx.first_release - 30.0;
  ctx.cavs[static_cast<std::size_t>(arm)].push_back(
      CavRequest{1, arm, Turn::Left, arrival, arrival + ctx.cfg.geometry.buffer_length / ctx.cfg.kin.v_max});
  ChainCache cache(ctx.cfg, ctx.cfg.max_platoon);
  const StageEvaluation e = evaluate_stage(ctx, 1, 38, initial_state(ctx), std::nullopt, cache);
  CHECK(e.hv_delay == 0.0);
  CHECK(e.cav_delay > 0.0);
  CHECK(e.value == doctest::Approx(best_stage1_by_enumeration(ctx, 38, o)));
}
