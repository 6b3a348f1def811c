#include "doctest.h"
#include "spdl/config.hpp"
#include "spdl/optimizer.hpp"

using namespace spdl;

namespace {

SignalPlan two_barriers(const TimingParams& tp) {
  SignalPlan sp;
  sp.barriers = {{38, enumerate_phase_plans(38, Orientation::EastWest, tp).front()},
                 {38, enumerate_phase_plans(38, Orientation::NorthSouth, tp).front()}};
  return sp;
}

}  // namespace

TEST_CASE("movement table follows the ring layout") {
  for (int m = 1; m <= 8; ++m) {
    const Movement& mv = movement(m);
    CHECK(mv.id == m);
    CHECK(mv.ring() == (m <= 4 ? 1 : 2));
    const bool left = m == 2 || m == 4 || m == 5 || m == 8;
    CHECK((mv.turn == Turn::Left) == left);
    const bool ew = m == 1 || m == 2 || m == 5 || m == 6;
    CHECK((mv.orientation() == Orientation::EastWest) == ew);
    CHECK(movement_id(mv.arm, mv.turn) == m);
  }
  CHECK_THROWS(movement_id(Arm::East, Turn::Right));
  CHECK_FALSE(right_turn(Arm::North).signalized());
}

TEST_CASE("each ring holds one arm's left and the opposing through") {
  for (int r = 1; r <= 2; ++r)
    for (Orientation o : {Orientation::EastWest, Orientation::NorthSouth}) {
      const auto ms = ring_movements(r, o);
      const Movement& a = movement(ms[0]);
      const Movement& b = movement(ms[1]);
      CHECK(a.turn != b.turn);
      CHECK(a.arm != b.arm);
      CHECK(a.orientation() == o);
      CHECK(b.orientation() == o);
    }
}

TEST_CASE("timing conversions") {
  const auto tp = TimingParams::uniform(15, 25, 4, 1);
  CHECK(tp.min_green_steps(1, 2) == 15);
  CHECK(tp.max_green_steps(2, 1) == 25);
  CHECK(tp.interval_steps(1, 1) == 4);
  CHECK(tp.yellow(1, 1) == doctest::Approx(3.0));
  CHECK_THROWS_AS((void)TimingParams::uniform(15, 25, 4, 2).to_steps(15.5), ConfigError);
}

TEST_CASE("a 38 s barrier with 15 s greens and 4 s intervals is valid") {
  const auto tp = TimingParams::uniform(15, 25, 4, 1);
  const auto sp = two_barriers(tp);
  const auto& g = sp.barriers[0].assignment.green;
  CHECK(g[0][0] + g[0][1] + 4 + 4 == 38);
  CHECK(validate_plan(sp, tp).empty());
}

TEST_CASE("duplicate movement in a ring is rejected") {
  const auto tp = TimingParams::uniform(15, 25, 4, 1);
  auto sp = two_barriers(tp);
  auto& mv = sp.barriers[0].assignment.movement;
  mv[0][1] = mv[0][0];
  const auto v = validate_plan(sp, tp);
  REQUIRE_FALSE(v.empty());
  CHECK(v.front().equation == 16);
}

TEST_CASE("two barriers of the same orientation break alternation") {
  const auto tp = TimingParams::uniform(15, 25, 4, 1);
  auto sp = two_barriers(tp);
  sp.barriers[1] = sp.barriers[0];
  const auto v = validate_plan(sp, tp);
  REQUIRE_FALSE(v.empty());
  CHECK(v.front().equation == 20);
}

TEST_CASE("alternation is also checked against the preceding barrier") {
  const auto tp = TimingParams::uniform(15, 25, 4, 1);
  const auto sp = two_barriers(tp);
  CHECK_FALSE(validate_plan(sp, tp, sp.barriers[0].assignment).empty());
  CHECK(validate_plan(sp, tp, sp.barriers[1].assignment).empty());
}

TEST_CASE("green outside its bounds is rejected") {
  const auto tp = TimingParams::uniform(15, 25, 4, 1);
  auto sp = two_barriers(tp);
  sp.barriers[0].assignment.green[0][0] = 14;
  sp.barriers[0].assignment.green[0][1] = 16;
  CHECK_FALSE(validate_plan(sp, tp).empty());
}

TEST_CASE("phase windows inside a plan") {
  const auto tp = TimingParams::uniform(15, 25, 4, 1);
  auto sp = two_barriers(tp);
  sp.start_time = 100.0;
  CHECK(sp.barrier_start(1, tp) == doctest::Approx(138.0));
  CHECK(sp.end_time(tp) == doctest::Approx(176.0));
  const auto w1 = sp.phase_window(0, 1, 1, tp);
  CHECK(w1.start == doctest::Approx(100.0));
  CHECK(w1.duration == doctest::Approx(15.0));
  const auto w2 = sp.phase_window(0, 1, 2, tp);
  CHECK(w2.start == doctest::Approx(119.0));
  const int m = sp.barriers[1].assignment.movement[1][0];
  const auto mw = sp.movement_window(1, m, tp);
  REQUIRE(mw);
  CHECK(mw->start == doctest::Approx(138.0));
  CHECK_FALSE(sp.movement_window(1, sp.barriers[0].assignment.movement[0][0], tp));
}

TEST_CASE("config round trip and validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  const ExperimentConfig back = parse_config(dump_config(c));
  CHECK(dump_config(back) == dump_config(c));
  CHECK_THROWS_AS(parse_config(R"({"timing": {"nope": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  ExperimentConfig d;
  apply_override(d, "demand.demand_factor=1");
  CHECK(d.demand.demand_factor == 1.0);
  CHECK_THROWS_AS(apply_override(d, "demand.cav_penetration=2"), ConfigError);
  CHECK(parse_controller("BP") == Controller::BP);
  CHECK_THROWS_AS(parse_controller("XX"), ConfigError);
}

TEST_CASE("reference demand at factor 1 is 900 veh/h per arm") {
  ExperimentConfig c;
  c.demand.demand_factor = 1.0;
  CHECK(c.demand.rate_per_arm() == doctest::Approx(900.0));
  CHECK(4.0 * c.demand.rate_per_arm() == doctest::Approx(3600.0));
}
