#include "spdl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "spdl/trajectory.hpp"

namespace spdl {

namespace {

void fail(VerifyReport& r, const std::string& what) {
  ++r.failures;
  if (r.notes.size() < 10) r.notes.push_back(what);
}

bool plan_preferred(double va, const PhaseAssignment& a, double vb, const PhaseAssignment& b) {
  if (va != vb) return va < vb;
  if (a.alpha_key() != b.alpha_key()) return a.alpha_key() < b.alpha_key();
  if (a.green[0][0] != b.green[0][0]) return a.green[0][0] > b.green[0][0];
  return a.green[1][0] > b.green[1][0];
}

// ---- passing-time bounds by forward integration ---------------------------

/// Time to cover `L` from speed v0 at constant acceleration `a`, speed capped
/// to [0, v_max]; integrates in steps of h and solves the last partial step.
std::optional<double> integrate_to(double L, double v0, double a, double v_max, double h = 0.01) {
  double x = 0.0;
  double v = v0;
  double t = 0.0;
  for (long i = 0; i < 100000000L; ++i) {
    double acc = a;
    if ((a > 0.0 && v >= v_max) || (a < 0.0 && v <= 0.0)) acc = 0.0;
    if (acc == 0.0 && v <= 0.0) return std::nullopt;
    double s = h;
    if (acc > 0.0) s = std::min(s, (v_max - v) / acc);
    if (acc < 0.0) s = std::min(s, v / -acc);
    const double gap = L - x;
    const double reach = v * s + 0.5 * acc * s * s;
    if (reach >= gap) {
      double tau;
      if (acc == 0.0)
        tau = gap / v;
      else if (acc > 0.0)
        tau = (-v + std::sqrt(v * v + 2.0 * acc * gap)) / acc;
      else
        tau = (v - std::sqrt(std::max(v * v + 2.0 * acc * gap, 0.0))) / -acc;
      return t + tau;
    }
    x += reach;
    v += acc * s;
    if (acc > 0.0 && std::abs(v - v_max) < 1e-12) v = v_max;
    if (acc < 0.0 && std::abs(v) < 1e-12) v = 0.0;
    t += s;
  }
  return std::nullopt;
}

// ---- nine-pattern grid search --------------------------------------------

/// Final speed of the (a1, cruise, a3) profile whose first segment lasts t1
/// and which reaches L exactly T seconds after entry, if feasible.
std::optional<double> profile_final_speed(double v0, double T, double a1, double a3, double t1,
                                          const KinematicParams& k) {
  const double u = v0 + a1 * t1;
  if (u < -1e-9 || u > k.v_max + 1e-9) return std::nullopt;
  const double R = T - t1;
  const double D = k.passing_zone_length - (v0 * t1 + 0.5 * a1 * t1 * t1);
  double t3 = 0.0;
  if (a3 == 0.0) {
    if (std::abs(u * R - D) > 1e-3) return std::nullopt;
  } else {
    const double sq = 2.0 * (D - u * R) / a3;
    if (sq < 0.0) return std::nullopt;
    t3 = std::sqrt(sq);
    if (t3 > R + 1e-9) return std::nullopt;
  }
  const double vf = u + a3 * t3;
  if (vf < -1e-9 || vf > k.v_max + 1e-9) return std::nullopt;
  return vf;
}

/// Constraint slacks of the (a1, cruise, a3 != 0) profile; each is >= 0 when met.
std::array<double, 5> profile_slacks(double v0, double T, double a1, double a3, double t1,
                                     const KinematicParams& k) {
  const double u = v0 + a1 * t1;
  const double R = T - t1;
  const double D = k.passing_zone_length - (v0 * t1 + 0.5 * a1 * t1 * t1);
  const double sq = 2.0 * (D - u * R) / a3;
  const double t3 = std::sqrt(std::max(sq, 0.0));
  const double vf = u + a3 * t3;
  return {u, k.v_max - u, sq, R - t3, std::min(vf, k.v_max - vf)};
}

/// Largest final speed over the nine (a1, cruise, a3) patterns with a1, a3 in
/// {+a_up, 0, -a_low}. t1 runs on a 0.01 s grid; every sign change of a
/// constraint slack inside a cell is located by bisection and evaluated too,
/// so feasible intervals narrower than a cell are not missed. Profiles ending
/// in a cruise are solved directly.
double grid_best_final_speed(double v0, double T, const KinematicParams& k) {
  const std::array<double, 3> acc{k.a_up, 0.0, -k.a_low_mag};
  const double L = k.passing_zone_length;
  double best = -1.0;
  const long n = static_cast<long>(std::floor(T / 0.01));
  for (double a1 : acc)
    for (double a3 : acc) {
      auto f = [&](double t1) { return profile_final_speed(v0, T, a1, a3, t1, k); };
      if (a3 == 0.0) {
        // L = v0 T + a1 t1 T - a1 t1^2 / 2 has isolated roots
        if (a1 == 0.0) {
          if (std::abs(v0 * T - L) < 1e-9) best = std::max(best, v0);
          continue;
        }
        const double disc = T * T - 2.0 * (L - v0 * T) / a1;
        if (disc < 0.0) continue;
        for (double t1 : {T - std::sqrt(disc), T + std::sqrt(disc)})
          if (t1 >= 0.0 && t1 <= T)
            if (const auto e = f(t1)) best = std::max(best, *e);
        continue;
      }
      auto slack = [&](double t1) { return profile_slacks(v0, T, a1, a3, t1, k); };
      auto prev = slack(0.0);
      if (const auto e = f(0.0)) best = std::max(best, *e);
      for (long i = 1; i <= n + 1; ++i) {
        const double t1 = std::min(0.01 * static_cast<double>(i), T);
        const double t0 = 0.01 * static_cast<double>(i - 1);
        const auto cur = slack(t1);
        if (const auto e = f(t1)) best = std::max(best, *e);
        for (std::size_t c = 0; c < cur.size(); ++c) {
          if ((prev[c] >= 0.0) == (cur[c] >= 0.0)) continue;
          double lo = t0;
          double hi = t1;
          const bool lo_ok = prev[c] >= 0.0;
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            ((slack(mid)[c] >= 0.0) == lo_ok ? lo : hi) = mid;
          }
          for (double t : {lo, hi})
            if (const auto e = f(t)) best = std::max(best, *e);
        }
        prev = cur;
        if (t1 >= T) break;
      }
    }
  return best;
}

// ---- literal barrier recursion -------------------------------------------

struct LiteralResult {
  std::array<std::array<double, 2>, 2> slot_delay{};
  QueueState final{};
};

LiteralResult literal_barrier(const PhaseAssignment& a, int x, const QueueState& initial,
                              const MovementFlowProfile& prof, int first_step, const TimingParams& tp) {
  LiteralResult out;
  out.final = initial;
  std::array<bool, 8> served{};
  for (int r = 1; r <= 2; ++r) {
    const int g1 = a.green[r - 1][0];
    const int R1 = tp.interval_steps(r, 1);
    const int R2 = tp.interval_steps(r, 2);
    for (int p = 1; p <= 2; ++p) {
      const int m = a.movement[r - 1][p - 1];
      served[static_cast<std::size_t>(m - 1)] = true;
      const double s = prof.saturation[static_cast<std::size_t>(m - 1)];
      double l = initial[static_cast<std::size_t>(m - 1)];
      double delay = 0.0;
      for (int k = 1; k <= x; ++k) {
        const double qa = prof.arrival_at(m, first_step + k - 1);
        const bool green = p == 1 ? (k > 0 && k <= g1) : (k > g1 + R1 && k <= x - R2);
        const double qd = green ? std::min(s, l + qa) : 0.0;
        l = std::max(l + qa - qd, 0.0);
        delay += l * tp.dt;
      }
      out.slot_delay[static_cast<std::size_t>(r - 1)][static_cast<std::size_t>(p - 1)] = delay;
      out.final[static_cast<std::size_t>(m - 1)] = l;
    }
  }
  for (int m = 1; m <= 8; ++m) {
    if (served[static_cast<std::size_t>(m - 1)]) continue;
    for (int k = 1; k <= x; ++k) out.final[static_cast<std::size_t>(m - 1)] += prof.arrival_at(m, first_step + k - 1);
  }
  return out;
}

/// Dyadic per-step data so every sum is exact in binary floating point.
MovementFlowProfile dyadic_profile(std::mt19937_64& rng, int steps) {
  std::uniform_int_distribution<int> arr(0, 40);
  std::uniform_int_distribution<int> sat(24, 56);
  std::uniform_int_distribution<int> init(0, 64 * 12);
  MovementFlowProfile p;
  for (std::size_t m = 0; m < 8; ++m) {
    p.arrival[m].resize(static_cast<std::size_t>(steps));
    for (auto& v : p.arrival[m]) v = arr(rng) / 64.0;
    p.saturation[m] = sat(rng) / 64.0;
    p.initial[m] = init(rng) / 64.0;
  }
  return p;
}

}  // namespace

// ---- DP oracle -------------------------------------------------------------

OptimizerContext small_dp_context(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ExperimentConfig cfg;
  cfg.workers = 1;
  cfg.prediction_horizon = 30.0 + 30.0 * U(rng);
  cfg.tail_cap = 8;
  const TimingParams& tp = cfg.timing;

  OptimizerContext ctx;
  ctx.cfg = cfg;
  ctx.start_time = 100.0;
  const int x_min = decision_bounds(tp).x_min;
  const Orientation prev = U(rng) < 0.5 ? Orientation::EastWest : Orientation::NorthSouth;
  const auto prev_plans = enumerate_phase_plans(x_min, prev, tp);
  ctx.previous = prev_plans[static_cast<std::size_t>(U(rng) * static_cast<double>(prev_plans.size())) %
                            prev_plans.size()];
  ctx.first_release = ctx.start_time - x_min * tp.dt;

  std::array<double, 8> rate{};
  std::array<double, 8> sat{};
  QueueState q0{};
  for (int m = 1; m <= 8; ++m) {
    rate[static_cast<std::size_t>(m - 1)] = 50.0 + 350.0 * U(rng);
    sat[static_cast<std::size_t>(m - 1)] = cfg.saturation(m);
    q0[static_cast<std::size_t>(m - 1)] = std::floor(6.0 * U(rng));
  }
  const int horizon = static_cast<int>(std::floor(cfg.prediction_horizon / tp.dt));
  ctx.hv = MovementFlowProfile::constant(rate, sat, horizon, tp.dt, q0);

  int id = 1;
  const double to_entry = cfg.geometry.buffer_length / cfg.kin.v_max;
  for (Arm arm : kArms) {
    const int n = static_cast<int>(U(rng) * 4.0);
    std::vector<double> times;
    for (int i = 0; i < n; ++i) times.push_back(ctx.first_release - 60.0 + (60.0 + cfg.prediction_horizon) * U(rng));
    std::sort(times.begin(), times.end());
    for (double t : times) {
      const Turn turn = U(rng) < 0.5 ? Turn::Left : Turn::Through;
      ctx.cavs[static_cast<std::size_t>(arm)].push_back(CavRequest{id++, arm, turn, t, t + to_entry});
    }
  }
  return ctx;
}

CycleSolution brute_force_cycle(const OptimizerContext& ctx) {
  const TimingParams& tp = ctx.cfg.timing;
  const DecisionBounds b = decision_bounds(tp);
  ChainCache cache(ctx.cfg, ctx.cfg.max_platoon);
  const PlanningState s0 = initial_state(ctx);
  const Orientation o1 = opposite(ctx.previous.orientation());
  const Orientation o2 = opposite(o1);
  const bool sync = ctx.cfg.no_buffer();

  struct First {
    double value = 0.0;
    BarrierPlan plan;
    BarrierOutcome out;
  };
  std::vector<First> firsts;
  for (int x1 = b.x_min; x1 <= b.x_max; ++x1) {
    First best;
    bool have = false;
    for (const auto& a : enumerate_phase_plans(x1, o1, tp, sync)) {
      BarrierOutcome o = evaluate_barrier(ctx, BarrierPlan{x1, a}, s0, cache);
      const double v = o.total();
      if (!have || plan_preferred(v, a, best.value, best.plan.assignment)) {
        have = true;
        best = First{v, BarrierPlan{x1, a}, std::move(o)};
      }
    }
    firsts.push_back(std::move(best));
  }

  CycleSolution sol;
  bool have = false;
  for (int s3 = 2 * b.x_min; s3 <= 2 * b.x_max; ++s3)
    for (int x2 = b.x_min; x2 <= b.x_max; ++x2) {
      const int x1 = s3 - x2;
      if (x1 < b.x_min || x1 > b.x_max) continue;
      const First& f = firsts[static_cast<std::size_t>(x1 - b.x_min)];
      double best2 = 0.0;
      BarrierPlan plan2;
      bool have2 = false;
      for (const auto& a : enumerate_phase_plans(x2, o2, tp, sync)) {
        const double v = stage2_value(ctx, f.plan, f.out.after, BarrierPlan{x2, a}, cache);
        if (!have2 || plan_preferred(v, a, best2, plan2.assignment)) {
          have2 = true;
          best2 = v;
          plan2 = BarrierPlan{x2, a};
        }
      }
      const double total = (0.0 + f.value) + best2;
      if (!have || total < sol.value) {
        have = true;
        sol.value = total;
        sol.x1 = x1;
        sol.x2 = x2;
        sol.first.value = f.value;
        sol.first.x = x1;
        sol.first.plan = f.plan;
        sol.second.value = best2;
        sol.second.x = x2;
        sol.second.plan = plan2;
      }
    }
  sol.cycle.start_time = ctx.start_time;
  sol.cycle.barriers = {sol.first.plan, sol.second.plan};
  return sol;
}

VerifyReport verify_dp_oracle(int contexts, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "dp-oracle";
  for (int i = 0; i < contexts; ++i) {
    const OptimizerContext ctx = small_dp_context(seed + static_cast<std::uint64_t>(i));
    const CycleSolution dp = solve_cycle(ctx);
    const CycleSolution bf = brute_force_cycle(ctx);
    ++r.cases;
    r.max_deviation = std::max(r.max_deviation, std::abs(dp.value - bf.value));
    if (dp.value != bf.value || dp.x1 != bf.x1 || dp.x2 != bf.x2 || !(dp.first.plan == bf.first.plan) ||
        !(dp.second.plan == bf.second.plan)) {
      std::ostringstream os;
      os << std::setprecision(12) << "context " << i << ": dp (" << dp.x1 << ", " << dp.x2 << ") " << dp.value
         << " vs brute force (" << bf.x1 << ", " << bf.x2 << ") " << bf.value;
      fail(r, os.str());
    }
  }
  return r;
}

// ---- trajectory oracle -----------------------------------------------------

VerifyReport verify_trajectory_oracle(int instances, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "trajectory-oracle";
  KinematicParams kin;
  {
    ++r.cases;
    const auto plan = try_plan_leader(0.0, 14.0, PhaseWindow{50.0, 15.0}, kin);
    const double u = (-72.0 + std::sqrt(8400.0)) / 2.0;
    if (!plan || plan->pattern != std::array<double, 3>{-2.0, 0.0, 2.0} || plan->t_f != 50.0 ||
        std::abs(plan->speed(plan->durations[0]) - u) > 1e-6 || std::abs(plan->v_f - 14.0) > 1e-9)
      fail(r, "worked instance (v0 = 14, window start 50) does not give (-2, 0, +2), u = 9.83, v_f = 14");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int made = 0;
  while (made < instances) {
    const double v0 = kin.v0_low + (kin.v0_up - kin.v0_low) * U(rng);
    const PassingTimeBounds b = passing_time_bounds(v0, kin);
    const double hi = b.up ? std::min(*b.up, b.low + 40.0) : b.low + 40.0;
    if (hi - b.low < 0.5) continue;
    const double start = b.low + 0.25 + (hi - b.low - 0.5) * U(rng);
    ++made;
    ++r.cases;
    const auto plan = try_plan_leader(0.0, v0, PhaseWindow{start, 15.0}, kin);
    if (!plan) {
      fail(r, "no plan for v0 = " + std::to_string(v0) + ", start = " + std::to_string(start));
      continue;
    }
    const double grid = grid_best_final_speed(v0, start, kin);
    const double dev = std::abs(plan->v_f - grid);
    r.max_deviation = std::max(r.max_deviation, dev);
    if (plan->t_f != start || dev > 0.02) {
      std::ostringstream os;
      os << std::setprecision(10) << "v0 " << v0 << " start " << start << ": t_f " << plan->t_f << " v_f "
         << plan->v_f << " grid " << grid;
      fail(r, os.str());
    }
  }
  return r;
}

// ---- queue model -----------------------------------------------------------

VerifyReport verify_queue_conservation(int cases, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "queue-conservation";
  std::mt19937_64 rng(seed);
  const TimingParams tp = ExperimentConfig{}.timing;
  const DecisionBounds b = decision_bounds(tp);
  std::uniform_int_distribution<int> X(b.x_min, b.x_max);
  std::uniform_int_distribution<int> first(0, 30);
  std::uniform_int_distribution<int> extra(0, 19);
  std::uniform_int_distribution<int> horizon(20, 200);
  for (int i = 0; i < cases; ++i) {
    ++r.cases;
    const Orientation o = i % 2 == 0 ? Orientation::EastWest : Orientation::NorthSouth;
    const int xa = X(rng);
    const int xb = X(rng);
    const auto plans_a = enumerate_phase_plans(xa, o, tp);
    const auto plans_b = enumerate_phase_plans(xb, opposite(o), tp);
    const PhaseAssignment& A = plans_a[std::uniform_int_distribution<std::size_t>(0, plans_a.size() - 1)(rng)];
    const PhaseAssignment& B = plans_b[std::uniform_int_distribution<std::size_t>(0, plans_b.size() - 1)(rng)];
    const MovementFlowProfile prof = dyadic_profile(rng, horizon(rng));
    const int f0 = first(rng);
    const int red = extra(rng);

    const auto ra = evolve_barrier(A, xa, prof.initial, prof, f0, tp, red);
    const auto ra2 = evolve_barrier(A, xa, prof.initial, prof, f0, tp, red);
    const auto rb = evolve_barrier(B, xb, ra.final, prof, f0 + xa + red, tp);
    bool ok = ra.final == ra2.final && ra.delay == ra2.delay;
    for (std::size_t m = 0; m < 8; ++m) {
      ok = ok && ra.final[m] - prof.initial[m] == ra.arrivals[m] - ra.departures[m];
      ok = ok && rb.final[m] - ra.final[m] == rb.arrivals[m] - rb.departures[m];
    }
    const auto la = literal_barrier(A, xa, prof.initial, prof, f0, tp);
    const auto ra0 = evolve_barrier(A, xa, prof.initial, prof, f0, tp);
    ok = ok && la.final == ra0.final && la.slot_delay == ra0.slot_delay;
    QueueState mid = la.final;
    for (std::size_t m = 0; m < 8; ++m)
      for (int k = 1; k <= red; ++k) mid[m] += prof.arrival_at(static_cast<int>(m) + 1, f0 + xa + k - 1);
    const auto lb = literal_barrier(B, xb, mid, prof, f0 + xa + red, tp);
    ok = ok && mid == ra.final && lb.final == rb.final && lb.slot_delay == rb.slot_delay;
    if (!ok) fail(r, "case " + std::to_string(i) + " (x = " + std::to_string(xa) + ", " + std::to_string(xb) + ")");
  }
  return r;
}

// ---- passing-time bounds ---------------------------------------------------

VerifyReport verify_appendix_a_bounds(int samples, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "appendix-a-bounds";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < samples; ++i) {
    KinematicParams k;
    k.v_max = 8.0 + 17.0 * U(rng);
    k.a_up = 0.5 + 3.5 * U(rng);
    k.a_low_mag = 0.5 + 5.5 * U(rng);
    k.passing_zone_length = 50.0 + 750.0 * U(rng);
    k.v0_low = 0.0;
    k.v0_up = k.v_max;
    const double v0 = k.v_max * U(rng);
    ++r.cases;
    const PassingTimeBounds b = passing_time_bounds(v0, k);
    const auto low = integrate_to(k.passing_zone_length, v0, k.a_up, k.v_max);
    const auto up = integrate_to(k.passing_zone_length, v0, -k.a_low_mag, k.v_max);
    const bool unbounded = v0 <= std::sqrt(2.0 * k.a_low_mag * k.passing_zone_length);
    bool ok = low.has_value() && b.up.has_value() != unbounded && up.has_value() != unbounded;
    if (ok) {
      const double dl = std::abs(*low - b.low);
      r.max_deviation = std::max(r.max_deviation, dl);
      ok = dl < 1e-6;
      if (b.up && up) {
        const double du = std::abs(*up - *b.up);
        r.max_deviation = std::max(r.max_deviation, du);
        ok = ok && du < 1e-6;
      }
    }
    if (!ok) {
      std::ostringstream os;
      os << std::setprecision(10) << "v0 " << v0 << " L " << k.passing_zone_length << " v_max " << k.v_max
         << " aU " << k.a_up << " aL " << k.a_low_mag;
      fail(r, os.str());
    }
  }
  return r;
}

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"dp-oracle", "trajectory-oracle", "queue-conservation",
                                              "appendix-a-bounds"};
  return names;
}

VerifyReport run_verify_suite(const std::string& name, std::uint64_t seed) {
  if (name == "dp-oracle") return verify_dp_oracle(50, seed);
  if (name == "trajectory-oracle") return verify_trajectory_oracle(100, seed);
  if (name == "queue-conservation") return verify_queue_conservation(100, seed);
  if (name == "appendix-a-bounds") return verify_appendix_a_bounds(1000, seed);
  throw std::invalid_argument("unknown verify suite '" + name + "'");
}

void write_report(std::ostream& os, const VerifyReport& r) {
  os << r.suite << ": " << (r.cases - r.failures) << "/" << r.cases << " passed, max deviation "
     << std::setprecision(3) << r.max_deviation << (r.ok() ? "  OK" : "  FAILED") << '\n';
  for (const auto& n : r.notes) os << "  " << n << '\n';
}

}  // namespace spdl
