#include "spdl/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace spdl {

namespace {

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const auto w = static_cast<std::size_t>(std::clamp(workers, 1, 64));
  if (w == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mu;
  for (std::size_t t = 0; t < std::min(w, n); ++t)
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Strict "a is preferred over b" at equal x.
bool preferred(double va, const PhaseAssignment& a, double vb, const PhaseAssignment& b) {
  if (va != vb) return va < vb;
  if (a.alpha_key() != b.alpha_key()) return a.alpha_key() < b.alpha_key();
  if (a.green[0][0] != b.green[0][0]) return a.green[0][0] > b.green[0][0];
  return a.green[1][0] > b.green[1][0];
}

bool discharged(const OptimizerContext& ctx, const PlanningState& s) {
  for (double q : s.queues)
    if (q > ctx.cfg.discharge_tol) return false;
  for (const auto& m : ctx.hv.arrival)
    if (static_cast<std::size_t>(s.step) < m.size()) return false;
  for (const auto& w : s.waiting)
    if (!w.empty()) return false;
  return true;
}

double residual_delay(const OptimizerContext& ctx, const PlanningState& s) {
  const double dt = ctx.cfg.timing.dt;
  double r = 0.0;
  for (std::size_t m = 0; m < 8; ++m) {
    const double sat = ctx.hv.saturation[m];
    if (s.queues[m] > 0.0 && sat > 0.0) r += s.queues[m] * s.queues[m] / (2.0 * sat) * dt;
  }
  const double now = ctx.start_time + s.step * dt;
  const double free = (ctx.cfg.geometry.buffer_length + ctx.cfg.kin.passing_zone_length) / ctx.cfg.kin.v_max;
  for (const auto& w : s.waiting)
    for (const auto& c : w) r += std::max(now - c.arrival - free, 0.0);
  return r;
}

Orientation stage_orientation(const OptimizerContext& ctx, int stage, const std::optional<BarrierPlan>& first) {
  if (stage == 1) return opposite(ctx.previous.orientation());
  if (!first) throw std::invalid_argument("stage 2 needs the stage-1 plan");
  return opposite(first->assignment.orientation());
}

}  // namespace

DecisionBounds decision_bounds(const TimingParams& tp) {
  DecisionBounds b;
  for (int r = 1; r <= 2; ++r) {
    const double lo = tp.g_min[r - 1][0] + tp.g_min[r - 1][1] + tp.green_interval[r - 1][0] + tp.green_interval[r - 1][1];
    const double hi = tp.g_max[r - 1][0] + tp.g_max[r - 1][1] + tp.green_interval[r - 1][0] + tp.green_interval[r - 1][1];
    b.x_min = std::max(b.x_min, tp.to_steps(lo));
    b.x_max = std::max(b.x_max, tp.to_steps(hi));
  }
  if (b.x_min > b.x_max) throw ConfigError("minimum barrier length exceeds maximum");
  return b;
}

std::vector<PhaseAssignment> enumerate_phase_plans(int x, Orientation o, const TimingParams& tp,
                                                   bool synchronized_head_lag) {
  std::array<std::vector<std::pair<int, int>>, 2> splits;
  for (int r = 1; r <= 2; ++r) {
    const int rest = x - tp.interval_steps(r, 1) - tp.interval_steps(r, 2);
    for (int g1 = tp.min_green_steps(r, 1); g1 <= tp.max_green_steps(r, 1); ++g1) {
      const int g2 = rest - g1;
      if (g2 >= tp.min_green_steps(r, 2) && g2 <= tp.max_green_steps(r, 2)) splits[r - 1].emplace_back(g1, g2);
    }
  }
  std::vector<PhaseAssignment> out;
  const auto m1 = ring_movements(1, o);
  const auto m2 = ring_movements(2, o);
  const std::array<std::array<int, 2>, 2> orders1{{{m1[0], m1[1]}, {m1[1], m1[0]}}};
  const std::array<std::array<int, 2>, 2> orders2{{{m2[0], m2[1]}, {m2[1], m2[0]}}};
  for (const auto& s1 : orders1)
    for (const auto& s2 : orders2) {
      PhaseAssignment base;
      base.movement = {s1, s2};
      const bool head_lag = (movement(s1[0]).turn == Turn::Left) != (movement(s2[0]).turn == Turn::Left);
      if (synchronized_head_lag && !head_lag) continue;
      for (const auto& [a1, a2] : splits[0])
        for (const auto& [b1, b2] : splits[1]) {
          if (synchronized_head_lag && (a1 != b1 || a2 != b2)) continue;
          PhaseAssignment p = base;
          p.green = {{{a1, a2}, {b1, b2}}};
          out.push_back(p);
        }
    }
  return out;
}

int OptimizerContext::blue_steps() const {
  return cfg.timing.to_steps(cfg.timing.g_min[0][0] + cfg.timing.green_interval[0][0]);
}

PlanningState initial_state(const OptimizerContext& ctx) {
  PlanningState s;
  s.queues = ctx.hv.initial;
  if (!ctx.blue_phase) s.waiting = ctx.cavs;
  s.barrier_start_prev = ctx.first_release;
  return s;
}

BarrierOutcome evaluate_barrier(const OptimizerContext& ctx, const BarrierPlan& plan, const PlanningState& before,
                                ChainCache& cache) {
  const ExperimentConfig& cfg = ctx.cfg;
  const int extra = ctx.blue_phase ? ctx.blue_steps() : 0;
  const double start = ctx.start_time + before.step * cfg.timing.dt;
  BarrierOutcome out;
  const BarrierQueueResult q =
      evolve_barrier(plan.assignment, plan.steps, before.queues, ctx.hv, before.step, cfg.timing, extra);
  out.hv_delay = q.delay;
  out.after.queues = q.final;
  out.after.step = before.step + plan.steps + extra;
  out.after.barrier_start_prev = start;

  bool any = false;
  for (const auto& w : before.waiting) any = any || !w.empty();
  if (!any) {
    out.after.waiting = before.waiting;
    return out;
  }
  if (cfg.no_buffer())
    out.platoons = build_platoons_no_buffer(before.waiting, plan.assignment, start, cfg);
  else
    out.platoons = build_platoons(before.waiting, plan.assignment, start, before.barrier_start_prev, cfg.kin.v0_up,
                                  cfg, cache);
  out.cav_delay = cav_delay(out.platoons, cfg).total;
  auto served = out.platoons.served_ids();
  std::sort(served.begin(), served.end());
  for (std::size_t a = 0; a < 4; ++a) {
    auto& w = out.after.waiting[a];
    w.reserve(before.waiting[a].size());
    for (const auto& c : before.waiting[a])
      if (!std::binary_search(served.begin(), served.end(), c.id)) w.push_back(c);
  }
  return out;
}

TailResult evaluate_tail(const OptimizerContext& ctx, const BarrierPlan& first, const BarrierPlan& second,
                         const PlanningState& after_second, ChainCache& cache) {
  TailResult r;
  r.barriers = 2;
  PlanningState s = after_second;
  while (!discharged(ctx, s)) {
    if (r.barriers >= ctx.cfg.tail_cap) {
      r.residual = true;
      r.delay += residual_delay(ctx, s);
      break;
    }
    const BarrierPlan& p = (r.barriers % 2 == 0) ? first : second;
    BarrierOutcome o = evaluate_barrier(ctx, p, s, cache);
    r.delay += o.total();
    s = std::move(o.after);
    ++r.barriers;
  }
  return r;
}

double stage2_value(const OptimizerContext& ctx, const BarrierPlan& first, const PlanningState& after_first,
                    const BarrierPlan& second, ChainCache& cache) {
  const BarrierOutcome o = evaluate_barrier(ctx, second, after_first, cache);
  return o.total() + evaluate_tail(ctx, first, second, o.after, cache).delay;
}

StageEvaluation evaluate_stage(const OptimizerContext& ctx, int stage, int x, const PlanningState& before,
                               const std::optional<BarrierPlan>& first, ChainCache& cache) {
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  const Orientation o = stage_orientation(ctx, stage, first);
  const auto plans = enumerate_phase_plans(x, o, ctx.cfg.timing, ctx.cfg.no_buffer());
  if (plans.empty()) throw ConstraintError("no phase plan of length " + std::to_string(x));

  StageEvaluation best;
  bool have = false;
  for (const auto& a : plans) {
    const BarrierPlan bp{x, a};
    BarrierOutcome out = evaluate_barrier(ctx, bp, before, cache);
    double value = out.total();
    TailResult tail;
    if (stage == 2) {
      tail = evaluate_tail(ctx, *first, bp, out.after, cache);
      value += tail.delay;
    }
    if (!have || preferred(value, a, best.value, best.plan.assignment)) {
      have = true;
      best.value = value;
      best.x = x;
      best.plan = bp;
      best.hv_delay = out.hv_delay;
      best.cav_delay = out.cav_delay;
      best.tail = tail;
      best.after = std::move(out.after);
      best.platoons = std::move(out.platoons);
    }
  }
  return best;
}

const DPEntry& DPTable::at(int stage, int state) const {
  for (const auto& e : stages.at(static_cast<std::size_t>(stage - 1)))
    if (e.state == state) return e;
  throw std::out_of_range("no DP state " + std::to_string(state) + " at stage " + std::to_string(stage));
}

DPTable forward_recursion(const OptimizerContext& ctx, ChainCache& cache) {
  DPTable t;
  t.bounds = decision_bounds(ctx.cfg.timing);
  const int lo = t.bounds.x_min;
  const int hi = t.bounds.x_max;
  const auto n = static_cast<std::size_t>(hi - lo + 1);
  const PlanningState init = initial_state(ctx);

  t.stages[0].push_back(DPEntry{0, 0.0, 0, {}});

  std::vector<StageEvaluation> f1(n);
  parallel_for(n, ctx.cfg.workers, [&](std::size_t i) {
    f1[i] = evaluate_stage(ctx, 1, lo + static_cast<int>(i), init, std::nullopt, cache);
  });
  for (std::size_t i = 0; i < n; ++i) {
    const int x1 = lo + static_cast<int>(i);
    t.stages[1].push_back(DPEntry{x1, 0.0 + f1[i].value, x1, f1[i]});
  }

  std::vector<StageEvaluation> f2(n * n);
  parallel_for(n * n, ctx.cfg.workers, [&](std::size_t k) {
    const std::size_t i = k / n;
    const std::size_t j = k % n;
    f2[k] = evaluate_stage(ctx, 2, lo + static_cast<int>(j), f1[i].after, f1[i].plan, cache);
  });

  for (int s3 = 2 * lo; s3 <= 2 * hi; ++s3) {
    DPEntry best;
    bool have = false;
    for (int x2 = lo; x2 <= hi; ++x2) {
      const int x1 = s3 - x2;
      if (x1 < lo || x1 > hi) continue;
      const auto i = static_cast<std::size_t>(x1 - lo);
      const auto j = static_cast<std::size_t>(x2 - lo);
      const double v = t.stages[1][i].value + f2[i * n + j].value;
      if (!have || v < best.value) {
        have = true;
        best = DPEntry{s3, v, x2, f2[i * n + j]};
      }
    }
    t.stages[2].push_back(std::move(best));
  }
  return t;
}

CycleSolution backward_recursion(const DPTable& table, const OptimizerContext& ctx) {
  const auto& last = table.stages[2];
  if (last.empty()) throw std::invalid_argument("empty DP table");
  const DPEntry* best = &last.front();
  for (const auto& e : last)
    if (e.value < best->value) best = &e;
  CycleSolution s;
  s.value = best->value;
  s.x2 = best->decision;
  s.x1 = best->state - s.x2;
  s.second = best->eval;
  s.first = table.at(2, s.x1).eval;
  s.cycle.start_time = ctx.start_time;
  s.cycle.barriers = {s.first.plan, s.second.plan};
  s.cycle.extra_steps_after_barrier = ctx.blue_phase ? ctx.blue_steps() : 0;
  return s;
}

CycleSolution solve_cycle(const OptimizerContext& ctx) {
  ChainCache cache(ctx.cfg, ctx.cfg.max_platoon);
  const DPTable t = forward_recursion(ctx, cache);
  return backward_recursion(t, ctx);
}

namespace {

void write_plan(std::ostream& os, const char* tag, const BarrierPlan& p) {
  const auto& a = p.assignment;
  os << tag << " x=" << p.steps << " ring1=" << a.movement[0][0] << ':' << a.green[0][0] << ','
     << a.movement[0][1] << ':' << a.green[0][1] << " ring2=" << a.movement[1][0] << ':' << a.green[1][0] << ','
     << a.movement[1][1] << ':' << a.green[1][1] << '\n';
}

}  // namespace

void write_solution(std::ostream& os, const CycleSolution& s) {
  const auto old = os.precision(9);
  os << "value " << s.value << '\n';
  os << "start " << s.cycle.start_time << '\n';
  write_plan(os, "barrier1", s.first.plan);
  write_plan(os, "barrier2", s.second.plan);
  os << "f1 " << s.first.value << " hv " << s.first.hv_delay << " cav " << s.first.cav_delay << '\n';
  os << "f2 " << s.second.value << " hv " << s.second.hv_delay << " cav " << s.second.cav_delay << " tail "
     << s.second.tail.delay << " J " << s.second.tail.barriers << (s.second.tail.residual ? " residual" : "") << '\n';
  for (const auto* st : {&s.first, &s.second})
    for (const auto& ap : st->platoons.arms)
      for (const auto& p : ap.platoons) {
        os << "platoon arm=" << to_string(ap.arm) << " kind=" << to_string(ap.kind) << " release=" << p.release
           << " v0=" << p.v0 << " tf=" << p.leader_plan.t_f << " vf=" << p.leader_plan.v_f << " members=";
        for (std::size_t i = 0; i < p.members.size(); ++i)
          os << (i ? "," : "") << p.members[i].id << '@' << p.crossing[i];
        os << '\n';
      }
  os.precision(old);
}

void write_table(std::ostream& os, const DPTable& t) {
  const auto old = os.precision(9);
  os << "bounds " << t.bounds.x_min << ' ' << t.bounds.x_max << '\n';
  for (std::size_t j = 0; j < t.stages.size(); ++j)
    for (const auto& e : t.stages[j])
      os << "stage " << j + 1 << " state " << e.state << " value " << e.value << " decision " << e.decision << '\n';
  os.precision(old);
}

std::string to_text(const CycleSolution& s) {
  std::ostringstream os;
  write_solution(os, s);
  return os.str();
}

}  // namespace spdl
