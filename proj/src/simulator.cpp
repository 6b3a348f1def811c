#include "spdl/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <random>

#include "spdl/baseline_bp.hpp"
#include "spdl/optimizer.hpp"
#include "spdl/platoon.hpp"
#include "spdl/queue_model.hpp"

namespace spdl {

const char* to_string(LaneKind k) {
  switch (k) {
    case LaneKind::CAV: return "cav";
    case LaneKind::HVLeft: return "hv-left";
    case LaneKind::HVThrough: return "hv-through";
    case LaneKind::Right: return "right";
  }
  return "?";
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::array<LaneKind, 4> kLanes{LaneKind::CAV, LaneKind::HVLeft, LaneKind::HVThrough, LaneKind::Right};

enum class Control : std::uint8_t { Free, Leader, Follower, Pending };

struct Veh {
  VehicleRecord rec;
  double box = 0.0;
  FollowState st;
  std::size_t delay = 0;
  FollowParams fp;
  Control control = Control::Free;
  std::optional<TrajectoryPlan> plan;
  double plan_x0 = 0.0;
  long target = -1;
  double planned_cross = kNaN;
  bool crossed = false;
  bool stopping = false;
  double stop_green = 0.0;  // start of the green active when the stop was latched, or -inf

  [[nodiscard]] bool planned() const { return control == Control::Leader || control == Control::Follower; }
};

struct Barrier {
  double start = 0.0;
  int steps = 0;
  int extra = 0;
  PhaseAssignment a;
};

struct LaneEvent {
  std::size_t index = 0;  // position in the lane before removal
  int id = 0;
  double cross = kNaN;
  double exit = kNaN;
};

}  // namespace

struct Simulation::Impl {
  ExperimentConfig cfg;
  RunOptions opts;
  std::uint64_t seed = 0;
  std::vector<ArrivalEvent> arrivals;
  std::size_t next_arrival = 0;
  std::mt19937_64 speed_rng;

  double dt = 0.1;
  double L = 500.0;
  long n = 0;

  std::array<std::array<std::vector<Veh>, 4>, 4> lanes;        // [arm][lane], front first
  std::array<std::array<std::deque<Veh>, 4>, 4> spawn_queue;   // blocked entries
  std::array<std::vector<Veh>, 4> held;                        // buffer holding lists
  std::array<std::deque<Veh>, 4> awaiting_entry;               // no-buffer: not yet at x = 0
  std::array<std::vector<Veh>, 4> point_queue;                 // BP dedicated lanes
  struct Scheduled {
    double time = 0.0;
    Arm arm = Arm::East;
    std::vector<Veh> members;
    Platoon p;
    long target = 0;
  };
  std::vector<Scheduled> scheduled;

  std::vector<Barrier> barriers;
  std::vector<SignalPlan> cycles;
  std::size_t next_barrier = 0;
  std::size_t next_blue = 0;

  std::vector<VehicleRecord> done;
  std::array<std::deque<double>, 9> hv_arrival_times;  // per signalized movement
  std::vector<TrajectorySample> samples;
  IntegrityReport integrity;

  Impl(ExperimentConfig c, std::vector<ArrivalEvent> a, std::uint64_t s, RunOptions o)
      : cfg(std::move(c)), opts(std::move(o)), seed(s), arrivals(std::move(a)),
        speed_rng(s ^ 0x9E3779B97F4A7C15ULL) {
    cfg.validate();
    dt = cfg.dt_sim;
    L = cfg.kin.passing_zone_length;
    std::stable_sort(arrivals.begin(), arrivals.end(),
                     [](const ArrivalEvent& x, const ArrivalEvent& y) { return x.time < y.time; });
    commit(bootstrap_cycle(0.0), std::nullopt);
  }

  [[nodiscard]] double now() const { return static_cast<double>(n) * dt; }
  [[nodiscard]] bool bp() const { return cfg.controller == Controller::BP; }
  [[nodiscard]] bool no_buffer() const { return cfg.no_buffer(); }
  /// Control of a CAV that loses its plan; no-buffer CAVs wait for a replan.
  [[nodiscard]] Control unplanned() const { return no_buffer() ? Control::Pending : Control::Free; }
  [[nodiscard]] int blue_steps() const {
    return bp() ? cfg.timing.to_steps(cfg.timing.g_min[0][0] + cfg.timing.green_interval[0][0]) : 0;
  }

  // ---- signal plan ---------------------------------------------------------

  SignalPlan bootstrap_cycle(double start) const {
    if (opts.fixed_cycle) {
      SignalPlan p = *opts.fixed_cycle;
      p.start_time = start;
      p.extra_steps_after_barrier = blue_steps();
      return p;
    }
    const int x = decision_bounds(cfg.timing).x_min;
    SignalPlan p;
    p.start_time = start;
    p.extra_steps_after_barrier = blue_steps();
    const bool sync = no_buffer();
    p.barriers.push_back({x, enumerate_phase_plans(x, Orientation::EastWest, cfg.timing, sync).front()});
    p.barriers.push_back({x, enumerate_phase_plans(x, Orientation::NorthSouth, cfg.timing, sync).front()});
    return p;
  }

  void commit(const SignalPlan& p, const std::optional<PhaseAssignment>& previous) {
    integrity.plan_violations += static_cast<long>(validate_plan(p, cfg.timing, previous).size());
    for (std::size_t j = 0; j < p.barriers.size(); ++j)
      barriers.push_back(
          {p.barrier_start(j, cfg.timing), p.barriers[j].steps, p.extra_steps_after_barrier, p.barriers[j].assignment});
    cycles.push_back(p);
  }

  [[nodiscard]] double barrier_end(std::size_t k) const {
    const auto& b = barriers[k];
    return b.start + (b.steps + b.extra) * cfg.timing.dt;
  }

  [[nodiscard]] std::optional<PhaseWindow> window(std::size_t k, int m) const {
    const auto& b = barriers[k];
    if (!b.a.slot_of(m)) return std::nullopt;
    return movement_window(b.a, m, b.start, cfg.timing);
  }

  [[nodiscard]] double yellow_of(std::size_t k, int m) const {
    const auto slot = barriers[k].a.slot_of(m);
    return slot ? cfg.timing.yellow(slot->first, slot->second) : 0.0;
  }

  [[nodiscard]] std::size_t search_from() const { return next_barrier >= 2 ? next_barrier - 2 : 0; }

  /// Green window of movement m containing t, if any.
  [[nodiscard]] std::optional<PhaseWindow> green_at(int m, double t) const {
    for (std::size_t k = search_from(); k < barriers.size(); ++k) {
      if (barriers[k].start > t + 1e-9) break;
      if (auto w = window(k, m); w && t >= w->start - 1e-9 && t < w->end() - 1e-9) return w;
    }
    return std::nullopt;
  }

  [[nodiscard]] bool crossing_allowed(int m, double c) const {
    for (std::size_t k = 0; k < barriers.size(); ++k) {
      if (barriers[k].start > c + 1e-6) break;
      if (auto w = window(k, m); w && c >= w->start - 1e-6 && c <= w->end() + yellow_of(k, m) + dt + 1e-9)
        return true;
    }
    return false;
  }

  // ---- vehicles -------------------------------------------------------------

  Veh make_vehicle(const ArrivalEvent& e) const {
    Veh v;
    v.rec.id = e.id;
    v.rec.kind = e.kind;
    v.rec.arm = e.arm;
    v.rec.turn = e.turn;
    v.rec.movement = e.turn == Turn::Right ? 0 : movement_id(e.arm, e.turn);
    v.rec.arrival = e.time;
    v.rec.free_flow = cfg.free_flow_time(e.turn);
    v.box = cfg.geometry.box_length(e.turn);
    v.fp = cfg.follow_params(e.kind);
    v.delay = static_cast<std::size_t>(std::llround(v.fp.tau / dt));
    return v;
  }

  static LaneKind lane_of(const Veh& v) {
    if (v.rec.turn == Turn::Right) return LaneKind::Right;
    if (v.rec.kind == VehicleKind::CAV) return LaneKind::CAV;
    return v.rec.turn == Turn::Left ? LaneKind::HVLeft : LaneKind::HVThrough;
  }

  static CavRequest request_of(const Veh& v, double buffer, double v_max) {
    return CavRequest{v.rec.id, v.rec.arm, v.rec.turn, v.rec.arrival, v.rec.arrival + buffer / v_max};
  }

  [[nodiscard]] bool obeys_signal(const Veh& v, LaneKind lane) const {
    if (lane == LaneKind::Right) return false;
    if (lane == LaneKind::CAV) return v.control == Control::Pending || v.control == Control::Free;
    return true;
  }

  /// Braking toward a red uses at least one step of reaction time.
  [[nodiscard]] FollowParams stop_params(const Veh& v) const {
    FollowParams p = v.fp;
    p.tau = std::max(p.tau, dt);
    return p;
  }

  [[nodiscard]] bool can_stop(const Veh& v) const {
    const double d = v.fp.a_low_mag;
    const double dtau = d * (stop_params(v).tau + 0.5 * dt);
    const double gap = std::max(L - v.st.x, 0.0);
    return v.st.v <= -dtau + std::sqrt(dtau * dtau + 2.0 * d * gap) + 1e-9;
  }

  /// `after` is the earliest time the vehicle ahead clears the stop line.
  bool must_stop(Veh& v, double t, double after, double& reach) const {
    const auto w = green_at(v.rec.movement, t);
    const double green = w ? w->start : -std::numeric_limits<double>::infinity();
    if (v.stopping) {
      if (!w || green == v.stop_green) return true;
      v.stopping = false;
    }
    reach = std::max(t + min_travel_time(L - v.st.x, v.st.v, v.fp.a_up, v.fp.v_max),
                     after + v.fp.tau);
    if (w && reach <= w->end() + 1e-9) return false;
    if (!can_stop(v)) return false;
    v.stopping = true;
    v.stop_green = green;
    reach = std::numeric_limits<double>::infinity();
    return true;
  }

  /// Moves one lane from t to t + dt. Crossed/exited vehicles are reported;
  /// exited ones are removed.
  std::vector<LaneEvent> advance_lane(std::vector<Veh>& lane, LaneKind kind, double t, bool record) {
    std::vector<LaneEvent> events;
    if (lane.empty()) return events;
    const double t_next = t + dt;
    std::vector<double> nx(lane.size());
    double after = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lane.size(); ++i) {
      Veh& v = lane[i];
      std::optional<LeaderView> ahead;
      if (i > 0) ahead = lane[i - 1].st.view(nx[i - 1], v.delay);
      if (i > 0 && v.control == Control::Follower && !lane[i - 1].crossed && !lane[i - 1].planned())
        v.control = unplanned();
      double x;
      if (v.control == Control::Leader && v.plan && t_next > v.plan->t_f + 1e-9) v.control = Control::Free;
      if (v.control == Control::Leader && v.plan && !v.crossed) {
        x = v.plan_x0 + v.plan->position(t_next);
        if (ahead) {
          const double bound = follow_update(v.st.x, v.st.v, ahead, dt, v.fp);
          if (bound < x - 1e-9) {
            x = bound;
            v.control = unplanned();
            for (std::size_t j = i + 1; j < lane.size(); ++j) {
              if (lane[j].control != Control::Follower || lane[j].target != v.target) break;
              lane[j].control = unplanned();
            }
            if (record) ++integrity.clamped_leader_steps;
          }
        }
        x = std::max(x, v.st.x);
      } else {
        x = follow_update(v.st.x, v.st.v, ahead, dt, v.fp);
        double reach = t;
        const bool stop = !v.crossed && obeys_signal(v, kind) && must_stop(v, t, after, reach);
        if (stop) {
          const LeaderView red{L + v.fp.jam, L + v.fp.jam, 0.0};
          x = std::min(x, follow_update(v.st.x, v.st.v, red, dt, stop_params(v)));
        }
        if (!v.crossed) after = (v.planned() ? v.planned_cross : reach) + v.fp.jam / v.fp.v_max;
      }
      if (v.control == Control::Leader && !v.crossed) after = v.planned_cross + v.fp.jam / v.fp.v_max;
      if (v.crossed)
        after = t + min_travel_time(L + v.fp.jam - v.st.x, v.st.v, v.fp.a_up, v.fp.v_max);
      nx[i] = x;
    }
    for (std::size_t i = 0; i < lane.size(); ++i) {
      Veh& v = lane[i];
      const double x0 = v.st.x;
      const double x1 = nx[i];
      LaneEvent ev;
      ev.index = i;
      ev.id = v.rec.id;
      bool report = false;
      if (!v.crossed && x0 <= L && x1 > L) {
        v.crossed = true;
        v.rec.cross = t + dt * (L - x0) / (x1 - x0);
        ev.cross = v.rec.cross;
        report = true;
        if (v.control == Control::Leader) v.control = Control::Free;
        if (record && v.rec.movement != 0 && !crossing_allowed(v.rec.movement, v.rec.cross))
          ++integrity.red_light_crossings;
      }
      if (record && v.planned() && !v.crossed && x0 > 0.0 && x0 < L && (x1 - x0) / dt <= 1e-6)
        ++integrity.planned_cav_stops;
      const double end = L + v.box;
      if (x0 < end && x1 >= end) {
        v.rec.exit = t + dt * (end - x0) / (x1 - x0);
        ev.exit = v.rec.exit;
        report = true;
      }
      v.st.advance(x1, dt);
      if (report) events.push_back(ev);
    }
    if (record)
      for (std::size_t i = 1; i < lane.size(); ++i)
        if (lane[i].st.x > lane[i - 1].st.x - cfg.geometry.vehicle_length + 1e-6) ++integrity.collisions;
    std::size_t w = 0;
    for (std::size_t i = 0; i < lane.size(); ++i) {
      if (lane[i].rec.exit == lane[i].rec.exit) {
        if (record) done.push_back(lane[i].rec);
        continue;
      }
      if (w != i) lane[w] = std::move(lane[i]);
      ++w;
    }
    lane.resize(w);
    return events;
  }

  /// Places `v` at the back of `lane` at or before `x`, at most at speed `speed`.
  void place(std::vector<Veh>& lane, Veh& v, double x, double speed) {
    if (!lane.empty()) {
      const Veh& last = lane.back();
      x = std::min(x, last.st.x - v.fp.jam);
      const double gap = last.st.x - v.fp.jam - x;
      const double dtau = v.fp.a_low_mag * (v.fp.tau + 0.5 * dt);
      const double safe = -dtau + std::sqrt(dtau * dtau + last.st.v * last.st.v + 2.0 * v.fp.a_low_mag * gap);
      speed = std::min(speed, std::max(safe, 0.0));
    }
    v.st.reset(x, speed, v.delay, dt);
  }

  // ---- arrivals ------------------------------------------------------------

  void spawn(double t) {
    const double buffer = cfg.geometry.buffer_length;
    while (next_arrival < arrivals.size() && arrivals[next_arrival].time <= t + 1e-9) {
      const ArrivalEvent& e = arrivals[next_arrival++];
      Veh v = make_vehicle(e);
      const auto arm = static_cast<std::size_t>(e.arm);
      if (e.kind == VehicleKind::HV && e.turn != Turn::Right)
        hv_arrival_times[static_cast<std::size_t>(v.rec.movement)].push_back(e.time);
      if (e.kind == VehicleKind::CAV && e.turn != Turn::Right) {
        if (bp())
          point_queue[arm].push_back(std::move(v));
        else if (no_buffer())
          awaiting_entry[arm].push_back(std::move(v));
        else
          held[arm].push_back(std::move(v));
        continue;
      }
      spawn_queue[arm][static_cast<std::size_t>(lane_of(v))].push_back(std::move(v));
    }
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t l = 0; l < 4; ++l) {
        auto& q = spawn_queue[a][l];
        auto& lane = lanes[a][l];
        while (!q.empty()) {
          Veh& v = q.front();
          const double x = -buffer + v.fp.v_max * std::max(t - v.rec.arrival, 0.0);
          if (!lane.empty() && lane.back().st.x - v.fp.jam < -buffer) break;
          place(lane, v, x, v.fp.v_max);
          lane.push_back(std::move(v));
          q.pop_front();
        }
      }
  }

  // ---- buffer-mode releases ------------------------------------------------

  /// Whether a vehicle entering at x = 0 with speed v0 can still stop behind
  /// the lane tail.
  bool entry_clear(const std::vector<Veh>& lane, const Veh& v, double v0) const {
    if (lane.empty()) return true;
    const Veh& last = lane.back();
    const double gap = last.st.x - v.fp.jam;
    if (gap < 0.0) return false;
    const double dtau = v.fp.a_low_mag * (std::max(v.fp.tau, dt) + 0.5 * dt);
    return v0 <= -dtau + std::sqrt(dtau * dtau + last.st.v * last.st.v + 2.0 * v.fp.a_low_mag * gap);
  }

  /// Puts a released platoon on the lane, or returns false while the lane
  /// tail is too close to the entry. A late leader is replanned from `t`.
  bool insert_platoon(Arm arm, std::vector<Veh>& members, const Platoon& p, long target, double t) {
    auto& lane = lanes[static_cast<std::size_t>(arm)][static_cast<std::size_t>(LaneKind::CAV)];
    if (!entry_clear(lane, members.front(), p.v0)) return false;
    TrajectoryPlan plan = p.leader_plan;
    double shift = 0.0;
    if (t > p.release + 1e-9) {
      std::optional<TrajectoryPlan> late;
      for (auto k = static_cast<std::size_t>(target); k < barriers.size() && !late; ++k) {
        const auto w = window(k, members.front().rec.movement);
        if (!w || w->end() < t) continue;
        late = try_plan_leader(t, p.v0, *w, cfg.kin);
        if (late && halts(*late)) late.reset();
        if (late) target = static_cast<long>(k);
      }
      if (!late) return false;
      shift = late->t_f - plan.t_f;
      plan = *late;
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      Veh& v = members[k];
      v.st.reset(-v.fp.jam * static_cast<double>(k), p.v0, v.delay, dt);
      v.control = k == 0 ? Control::Leader : Control::Follower;
      if (k == 0) v.plan = plan;
      v.plan_x0 = 0.0;
      v.target = target;
      v.planned_cross = p.crossing[k] + shift;
      lane.push_back(std::move(v));
    }
    return true;
  }

  void release_for(std::size_t target, double t) {
    if (bp() || no_buffer() || target >= barriers.size()) return;
    const Barrier& b = barriers[target];
    const Orientation o = b.a.orientation();
    std::uniform_real_distribution<double> draw(cfg.kin.v0_low, cfg.kin.v0_up);
    for (Arm arm : kArms) {
      if (orientation_of(arm) != o) continue;
      auto& list = held[static_cast<std::size_t>(arm)];
      if (list.empty()) continue;
      const double v0 = draw(speed_rng);
      if (v0 < cfg.kin.v0_low || v0 > cfg.kin.v0_up) ++integrity.entry_speed_warnings;
      std::array<std::vector<CavRequest>, 4> waiting;
      for (const auto& v : list)
        waiting[static_cast<std::size_t>(arm)].push_back(request_of(v, cfg.geometry.buffer_length, cfg.kin.v_max));
      const PlatoonAssignment pa = build_platoons_exact(waiting, b.a, b.start, t, v0, cfg);
      for (const auto& ap : pa.arms)
        for (const auto& p : ap.platoons) {
          std::vector<Veh> members;
          for (const auto& m : p.members) {
            auto it = std::find_if(list.begin(), list.end(), [&](const Veh& v) { return v.rec.id == m.id; });
            members.push_back(std::move(*it));
            list.erase(it);
          }
          const auto tgt = static_cast<long>(target);
          const bool queued = std::any_of(scheduled.begin(), scheduled.end(),
                                          [&](const Scheduled& s) { return s.arm == arm; });
          if (queued || p.release > t + 1e-9 || !insert_platoon(arm, members, p, tgt, t))
            scheduled.push_back({std::max(p.release, t), arm, std::move(members), p, tgt});
        }
    }
  }

  void run_scheduled(double t) {
    std::array<bool, 4> blocked{};
    for (std::size_t i = 0; i < scheduled.size();) {
      auto& sch = scheduled[i];
      auto& arm_blocked = blocked[static_cast<std::size_t>(sch.arm)];
      if (!arm_blocked && sch.time <= t + 1e-9 && insert_platoon(sch.arm, sch.members, sch.p, sch.target, t)) {
        scheduled.erase(scheduled.begin() + static_cast<long>(i));
      } else {
        arm_blocked = true;
        ++i;
      }
    }
  }

  // ---- no-buffer entries ---------------------------------------------------

  std::optional<double> predict_follow_cross(Arm arm, const Veh& candidate, double t) {
    std::vector<Veh> copy = lanes[static_cast<std::size_t>(arm)][static_cast<std::size_t>(LaneKind::CAV)];
    copy.push_back(candidate);
    return predict_cross(std::move(copy), candidate.rec.id, t);
  }

  /// Crossing time of `id` when the lane runs on undisturbed; nullopt if it
  /// would come to a stop first.
  std::optional<double> predict_cross(std::vector<Veh> copy, int id, double t) {
    for (double s = t; s < t + 400.0; s += dt) {
      for (const auto& ev : advance_lane(copy, LaneKind::CAV, s, false))
        if (ev.id == id && ev.cross == ev.cross) return ev.cross;
      const auto it = std::find_if(copy.begin(), copy.end(), [&](const Veh& v) { return v.rec.id == id; });
      if (it == copy.end()) break;
      if (it->st.v <= 1e-6 && it->st.x > 0.0) return std::nullopt;
    }
    return std::nullopt;
  }

  static bool halts(const TrajectoryPlan& p) {
    if (p.v_f <= 1e-6) return true;
    double at = p.t0;
    for (double d : p.durations) {
      at += d;
      if (d > 0.0 && at < p.t_f && p.speed(at) <= 1e-6) return true;
    }
    return false;
  }

  bool plan_as_leader(Veh& v, std::size_t first_barrier, double t) {
    if (L - v.st.x < 1.0) return false;
    KinematicParams kin = cfg.kin;
    kin.passing_zone_length = L - v.st.x;
    for (std::size_t k = first_barrier; k < barriers.size(); ++k) {
      const auto w = window(k, v.rec.movement);
      if (!w || w->end() < t) continue;
      if (auto plan = try_plan_leader(t, v.st.v, *w, kin); plan && !halts(*plan)) {
        v.control = Control::Leader;
        v.plan = *plan;
        v.plan_x0 = v.st.x;
        v.target = static_cast<long>(k);
        v.planned_cross = plan->t_f;
        return true;
      }
    }
    return false;
  }

  void enter_no_buffer(Veh v, double t) {
    const auto arm = v.rec.arm;
    auto& lane = lanes[static_cast<std::size_t>(arm)][static_cast<std::size_t>(LaneKind::CAV)];
    const double entry = v.rec.arrival + cfg.geometry.buffer_length / cfg.kin.v_max;
    place(lane, v, cfg.kin.v_max * std::max(t - entry, 0.0), cfg.kin.v_max);
    const Veh* prev = (!lane.empty() && !lane.back().crossed) ? &lane.back() : nullptr;
    if (prev && prev->control == Control::Pending) {
      v.control = Control::Pending;
      lane.push_back(std::move(v));
      return;
    }
    if (prev && prev->target >= 0) {
      const auto w = window(static_cast<std::size_t>(prev->target), v.rec.movement);
      if (w) {
        Veh probe = v;
        probe.control = Control::Follower;
        const auto c = predict_follow_cross(arm, probe, t);
        if (c && *c >= w->start - 1e-9 && *c <= w->end() + 1e-9) {
          v.control = Control::Follower;
          v.target = prev->target;
          v.planned_cross = *c;
          lane.push_back(std::move(v));
          return;
        }
      }
    }
    const std::size_t first = prev && prev->target >= 0 ? static_cast<std::size_t>(prev->target) + 1 : search_from();
    if (!plan_as_leader(v, first, t)) v.control = Control::Pending;
    lane.push_back(std::move(v));
  }

  void admit_no_buffer(double t) {
    if (!no_buffer()) return;
    const double to_entry = cfg.geometry.buffer_length / cfg.kin.v_max;
    for (auto& q : awaiting_entry)
      while (!q.empty() && q.front().rec.arrival + to_entry <= t + 1e-9) {
        Veh v = std::move(q.front());
        q.pop_front();
        enter_no_buffer(std::move(v), t);
      }
  }

  /// Joins lane[i] behind its predecessor when it still makes the target green.
  bool follow_into(std::vector<Veh>& lane, std::size_t i, long target, double t) {
    if (target < 0 || i == 0 || lane[i - 1].control == Control::Pending) return false;
    Veh& v = lane[i];
    const auto w = window(static_cast<std::size_t>(target), v.rec.movement);
    if (!w) return false;
    std::vector<Veh> copy = lane;
    copy[i].control = Control::Follower;
    const auto c = predict_cross(std::move(copy), v.rec.id, t);
    if (!c || *c < w->start - 1e-9 || *c > w->end() + 1e-9) return false;
    v.control = Control::Follower;
    v.target = target;
    v.planned_cross = *c;
    return true;
  }

  void replan_pending(double t) {
    if (!no_buffer()) return;
    for (auto& arm_lanes : lanes) {
      auto& lane = arm_lanes[static_cast<std::size_t>(LaneKind::CAV)];
      long after = -1;
      for (std::size_t i = 0; i < lane.size(); ++i) {
        Veh& v = lane[i];
        if (v.crossed) continue;
        if (v.control == Control::Pending && !follow_into(lane, i, after, t)) {
          const std::size_t first = after >= 0 ? static_cast<std::size_t>(after) + 1 : search_from();
          if (!plan_as_leader(v, first, t)) break;
        }
        after = std::max(after, v.target);
      }
    }
  }

  // ---- blue phases ---------------------------------------------------------

  void blue_discharges(double t) {
    if (!bp()) return;
    while (next_blue < barriers.size()) {
      const Barrier& b = barriers[next_blue];
      const double blue_start = b.start + b.steps * cfg.timing.dt;
      const double blue_end = blue_start + cfg.timing.g_min[0][0];
      if (blue_end > t + 1e-9) break;
      const PhaseWindow w{blue_start, cfg.timing.g_min[0][0]};
      const double to_line = (cfg.geometry.buffer_length + L) / cfg.kin.v_max;
      for (auto& q : point_queue) {
        std::vector<CavRequest> reqs;
        for (const auto& v : q) reqs.push_back(request_of(v, cfg.geometry.buffer_length, cfg.kin.v_max));
        const auto r = blue_discharge(reqs, w, cfg.bp_headway, to_line);
        for (const auto& [id, c] : r.crossings) {
          auto it = std::find_if(q.begin(), q.end(), [&](const Veh& v) { return v.rec.id == id; });
          it->rec.cross = c;
          it->rec.exit = c + it->box / cfg.kin.v_max;
          done.push_back(it->rec);
          q.erase(it);
        }
      }
      ++next_blue;
    }
  }

  // ---- rolling horizon -----------------------------------------------------

  std::array<double, 8> predicted_rates(double t) const {
    std::array<double, 8> r{};
    const double T = cfg.prediction_horizon;
    const double span = std::min(T, t);
    if (span <= 0.0) return r;
    for (int m = 1; m <= 8; ++m) {
      const auto& d = hv_arrival_times[static_cast<std::size_t>(m)];
      const auto count = std::count_if(d.begin(), d.end(), [&](double a) { return a > t - T && a <= t; });
      r[static_cast<std::size_t>(m - 1)] = static_cast<double>(count) / span * 3600.0;
    }
    return r;
  }

  QueueState measured_queues(double t) const {
    QueueState q{};
    const double to_line = (cfg.geometry.buffer_length + L) / cfg.kin.v_max;
    auto count = [&](const Veh& v) {
      if (v.rec.kind == VehicleKind::HV && v.rec.movement != 0 && !v.crossed && v.rec.arrival + to_line <= t)
        q[static_cast<std::size_t>(v.rec.movement - 1)] += 1.0;
    };
    for (std::size_t a = 0; a < 4; ++a)
      for (LaneKind l : {LaneKind::HVLeft, LaneKind::HVThrough}) {
        for (const auto& v : lanes[a][static_cast<std::size_t>(l)]) count(v);
        for (const auto& v : spawn_queue[a][static_cast<std::size_t>(l)]) count(v);
      }
    return q;
  }

  std::array<std::vector<CavRequest>, 4> known_cavs(double t) const {
    std::array<std::vector<CavRequest>, 4> out;
    const double buffer = cfg.geometry.buffer_length;
    const double vm = cfg.kin.v_max;
    for (std::size_t a = 0; a < 4; ++a) {
      if (no_buffer()) {
        for (const auto& v : lanes[a][static_cast<std::size_t>(LaneKind::CAV)])
          if (v.control == Control::Pending) out[a].push_back(request_of(v, buffer, vm));
        for (const auto& v : awaiting_entry[a]) out[a].push_back(request_of(v, buffer, vm));
      } else {
        for (const auto& v : held[a]) out[a].push_back(request_of(v, buffer, vm));
      }
    }
    for (std::size_t i = next_arrival; i < arrivals.size() && arrivals[i].time <= t + cfg.prediction_horizon; ++i) {
      const auto& e = arrivals[i];
      if (e.kind != VehicleKind::CAV || e.turn == Turn::Right) continue;
      out[static_cast<std::size_t>(e.arm)].push_back(CavRequest{e.id, e.arm, e.turn, e.time, e.time + buffer / vm});
    }
    return out;
  }

  void rolling_tick(std::size_t b, double t) {
    const Barrier& b1 = barriers[b];
    const Barrier& b2 = barriers[b + 1];
    const double step = cfg.timing.dt;
    SignalPlan next;
    if (opts.fixed_cycle) {
      next = bootstrap_cycle(barrier_end(b + 1));
      commit(next, b2.a);
      return;
    }
    const auto rate = predicted_rates(t);
    std::array<double, 8> sat{};
    for (int m = 1; m <= 8; ++m) sat[static_cast<std::size_t>(m - 1)] = cfg.saturation(m);
    const int live_steps = b1.steps + b1.extra + b2.steps + b2.extra;
    const auto live = MovementFlowProfile::constant(rate, sat, live_steps, step, measured_queues(t));
    const auto r1 = evolve_barrier(b1.a, b1.steps, live.initial, live, 0, cfg.timing, b1.extra);
    const auto r2 = evolve_barrier(b2.a, b2.steps, r1.final, live, b1.steps + b1.extra, cfg.timing, b2.extra);

    OptimizerContext ctx;
    ctx.cfg = cfg;
    ctx.start_time = barrier_end(b + 1);
    ctx.first_release = b2.start;
    ctx.previous = b2.a;
    const int horizon =
        std::max(0, static_cast<int>(std::floor((t + cfg.prediction_horizon - ctx.start_time) / step + 1e-9)));
    ctx.hv = MovementFlowProfile::constant(rate, sat, horizon, step, r2.final);
    ctx.cavs = known_cavs(t);

    const auto clock_start = std::chrono::steady_clock::now();
    CycleSolution sol;
    if (bp())
      sol = bp_plan(ctx).solution;
    else
      sol = solve_cycle(ctx);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    ++integrity.solves;
    integrity.max_solve_seconds = std::max(integrity.max_solve_seconds, secs);
    if (sol.second.tail.residual) ++integrity.residual_solves;
    if (secs > cfg.solve_budget) {
      ++integrity.fallback_solves;
      next.start_time = ctx.start_time;
      next.extra_steps_after_barrier = blue_steps();
      next.barriers = {{b1.steps, b1.a}, {b2.steps, b2.a}};
    } else {
      next = sol.cycle;
    }
    commit(next, b2.a);
  }

  void on_barrier_start(std::size_t b, double t) {
    if (b % 2 == 0) {
      release_for(b + 1, t);
      rolling_tick(b, t);
      replan_pending(t);
    } else {
      release_for(b + 1, t);
    }
  }

  // ---- main loop -----------------------------------------------------------

  void step() {
    const double t = now();
    while (next_barrier < barriers.size() && barriers[next_barrier].start <= t + dt / 2) {
      const std::size_t b = next_barrier++;
      on_barrier_start(b, t);
    }
    run_scheduled(t);
    spawn(t);
    admit_no_buffer(t);
    for (std::size_t a = 0; a < 4; ++a)
      for (LaneKind l : kLanes) advance_lane(lanes[a][static_cast<std::size_t>(l)], l, t, true);
    ++n;
    blue_discharges(now());
    if (opts.keep_trajectories) sample(now());
  }

  void sample(double t) {
    const long every = std::max(1L, std::lround(opts.trajectory_sample / dt));
    if (n % every != 0) return;
    for (std::size_t a = 0; a < 4; ++a)
      for (LaneKind l : kLanes)
        for (const auto& v : lanes[a][static_cast<std::size_t>(l)])
          samples.push_back({t, v.rec.id, v.rec.kind, v.rec.arm, l, v.st.x, v.st.v});
  }

  std::vector<VehicleRecord> all_records() const {
    std::vector<VehicleRecord> out = done;
    auto add = [&](const Veh& v) { out.push_back(v.rec); };
    for (std::size_t a = 0; a < 4; ++a) {
      for (const auto& l : lanes[a])
        for (const auto& v : l) add(v);
      for (const auto& q : spawn_queue[a])
        for (const auto& v : q) add(v);
      for (const auto& v : held[a]) add(v);
      for (const auto& v : awaiting_entry[a]) add(v);
      for (const auto& v : point_queue[a]) add(v);
    }
    for (const auto& s : scheduled)
      for (const auto& v : s.members) add(v);
    std::sort(out.begin(), out.end(), [](const VehicleRecord& x, const VehicleRecord& y) { return x.id < y.id; });
    return out;
  }

  MetricsReport report() const {
    MetricsReport r;
    r.seed = seed;
    r.controller = cfg.controller;
    r.demand_factor = cfg.demand.demand_factor;
    r.cav_penetration = cfg.demand.cav_penetration;
    r.left_share = cfg.demand.left_share;
    r.process = cfg.demand.process;
    r.integrity = integrity;
    const double t_end = now();
    const double w0 = cfg.warmup;
    const double span = std::max(t_end - w0, 1e-9);
    std::array<double, 12> delay_sum{};
    auto tally = [&](ClassMetrics& c, double& sum, const VehicleRecord& v) {
      if (v.exit >= w0) ++c.exited;
      if (v.arrival >= w0) {
        ++c.delay_samples;
        sum += v.delay();
      }
    };
    const auto recs = all_records();
    for (const auto& v : recs) {
      if (v.arrival < t_end) ++r.generated;
      if (v.arrival >= w0 && v.arrival < t_end) r.demand_vph += 1.0;
      if (!v.exited_by(t_end)) continue;
      ++r.exited;
      tally(r.all, delay_sum[0], v);
      if (v.kind == VehicleKind::HV)
        tally(r.hv, delay_sum[1], v);
      else
        tally(r.cav, delay_sum[2], v);
      const auto m = static_cast<std::size_t>(v.movement);
      tally(r.movement[m], delay_sum[3 + m], v);
    }
    r.in_system = r.generated - r.exited;
    r.demand_vph *= 3600.0 / span;
    auto finish = [&](ClassMetrics& c, double sum) {
      c.throughput = static_cast<double>(c.exited) * 3600.0 / span;
      c.mean_delay = c.delay_samples > 0 ? sum / static_cast<double>(c.delay_samples) : 0.0;
    };
    finish(r.all, delay_sum[0]);
    finish(r.hv, delay_sum[1]);
    finish(r.cav, delay_sum[2]);
    for (std::size_t m = 0; m < 9; ++m) finish(r.movement[m], delay_sum[3 + m]);
    return r;
  }

  std::vector<LaneVehicle> lane_view(Arm arm, LaneKind kind) const {
    std::vector<LaneVehicle> out;
    for (const auto& v : lanes[static_cast<std::size_t>(arm)][static_cast<std::size_t>(kind)])
      out.push_back({v.rec.id, v.st.x, v.st.v, v.planned()});
    return out;
  }

  const Veh* find(int id) const {
    for (const auto& arm : lanes)
      for (const auto& l : arm)
        for (const auto& v : l)
          if (v.rec.id == id) return &v;
    return nullptr;
  }
};

Simulation::Simulation(ExperimentConfig cfg, std::vector<ArrivalEvent> arrivals, std::uint64_t seed, RunOptions opts)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(arrivals), seed, std::move(opts))) {}

Simulation::~Simulation() = default;

void Simulation::step() { impl_->step(); }

void Simulation::run_until(double t) {
  while (impl_->now() < t - 1e-9) impl_->step();
}

double Simulation::clock() const { return impl_->now(); }

std::vector<LaneVehicle> Simulation::lane(Arm arm, LaneKind kind) const { return impl_->lane_view(arm, kind); }

const IntegrityReport& Simulation::integrity() const { return impl_->integrity; }

const std::vector<SignalPlan>& Simulation::cycles() const { return impl_->cycles; }

std::optional<double> Simulation::planned_crossing(int id) const {
  const auto* v = impl_->find(id);
  if (!v || v->planned_cross != v->planned_cross) return std::nullopt;
  return v->planned_cross;
}

std::optional<TrajectoryPlan> Simulation::leader_plan(int id) const {
  const auto* v = impl_->find(id);
  if (!v) return std::nullopt;
  return v->plan;
}

MetricsReport Simulation::report() const { return impl_->report(); }

RunResult Simulation::finish() {
  RunResult r;
  r.metrics = impl_->report();
  if (impl_->opts.keep_vehicles) r.vehicles = impl_->all_records();
  r.trajectories = std::move(impl_->samples);
  r.cycles = impl_->cycles;
  return r;
}

RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  cfg.validate();
  Simulation sim(cfg, generate_demand(cfg.demand, cfg.duration, seed), seed, opts);
  sim.run_until(cfg.duration);
  return sim.finish();
}

}  // namespace spdl
