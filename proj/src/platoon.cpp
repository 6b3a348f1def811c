#include "spdl/platoon.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace spdl {

namespace {

constexpr double kEps = 1e-9;

bool in_window(double t, const PhaseWindow& w) { return t >= w.start - kEps && t <= w.end() + kEps; }

using ChainProvider = std::function<std::shared_ptr<const ChainProfile>(double v0, double start_rel, double end_rel)>;

std::optional<TrajectoryPlan> plan_from_entry(double v0, double start_rel, double end_rel,
                                              const KinematicParams& kin) {
  return try_plan_leader(0.0, v0, PhaseWindow{start_rel, end_rel - start_rel}, kin);
}

double chain_horizon(const TrajectoryPlan& leader, int members) { return leader.t_f + 120.0 + 2.0 * members; }

using Windows = std::array<PhaseWindow, 9>;

Windows served_windows(const PhaseAssignment& a, double barrier_start, const TimingParams& tp) {
  Windows w{};
  for (int r = 1; r <= 2; ++r)
    for (int ph = 1; ph <= 2; ++ph) {
      const PhaseWindow rel = slot_window_steps(a, r, ph, tp);
      w[static_cast<std::size_t>(a.movement[r - 1][ph - 1])] = {barrier_start + rel.start * tp.dt, rel.duration * tp.dt};
    }
  return w;
}

const PhaseWindow& window_for(const Windows& w, const CavRequest& c) {
  return w[static_cast<std::size_t>(movement_id(c.arm, c.turn))];
}

Platoon make_platoon(const std::vector<CavRequest>& order, std::size_t first, const ChainProfile& chain,
                     std::size_t chain_offset, double release, double v0, const Windows& windows,
                     std::size_t limit) {
  Platoon p;
  p.release = release;
  p.v0 = v0;
  p.leader_plan = chain.leader;
  p.leader_plan.t0 = release;
  for (auto& s : p.leader_plan.segments) s.end_time += release;
  p.leader_plan.t_f += release;
  p.members.reserve(std::min(limit, order.size() - first));
  p.crossing.reserve(p.members.capacity());
  for (std::size_t i = first; i < order.size() && p.members.size() < limit; ++i) {
    const std::size_t k = chain_offset + (i - first);
    if (k >= chain.cross.size()) break;
    const double c = release + chain.cross[k];
    if (!in_window(c, window_for(windows, order[i]))) break;
    p.members.push_back(order[i]);
    p.crossing.push_back(c);
  }
  return p;
}

ArmPlatoons arm_platoons(Arm arm, const std::vector<CavRequest>& waiting, const PhaseAssignment& a,
                         const Windows& windows, double release, double v0, const ExperimentConfig& cfg,
                         const ChainProvider& chain_for) {
  ArmPlatoons out;
  out.arm = arm;
  std::vector<CavRequest> eligible;
  eligible.reserve(std::min(waiting.size(), static_cast<std::size_t>(cfg.max_platoon)));
  for (const auto& c : waiting)
    if (c.entry_ready <= release + kEps && static_cast<int>(eligible.size()) < cfg.max_platoon)
      eligible.push_back(c);
  if (eligible.empty()) return out;

  auto window_of = [&](const CavRequest& c) { return window_for(windows, c); };
  const auto limit = static_cast<std::size_t>(cfg.max_platoon);

  if (classify_case(a) == BarrierCase::Case1) {
    out.kind = PlatoonKind::Case1;
    const PhaseWindow w = window_of(eligible.front());
    auto chain = chain_for(v0, w.start - release, w.end() - release);
    if (!chain) return out;
    Platoon p = make_platoon(eligible, 0, *chain, 0, release, v0, windows, limit);
    if (!p.members.empty()) out.platoons.push_back(std::move(p));
    return out;
  }

  const Turn lead = leading_turn(a);
  std::vector<CavRequest> order;
  for (const auto& c : eligible)
    if (c.turn == lead) order.push_back(c);
  const std::size_t n_lead_group = order.size();
  for (const auto& c : eligible)
    if (c.turn != lead) order.push_back(c);

  out.kind = PlatoonKind::Case2OnePlatoon;
  std::size_t n_a = 0;
  std::shared_ptr<const ChainProfile> chain_a;
  if (n_lead_group > 0) {
    const PhaseWindow w = window_of(order.front());
    chain_a = chain_for(v0, w.start - release, w.end() - release);
    if (chain_a) {
      std::vector<CavRequest> group_a(order.begin(), order.begin() + static_cast<long>(n_lead_group));
      Platoon pa = make_platoon(group_a, 0, *chain_a, 0, release, v0, windows, limit);
      n_a = pa.members.size();
      if (n_a > 0) out.platoons.push_back(std::move(pa));
    }
  }
  if (n_lead_group == order.size()) return out;

  std::vector<CavRequest> group_b(order.begin() + static_cast<long>(n_lead_group), order.end());
  const PhaseWindow wb = window_of(group_b.front());
  if (n_a > 0) {
    const std::size_t room = limit - n_a;
    if (n_a < chain_a->cross.size() && in_window(release + chain_a->cross[n_a], wb)) {
      Platoon tail = make_platoon(group_b, 0, *chain_a, n_a, release, v0, windows, room);
      auto& head = out.platoons.front();
      head.members.insert(head.members.end(), tail.members.begin(), tail.members.end());
      head.crossing.insert(head.crossing.end(), tail.crossing.begin(), tail.crossing.end());
      return out;
    }
    out.kind = PlatoonKind::Case2TwoPlatoons;
    const double t_b = release + chain_a->clear[n_a - 1];
    if (!std::isfinite(t_b)) return out;
    auto chain_b = chain_for(v0, wb.start - t_b, wb.end() - t_b);
    if (!chain_b) return out;
    Platoon pb = make_platoon(group_b, 0, *chain_b, 0, t_b, v0, windows, room);
    if (!pb.members.empty()) out.platoons.push_back(std::move(pb));
    return out;
  }
  auto chain_b = chain_for(v0, wb.start - release, wb.end() - release);
  if (!chain_b) return out;
  Platoon pb = make_platoon(group_b, 0, *chain_b, 0, release, v0, windows, limit);
  if (!pb.members.empty()) out.platoons.push_back(std::move(pb));
  return out;
}

PlatoonAssignment build_with(const std::array<std::vector<CavRequest>, 4>& waiting, const PhaseAssignment& a,
                             double barrier_start, double release, double v0, const ExperimentConfig& cfg,
                             const ChainProvider& chain_for) {
  PlatoonAssignment pa;
  const Orientation o = a.orientation();
  const Windows windows = served_windows(a, barrier_start, cfg.timing);
  for (Arm arm : kArms) {
    if (orientation_of(arm) != o) continue;
    ArmPlatoons ap =
        arm_platoons(arm, waiting[static_cast<std::size_t>(arm)], a, windows, release, v0, cfg, chain_for);
    if (!ap.platoons.empty()) pa.arms.push_back(std::move(ap));
  }
  return pa;
}

}  // namespace

const char* to_string(PlatoonKind k) {
  switch (k) {
    case PlatoonKind::Case1: return "case1";
    case PlatoonKind::Case2TwoPlatoons: return "case2-two";
    case PlatoonKind::Case2OnePlatoon: return "case2-one";
  }
  return "?";
}

BarrierCase classify_case(const PhaseAssignment& a) {
  const bool r1_left_first = movement(a.movement[0][0]).turn == Turn::Left;
  const bool r2_left_first = movement(a.movement[1][0]).turn == Turn::Left;
  return r1_left_first == r2_left_first ? BarrierCase::Case2 : BarrierCase::Case1;
}

Turn leading_turn(const PhaseAssignment& a) { return movement(a.movement[0][0]).turn; }

std::size_t PlatoonAssignment::size() const {
  std::size_t n = 0;
  for (const auto& ap : arms)
    for (const auto& p : ap.platoons) n += p.members.size();
  return n;
}

std::vector<int> PlatoonAssignment::served_ids() const {
  std::vector<int> ids;
  for (const auto& ap : arms)
    for (const auto& p : ap.platoons)
      for (const auto& m : p.members) ids.push_back(m.id);
  return ids;
}

PhaseWindow movement_window(const PhaseAssignment& a, int movement_id, double barrier_start, const TimingParams& tp) {
  const auto slot = a.slot_of(movement_id);
  if (!slot) throw std::invalid_argument("movement " + std::to_string(movement_id) + " is not served by this barrier");
  const PhaseWindow w = slot_window_steps(a, slot->first, slot->second, tp);
  return {barrier_start + w.start * tp.dt, w.duration * tp.dt};
}

ChainProfile simulate_chain(const TrajectoryPlan& leader, int members, const FollowParams& fp, double dt_sim,
                            double horizon) {
  ChainProfile out;
  out.leader = leader;
  const auto n = static_cast<std::size_t>(std::max(members, 1));
  const double L = leader.length;
  const double jam = fp.jam;
  const double inf = std::numeric_limits<double>::infinity();
  out.cross.assign(n, inf);
  out.clear.assign(n, inf);
  out.cross[0] = leader.t_f - leader.t0;

  const auto delay = static_cast<std::size_t>(std::llround(fp.tau / dt_sim));
  std::vector<FollowState> st(n);
  for (std::size_t k = 0; k < n; ++k) st[k].reset(-jam * static_cast<double>(k), leader.v0, delay, dt_sim);
  std::vector<double> nx(n);

  std::size_t crossed = 1;
  std::size_t cleared = 0;
  for (long i = 0; crossed < n || cleared < n; ++i) {
    const double t = static_cast<double>(i) * dt_sim;
    if (t > horizon) break;
    const double t_next = static_cast<double>(i + 1) * dt_sim;
    nx[0] = leader.position(leader.t0 + t_next);
    for (std::size_t k = 1; k < n; ++k)
      nx[k] = follow_update(st[k].x, st[k].v, st[k - 1].view(nx[k - 1], delay), dt_sim, fp);
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0 && st[k].x < L && nx[k] >= L) {
        out.cross[k] = t + dt_sim * (L - st[k].x) / (nx[k] - st[k].x);
        ++crossed;
      }
      if (st[k].x < jam && nx[k] >= jam) {
        out.clear[k] = t_next;
        ++cleared;
      }
      st[k].advance(nx[k], dt_sim);
    }
  }
  return out;
}

ChainCache::ChainCache(const ExperimentConfig& cfg, int members)
    : kin_(cfg.kin), fp_(cfg.follow_params(VehicleKind::CAV)), dt_sim_(cfg.dt_sim), members_(members) {}

std::shared_ptr<const ChainProfile> ChainCache::get(double v0, double start_rel, double end_rel) {
  const PassingTimeBounds b = passing_time_bounds(v0, kin_);
  if (b.low > end_rel + kEps) return nullptr;
  if (b.up && start_rel > *b.up + kEps) return nullptr;
  const double target = std::max(start_rel, b.low);
  const std::pair<long long, long long> key{std::llround(target * 1e6), std::llround(v0 * 1e6)};
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
  }
  std::shared_ptr<const ChainProfile> chain;
  if (auto plan = plan_from_entry(v0, start_rel, end_rel, kin_))
    chain = std::make_shared<const ChainProfile>(
        simulate_chain(*plan, members_, fp_, dt_sim_, chain_horizon(*plan, members_)));
  std::lock_guard<std::mutex> lock(mu_);
  return map_.emplace(key, chain).first->second;
}

std::size_t ChainCache::entries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.size();
}

PlatoonAssignment build_platoons(const std::array<std::vector<CavRequest>, 4>& waiting, const PhaseAssignment& a,
                                 double barrier_start, double release, double v0, const ExperimentConfig& cfg,
                                 ChainCache& cache) {
  return build_with(waiting, a, barrier_start, release, v0, cfg,
                    [&](double v, double s, double e) { return cache.get(v, s, e); });
}

PlatoonAssignment build_platoons_exact(const std::array<std::vector<CavRequest>, 4>& waiting,
                                       const PhaseAssignment& a, double barrier_start, double release, double v0,
                                       const ExperimentConfig& cfg) {
  const FollowParams fp = cfg.follow_params(VehicleKind::CAV);
  return build_with(waiting, a, barrier_start, release, v0, cfg,
                    [&](double v, double s, double e) -> std::shared_ptr<const ChainProfile> {
                      auto plan = plan_from_entry(v, s, e, cfg.kin);
                      if (!plan) return nullptr;
                      return std::make_shared<const ChainProfile>(
                          simulate_chain(*plan, cfg.max_platoon, fp, cfg.dt_sim, chain_horizon(*plan, cfg.max_platoon)));
                    });
}

PlatoonAssignment build_platoons_no_buffer(const std::array<std::vector<CavRequest>, 4>& waiting,
                                           const PhaseAssignment& a, double barrier_start,
                                           const ExperimentConfig& cfg) {
  PlatoonAssignment pa;
  const Windows windows = served_windows(a, barrier_start, cfg.timing);
  const double vm = cfg.kin.v_max;
  const double L = cfg.kin.passing_zone_length;
  const double headway = cfg.geometry.jam_plus_length / vm;
  for (Arm arm : kArms) {
    if (orientation_of(arm) != a.orientation()) continue;
    ArmPlatoons ap;
    ap.arm = arm;
    Platoon p;
    p.v0 = vm;
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& c : waiting[static_cast<std::size_t>(arm)]) {
      if (static_cast<int>(p.members.size()) >= cfg.max_platoon) break;
      const PhaseWindow& w = window_for(windows, c);
      const double t = std::max({w.start, c.entry_ready + L / vm, prev + headway});
      if (t > w.end() + kEps) break;
      if (p.members.empty()) {
        auto plan = try_plan_leader(c.entry_ready, vm, w, cfg.kin);
        if (!plan) break;
        p.release = c.entry_ready;
        p.leader_plan = *plan;
      }
      p.members.push_back(c);
      p.crossing.push_back(t);
      prev = t;
    }
    if (!p.members.empty()) {
      ap.platoons.push_back(std::move(p));
      pa.arms.push_back(std::move(ap));
    }
  }
  return pa;
}

CavDelay cav_delay(const PlatoonAssignment& pa, const ExperimentConfig& cfg) {
  CavDelay out;
  const double free = (cfg.geometry.buffer_length + cfg.kin.passing_zone_length) / cfg.kin.v_max;
  for (const auto& ap : pa.arms)
    for (const auto& p : ap.platoons)
      for (std::size_t i = 0; i < p.members.size(); ++i) {
        const double travel = p.crossing[i] - p.members[i].arrival;
        out.total += std::max(travel - free, 0.0);
        out.travel_time.emplace_back(p.members[i].id, travel);
      }
  return out;
}

}  // namespace spdl
