#include "spdl/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spdl {

const char* to_string(Arm a) {
  switch (a) {
    case Arm::East: return "E";
    case Arm::West: return "W";
    case Arm::North: return "N";
    case Arm::South: return "S";
  }
  return "?";
}

const char* to_string(Turn t) {
  switch (t) {
    case Turn::Left: return "left";
    case Turn::Through: return "through";
    case Turn::Right: return "right";
  }
  return "?";
}

const char* to_string(Orientation o) { return o == Orientation::EastWest ? "EW" : "NS"; }

const char* to_string(VehicleKind k) { return k == VehicleKind::CAV ? "CAV" : "HV"; }

namespace {

constexpr std::array<Movement, 8> kMovements{{
    {1, Arm::West, Turn::Through},
    {2, Arm::East, Turn::Left},
    {3, Arm::South, Turn::Through},
    {4, Arm::North, Turn::Left},
    {5, Arm::West, Turn::Left},
    {6, Arm::East, Turn::Through},
    {7, Arm::North, Turn::Through},
    {8, Arm::South, Turn::Left},
}};

}  // namespace

const Movement& movement(int id) {
  if (id < 1 || id > 8) throw std::out_of_range("movement id must be 1..8, got " + std::to_string(id));
  return kMovements[static_cast<std::size_t>(id - 1)];
}

int movement_id(Arm arm, Turn turn) {
  for (const auto& m : kMovements)
    if (m.arm == arm && m.turn == turn) return m.id;
  throw std::invalid_argument("right turns are not signalized");
}

Movement right_turn(Arm arm) { return Movement{0, arm, Turn::Right}; }

std::array<int, 2> ring_movements(int ring, Orientation o) {
  const int base = (ring == 1 ? 1 : 5) + (o == Orientation::EastWest ? 0 : 2);
  return {base, base + 1};
}

TimingParams TimingParams::uniform(double g_min, double g_max, double interval, double dt) {
  TimingParams tp;
  for (auto& r : tp.g_min) r.fill(g_min);
  for (auto& r : tp.g_max) r.fill(g_max);
  for (auto& r : tp.green_interval) r.fill(interval);
  tp.dt = dt;
  return tp;
}

int TimingParams::to_steps(double seconds) const {
  const double q = seconds / dt;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9)
    throw ConfigError("duration " + std::to_string(seconds) + " s is not a multiple of dt = " +
                      std::to_string(dt) + " s");
  return static_cast<int>(r);
}

void TimingParams::validate() const {
  if (!(dt > 0)) throw ConfigError("dt must be positive");
  for (int r = 0; r < 2; ++r) {
    for (int p = 0; p < 2; ++p) {
      if (g_min[r][p] <= 0) throw ConfigError("g_min must be positive");
      if (g_min[r][p] > g_max[r][p]) throw ConfigError("g_min must not exceed g_max");
      if (green_interval[r][p] < 0) throw ConfigError("green_interval must be non-negative");
      if (all_red < 0 || all_red > green_interval[r][p])
        throw ConfigError("all_red must lie within the green interval");
      (void)to_steps(g_min[r][p]);
      (void)to_steps(g_max[r][p]);
      (void)to_steps(green_interval[r][p]);
    }
  }
}

void KinematicParams::validate() const {
  if (!(a_up > 0)) throw ConfigError("a_up must be positive");
  if (!(a_low_mag > 0)) throw ConfigError("a_low_mag must be positive");
  if (!(v0_low > 0 && v0_low <= v0_up && v0_up <= v_max))
    throw ConfigError("entry speeds must satisfy 0 < v0_low <= v0_up <= v_max");
  if (!(passing_zone_length > 0)) throw ConfigError("passing_zone_length must be positive");
}

std::optional<std::pair<int, int>> PhaseAssignment::slot_of(int movement_id) const {
  for (int r = 0; r < 2; ++r)
    for (int p = 0; p < 2; ++p)
      if (movement[r][p] == movement_id) return std::pair{r + 1, p + 1};
  return std::nullopt;
}

PhaseWindow slot_window_steps(const PhaseAssignment& a, int ring, int phase, const TimingParams& tp) {
  const int r = ring - 1;
  if (phase == 1) return {0.0, static_cast<double>(a.green[r][0])};
  const double start = a.green[r][0] + tp.interval_steps(ring, 1);
  return {start, static_cast<double>(a.green[r][1])};
}

double SignalPlan::barrier_start(std::size_t j, const TimingParams& tp) const {
  double t = start_time;
  for (std::size_t i = 0; i < j; ++i) t += (barriers[i].steps + extra_steps_after_barrier) * tp.dt;
  return t;
}

double SignalPlan::end_time(const TimingParams& tp) const { return barrier_start(barriers.size(), tp); }

double SignalPlan::phase_start(std::size_t j, int ring, int phase, const TimingParams& tp) const {
  return phase_window(j, ring, phase, tp).start;
}

PhaseWindow SignalPlan::phase_window(std::size_t j, int ring, int phase, const TimingParams& tp) const {
  const PhaseWindow rel = slot_window_steps(barriers.at(j).assignment, ring, phase, tp);
  return {barrier_start(j, tp) + rel.start * tp.dt, rel.duration * tp.dt};
}

std::optional<PhaseWindow> SignalPlan::movement_window(std::size_t j, int movement_id,
                                                       const TimingParams& tp) const {
  const auto slot = barriers.at(j).assignment.slot_of(movement_id);
  if (!slot) return std::nullopt;
  return phase_window(j, slot->first, slot->second, tp);
}

namespace {

bool in_ring(int m, int ring) { return ring == 1 ? (m >= 1 && m <= 4) : (m >= 5 && m <= 8); }

// The pairing constraints use E-W membership as the indicator.
bool is_ew(int m) { return m == 1 || m == 2 || m == 5 || m == 6; }

}  // namespace

std::vector<PlanViolation> validate_plan(const SignalPlan& plan, const TimingParams& params,
                                         const std::optional<PhaseAssignment>& previous) {
  if (plan.barriers.empty()) throw std::invalid_argument("validate_plan: empty plan");
  std::vector<PlanViolation> out;
  auto flag = [&](std::size_t j, int eq, std::string msg) { out.push_back({j, eq, std::move(msg)}); };

  for (std::size_t j = 0; j < plan.barriers.size(); ++j) {
    const auto& b = plan.barriers[j];
    const auto& a = b.assignment;
    bool structural_ok = true;
    for (int r = 1; r <= 2; ++r) {
      for (int p = 1; p <= 2; ++p) {
        const int m = a.movement[r - 1][p - 1];
        if (!in_ring(m, r)) {
          flag(j, 15, "slot (p=" + std::to_string(p) + ", r=" + std::to_string(r) + ") selects movement " +
                          std::to_string(m) + " outside M" + std::to_string(r));
          structural_ok = false;
        }
      }
      if (a.movement[r - 1][0] == a.movement[r - 1][1]) {
        flag(j, 16, "ring " + std::to_string(r) + " selects movement " + std::to_string(a.movement[r - 1][0]) +
                        " twice");
        structural_ok = false;
      }
    }
    if (structural_ok) {
      if (is_ew(a.movement[0][0]) != is_ew(a.movement[0][1])) flag(j, 17, "ring 1 mixes orientations");
      if (is_ew(a.movement[1][0]) != is_ew(a.movement[1][1])) flag(j, 18, "ring 2 mixes orientations");
      if (is_ew(a.movement[0][0]) != is_ew(a.movement[1][0])) flag(j, 19, "rings serve incompatible orientations");
      const PhaseAssignment* prev = nullptr;
      if (j > 0) prev = &plan.barriers[j - 1].assignment;
      else if (previous) prev = &*previous;
      if (prev && is_ew(prev->movement[0][0]) == is_ew(a.movement[0][0]))
        flag(j, 20, "same orientation as the preceding barrier group");
    }
    for (int r = 1; r <= 2; ++r) {
      int total = 0;
      for (int p = 1; p <= 2; ++p) {
        const int g = a.green[r - 1][p - 1];
        if (g < params.min_green_steps(r, p) || g > params.max_green_steps(r, p)) {
          std::ostringstream os;
          os << "green of (p=" << p << ", r=" << r << ") is " << g * params.dt << " s, outside ["
             << params.g_min[r - 1][p - 1] << ", " << params.g_max[r - 1][p - 1] << "]";
          flag(j, 21, os.str());
        }
        total += g + params.interval_steps(r, p);
      }
      if (total != b.steps)
        flag(j, 22, "ring " + std::to_string(r) + " sums to " + std::to_string(total) + " steps, barrier has " +
                        std::to_string(b.steps));
    }
  }
  return out;
}

}  // namespace spdl
