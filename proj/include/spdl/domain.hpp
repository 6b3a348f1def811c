#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Approach arm, named by the side of the intersection vehicles come from.
enum class Arm : std::uint8_t { East = 0, West = 1, North = 2, South = 3 };
enum class Turn : std::uint8_t { Left = 0, Through = 1, Right = 2 };
enum class Orientation : std::uint8_t { EastWest = 0, NorthSouth = 1 };
enum class VehicleKind : std::uint8_t { HV = 0, CAV = 1 };

inline constexpr std::array<Arm, 4> kArms{Arm::East, Arm::West, Arm::North, Arm::South};

inline constexpr Orientation orientation_of(Arm a) {
  return (a == Arm::East || a == Arm::West) ? Orientation::EastWest : Orientation::NorthSouth;
}
inline constexpr Orientation opposite(Orientation o) {
  return o == Orientation::EastWest ? Orientation::NorthSouth : Orientation::EastWest;
}

const char* to_string(Arm a);
const char* to_string(Turn t);
const char* to_string(Orientation o);
const char* to_string(VehicleKind k);

/// A signalized NEMA movement (1..8) or an unsignalized right turn.
///
/// Numbering follows the ring layout M1 = {1,2,3,4}, M2 = {5,6,7,8};
/// {1,2,5,6} serve East-West, {3,4,7,8} serve North-South. Left turns are
/// 2,4,5,8 and throughs are 1,3,6,7, so a ring always holds one arm's left and
/// the opposing arm's through.
struct Movement {
  int id = 0;  // 1..8 for signalized movements, 0 for right turns
  Arm arm = Arm::East;
  Turn turn = Turn::Through;

  [[nodiscard]] bool signalized() const { return id != 0; }
  [[nodiscard]] int ring() const { return id <= 4 ? 1 : 2; }
  [[nodiscard]] Orientation orientation() const { return orientation_of(arm); }
  friend bool operator==(const Movement&, const Movement&) = default;
};

/// Table for movement ids 1..8.
const Movement& movement(int id);
/// Signalized movement id for (arm, left|through); throws for right turns.
int movement_id(Arm arm, Turn turn);
Movement right_turn(Arm arm);

/// The two movements of ring r (1 or 2) that serve orientation o.
std::array<int, 2> ring_movements(int ring, Orientation o);

/// Per-(ring, phase) timing. Indexing is [ring-1][phase-1]; all values in seconds.
struct TimingParams {
  std::array<std::array<double, 2>, 2> g_min{};
  std::array<std::array<double, 2>, 2> g_max{};
  std::array<std::array<double, 2>, 2> green_interval{};
  double dt = 1.0;
  double all_red = 1.0;  // tail of green_interval that is all-red; the rest is yellow

  static TimingParams uniform(double g_min, double g_max, double interval, double dt = 1.0);

  /// Seconds -> integral steps; throws ConfigError if not an integer multiple of dt.
  [[nodiscard]] int to_steps(double seconds) const;
  [[nodiscard]] int min_green_steps(int ring, int phase) const { return to_steps(g_min[ring - 1][phase - 1]); }
  [[nodiscard]] int max_green_steps(int ring, int phase) const { return to_steps(g_max[ring - 1][phase - 1]); }
  [[nodiscard]] int interval_steps(int ring, int phase) const {
    return to_steps(green_interval[ring - 1][phase - 1]);
  }
  [[nodiscard]] double yellow(int ring, int phase) const {
    return green_interval[ring - 1][phase - 1] - all_red;
  }
  void validate() const;
};

struct KinematicParams {
  double v_max = 14.0;
  double a_up = 2.0;
  double a_low_mag = 2.0;
  double v0_low = 3.0;
  double v0_up = 14.0;
  double passing_zone_length = 500.0;

  void validate() const;
};

/// alpha_j and g_j for one barrier group: which movement each (ring, phase)
/// slot serves and its green in steps. Indexing is [ring-1][phase-1].
struct PhaseAssignment {
  std::array<std::array<int, 2>, 2> movement{};
  std::array<std::array<int, 2>, 2> green{};

  /// Orientation served by ring 1's first slot.
  [[nodiscard]] Orientation orientation() const { return spdl::movement(movement[0][0]).orientation(); }
  /// Slot (phase index 1|2) and ring serving a movement, if present.
  [[nodiscard]] std::optional<std::pair<int, int>> slot_of(int movement_id) const;
  /// Lexicographic alpha encoding used for tie-breaks.
  [[nodiscard]] std::array<int, 4> alpha_key() const {
    return {movement[0][0], movement[0][1], movement[1][0], movement[1][1]};
  }
  friend bool operator==(const PhaseAssignment&, const PhaseAssignment&) = default;
};

struct BarrierPlan {
  int steps = 0;  // x_j
  PhaseAssignment assignment;
  friend bool operator==(const BarrierPlan&, const BarrierPlan&) = default;
};

/// Green window of one phase in absolute seconds: [start, end).
struct PhaseWindow {
  double start = 0.0;
  double duration = 0.0;
  [[nodiscard]] double end() const { return start + duration; }
};

struct SignalPlan {
  double start_time = 0.0;  // seconds, start of the first barrier
  std::vector<BarrierPlan> barriers;
  /// Extra all-red steps appended after every barrier (blue phase block for BP).
  int extra_steps_after_barrier = 0;

  /// Barrier start in seconds.
  [[nodiscard]] double barrier_start(std::size_t j, const TimingParams& tp) const;
  [[nodiscard]] double end_time(const TimingParams& tp) const;
  /// t^g of slot (ring, phase) in barrier j.
  [[nodiscard]] double phase_start(std::size_t j, int ring, int phase, const TimingParams& tp) const;
  [[nodiscard]] PhaseWindow phase_window(std::size_t j, int ring, int phase, const TimingParams& tp) const;
  /// Green window of a signalized movement in barrier j, if that barrier serves it.
  [[nodiscard]] std::optional<PhaseWindow> movement_window(std::size_t j, int movement_id,
                                                           const TimingParams& tp) const;
};

/// Window of a slot relative to the barrier start, in steps.
PhaseWindow slot_window_steps(const PhaseAssignment& a, int ring, int phase, const TimingParams& tp);

struct PlanViolation {
  std::size_t barrier = 0;
  int equation = 0;  // constraint index
  std::string message;
};

/// Checks the ring-barrier constraints for every barrier. `previous` is the
/// assignment of the barrier immediately preceding the plan (the live cycle's
/// second barrier), used for the alternation constraint on barrier 0.
std::vector<PlanViolation> validate_plan(const SignalPlan& plan, const TimingParams& params,
                                         const std::optional<PhaseAssignment>& previous = std::nullopt);

}  // namespace spdl
