#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <deque>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "spdl/domain.hpp"

namespace spdl {

/// One constant-acceleration piece of a leader trajectory.
struct Segment {
  double accel = 0.0;     // m/s^2, one of +a_up, 0, -a_low_mag
  double end_time = 0.0;  // absolute seconds
};

/// Piecewise-constant-acceleration plan from the passing-zone entry (x = 0)
/// to the stop line (x = L).
struct TrajectoryPlan {
  double t0 = 0.0;
  double v0 = 0.0;
  double length = 0.0;
  std::vector<Segment> segments;  // non-empty segments only, at most 3
  double t_f = 0.0;
  double v_f = 0.0;
  /// Full three-slot sign pattern and durations the solver selected
  /// (zero-length slots included). Two-segment bound profiles use slot 3 = 0 s.
  std::array<double, 3> pattern{};
  std::array<double, 3> durations{};
  bool entry_speed_out_of_range = false;

  [[nodiscard]] double position(double t) const;
  [[nodiscard]] double speed(double t) const;
  [[nodiscard]] double accel(double t) const;
};

struct PassingTimeBounds {
  double low = 0.0;               // seconds after entry
  std::optional<double> up;       // nullopt = unbounded
};

/// Earliest and latest feasible stop-line passing times relative to entry.
PassingTimeBounds passing_time_bounds(double v0, const KinematicParams& kin);

class InfeasibleWindow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PlanCase { EarliestArrival, WaitForGreen };

/// Minimum passing time, then maximum passing speed, inside `window`.
/// Returns nullopt when the window cannot be met from (t0, v0).
std::optional<TrajectoryPlan> try_plan_leader(double t0, double v0, const PhaseWindow& window,
                                              const KinematicParams& kin, PlanCase* which = nullptr);
/// Same as try_plan_leader but throws InfeasibleWindow.
TrajectoryPlan plan_leader(double t0, double v0, const PhaseWindow& window, const KinematicParams& kin);

/// Profile reaching L exactly `duration` seconds after entry with the largest
/// final speed over all nine (a1, a2, a3) sign patterns; nullopt if none is
/// feasible.
std::optional<TrajectoryPlan> plan_fixed_arrival(double t0, double v0, double duration,
                                                 const KinematicParams& kin);

/// The bound-attaining profile for the earliest passing time.
TrajectoryPlan plan_earliest(double t0, double v0, const KinematicParams& kin);

/// State of a leading vehicle as seen by its follower.
struct LeaderView {
  double x_delayed = 0.0;  // leader front at t + dt - tau
  double x_now = 0.0;      // leader front at t
  double v_now = 0.0;      // leader speed at t
};

struct FollowParams {
  double v_max = 14.0;
  double a_up = 2.0;
  double a_low_mag = 2.0;
  double jam = 6.0;  // leader length + jam spacing
  double tau = 0.0;
};

/// Car-following position update over one step of `dt` seconds.
double follow_update(double x, double v, const std::optional<LeaderView>& leader, double dt,
                     const FollowParams& p);

/// Position, finite-difference speed and the short position history a
/// follower with a reaction delay of `delay` steps reads from its leader.
struct FollowState {
  double x = 0.0;
  double v = 0.0;
  std::deque<double> past;  // x at t, t - dt, ...; newest first

  /// Seeds a vehicle that has been moving at v0 up to now.
  void reset(double x0, double v0, std::size_t delay, double dt = 0.0) {
    x = x0;
    v = v0;
    past.clear();
    for (std::size_t j = 0; j <= delay; ++j) past.push_back(x0 - v0 * dt * static_cast<double>(j));
  }
  /// What a follower sees of this vehicle during the step that moves it to `new_x`.
  [[nodiscard]] LeaderView view(double new_x, std::size_t delay) const {
    const double delayed = delay == 0 ? new_x : past[std::min(delay - 1, past.size() - 1)];
    return LeaderView{delayed, x, v};
  }
  void advance(double new_x, double dt) {
    v = (new_x - x) / dt;
    x = new_x;
    past.push_front(new_x);
    past.pop_back();
  }
};

/// Passing-zone length that lets a CAV entering at v0_low still cruise into
/// a barrier of X_min steps.
double recommended_passing_length(const KinematicParams& kin, int x_min_steps, double dt);

/// Minimum time to cover `distance` from speed v under a_up and v_max.
double min_travel_time(double distance, double v, double a_up, double v_max);

/// Samples (t, x, v, a) every `sample_dt` seconds from t0 to t_f inclusive.
void write_trajectory_csv(std::ostream& os, const TrajectoryPlan& plan, double sample_dt, bool header = true);

}  // namespace spdl
