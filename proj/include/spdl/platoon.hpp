#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "spdl/config.hpp"
#include "spdl/domain.hpp"
#include "spdl/trajectory.hpp"

namespace spdl {

enum class BarrierCase : std::uint8_t { Case1 = 1, Case2 = 2 };
enum class PlatoonKind : std::uint8_t { Case1 = 0, Case2TwoPlatoons = 1, Case2OnePlatoon = 2 };

const char* to_string(PlatoonKind k);

/// Case1 iff the sequence is head-lag: the rings' left phases sit in
/// different slots, so each arm's left and through share a slot.
BarrierCase classify_case(const PhaseAssignment& a);
/// Turn group served first in a Case 2 barrier (left for head-head).
Turn leading_turn(const PhaseAssignment& a);

/// A CAV known to the planner, identified by its arrival at the upstream
/// end of the buffer zone.
struct CavRequest {
  int id = 0;
  Arm arm = Arm::East;
  Turn turn = Turn::Through;
  double arrival = 0.0;
  double entry_ready = 0.0;  // earliest passing-zone entry: arrival + buffer / v_max
};

struct Platoon {
  std::vector<CavRequest> members;  // leader first
  double release = 0.0;             // leader entry time at x = 0
  double v0 = 0.0;
  TrajectoryPlan leader_plan;
  std::vector<double> crossing;  // stop-line passing time per member
};

struct ArmPlatoons {
  Arm arm = Arm::East;
  PlatoonKind kind = PlatoonKind::Case1;
  std::vector<Platoon> platoons;
};

struct PlatoonAssignment {
  std::vector<ArmPlatoons> arms;

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] bool empty() const { return size() == 0; }
  [[nodiscard]] std::vector<int> served_ids() const;
};

/// Stop-line crossing and entry-clearing offsets (seconds after release) of a
/// platoon seeded one jam spacing apart behind the entry line.
struct ChainProfile {
  TrajectoryPlan leader;  // planned from t0 = 0
  std::vector<double> cross;
  std::vector<double> clear;  // first time the member is one jam spacing past x = 0
};

/// Follower-chain simulation behind a leader plan; followers use the
/// car-following update with the CAV reaction time.
ChainProfile simulate_chain(const TrajectoryPlan& leader, int members, const FollowParams& fp, double dt_sim,
                            double horizon);

/// Thread-safe memo of chains keyed by (leader target time after release, v0).
class ChainCache {
 public:
  ChainCache(const ExperimentConfig& cfg, int members);

  /// nullopt when the leader cannot meet [start_rel, end_rel] from the entry line.
  std::shared_ptr<const ChainProfile> get(double v0, double start_rel, double end_rel);
  [[nodiscard]] std::size_t entries() const;

 private:
  KinematicParams kin_;
  FollowParams fp_;
  double dt_sim_;
  int members_;
  mutable std::mutex mu_;
  std::map<std::pair<long long, long long>, std::shared_ptr<const ChainProfile>> map_;
};

/// Platoons of one barrier whose release (leader entry) is `release`.
/// `waiting[arm]` lists the unserved CAVs of each arm in arrival order; only
/// those ready to enter by `release` are eligible.
PlatoonAssignment build_platoons(const std::array<std::vector<CavRequest>, 4>& waiting, const PhaseAssignment& a,
                                 double barrier_start, double release, double v0, const ExperimentConfig& cfg,
                                 ChainCache& cache);

/// Same with an uncached chain simulation (used at execution time with a
/// drawn entry speed).
PlatoonAssignment build_platoons_exact(const std::array<std::vector<CavRequest>, 4>& waiting,
                                       const PhaseAssignment& a, double barrier_start, double release, double v0,
                                       const ExperimentConfig& cfg);

/// No-buffer planning: CAVs enter at v_max when ready and cross first-come
/// first-served inside their movement's window.
PlatoonAssignment build_platoons_no_buffer(const std::array<std::vector<CavRequest>, 4>& waiting,
                                           const PhaseAssignment& a, double barrier_start,
                                           const ExperimentConfig& cfg);

struct CavDelay {
  double total = 0.0;                              // veh*s
  std::vector<std::pair<int, double>> travel_time;  // (id, t_j) for crossing CAVs
};

/// Delay of the CAVs crossing in a barrier: crossing time minus arrival minus
/// free-flow time to the stop line. Non-crossing CAVs contribute nothing.
CavDelay cav_delay(const PlatoonAssignment& pa, const ExperimentConfig& cfg);

/// Green window (absolute seconds) of a movement in a barrier starting at `barrier_start`.
PhaseWindow movement_window(const PhaseAssignment& a, int movement_id, double barrier_start, const TimingParams& tp);

}  // namespace spdl
