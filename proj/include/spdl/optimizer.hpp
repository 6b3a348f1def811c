#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spdl/config.hpp"
#include "spdl/domain.hpp"
#include "spdl/platoon.hpp"
#include "spdl/queue_model.hpp"

namespace spdl {

struct DecisionBounds {
  int x_min = 0;
  int x_max = 0;
};

/// Smallest and largest feasible barrier length in steps over both rings.
DecisionBounds decision_bounds(const TimingParams& tp);

/// All assignments of length `x` serving `o`. With `synchronized_head_lag`
/// only head-lag sequences with equal splits in both rings are produced.
std::vector<PhaseAssignment> enumerate_phase_plans(int x, Orientation o, const TimingParams& tp,
                                                   bool synchronized_head_lag = false);

/// Everything one solve needs. Step 0 of `hv` is the first step of the
/// planned cycle; `hv.initial` is the queue expected at `start_time`.
struct OptimizerContext {
  ExperimentConfig cfg;
  double start_time = 0.0;
  double first_release = 0.0;  // platoon release for the first planned barrier
  PhaseAssignment previous;    // barrier just before the planned cycle
  MovementFlowProfile hv;
  std::array<std::vector<CavRequest>, 4> cavs;  // unserved CAVs per arm, arrival order
  bool blue_phase = false;     // BP: idle blue block after each barrier, no CAV term

  [[nodiscard]] int blue_steps() const;
};

/// Rolling planning state between consecutive barriers.
struct PlanningState {
  int step = 0;  // steps since start_time
  QueueState queues{};
  std::array<std::vector<CavRequest>, 4> waiting;
  double barrier_start_prev = 0.0;  // start of the preceding barrier = next release
};

PlanningState initial_state(const OptimizerContext& ctx);

struct BarrierOutcome {
  double hv_delay = 0.0;
  double cav_delay = 0.0;
  PlanningState after;
  PlatoonAssignment platoons;

  [[nodiscard]] double total() const { return hv_delay + cav_delay; }
};

/// Runs one barrier from `before`.
BarrierOutcome evaluate_barrier(const OptimizerContext& ctx, const BarrierPlan& plan, const PlanningState& before,
                                ChainCache& cache);

struct TailResult {
  double delay = 0.0;
  int barriers = 0;       // J, counting the first two
  bool residual = false;  // cap reached before everything was discharged
};

/// Barrier 2 and the replayed tail: barriers 3, 5, ... repeat `first`,
/// 4, 6, ... repeat `second`, starting from the state after barrier 2.
TailResult evaluate_tail(const OptimizerContext& ctx, const BarrierPlan& first, const BarrierPlan& second,
                         const PlanningState& after_second, ChainCache& cache);

struct StageEvaluation {
  double value = 0.0;  // f_j
  int x = 0;
  BarrierPlan plan;
  double hv_delay = 0.0;   // the stage's own barrier
  double cav_delay = 0.0;  // the stage's own barrier
  TailResult tail;         // stage 2 only
  PlanningState after;     // after the stage's own barrier
  PlatoonAssignment platoons;
};

/// Best plan of length `x` for stage 1 (from the initial state) or stage 2
/// (from `after_first`, replaying `first` in the tail). Ties: smaller alpha
/// key, then larger ring-1 first green, then larger ring-2 first green.
StageEvaluation evaluate_stage(const OptimizerContext& ctx, int stage, int x, const PlanningState& before,
                               const std::optional<BarrierPlan>& first, ChainCache& cache);

/// Value of stage 2 for a given plan (the objective `evaluate_stage` minimizes).
double stage2_value(const OptimizerContext& ctx, const BarrierPlan& first, const PlanningState& after_first,
                    const BarrierPlan& second, ChainCache& cache);

struct DPEntry {
  int state = 0;
  double value = 0.0;
  int decision = 0;  // x of the preceding stage
  StageEvaluation eval;
};

struct DPTable {
  DecisionBounds bounds;
  std::array<std::vector<DPEntry>, 3> stages;  // [0] = {s1 = 0}; [1] = s2; [2] = s3

  [[nodiscard]] const DPEntry& at(int stage, int state) const;
};

DPTable forward_recursion(const OptimizerContext& ctx, ChainCache& cache);

struct CycleSolution {
  double value = 0.0;
  int x1 = 0;
  int x2 = 0;
  StageEvaluation first;
  StageEvaluation second;
  SignalPlan cycle;  // the two barriers to commit
};

CycleSolution backward_recursion(const DPTable& table, const OptimizerContext& ctx);

/// forward + backward with a fresh cache.
CycleSolution solve_cycle(const OptimizerContext& ctx);

void write_solution(std::ostream& os, const CycleSolution& s);
void write_table(std::ostream& os, const DPTable& t);
std::string to_text(const CycleSolution& s);

}  // namespace spdl
