#include "spdl/trajectory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace spdl {

namespace {

constexpr double kEps = 1e-9;

}  // namespace

double TrajectoryPlan::position(double t) const {
  if (t <= t0) return 0.0;
  double x = 0.0;
  double v = v0;
  double start = t0;
  for (const auto& s : segments) {
    const double end = std::min(t, s.end_time);
    const double d = end - start;
    if (d > 0) {
      x += v * d + 0.5 * s.accel * d * d;
      v += s.accel * d;
    }
    if (t <= s.end_time) return x;
    start = s.end_time;
  }
  return x + v * (t - start);
}

double TrajectoryPlan::speed(double t) const {
  if (t <= t0) return v0;
  double v = v0;
  double start = t0;
  for (const auto& s : segments) {
    const double end = std::min(t, s.end_time);
    if (end > start) v += s.accel * (end - start);
    if (t <= s.end_time) return v;
    start = s.end_time;
  }
  return v;
}

double TrajectoryPlan::accel(double t) const {
  for (const auto& s : segments)
    if (t < s.end_time) return s.accel;
  return 0.0;
}

PassingTimeBounds passing_time_bounds(double v0, const KinematicParams& kin) {
  const double L = kin.passing_zone_length;
  const double vm = kin.v_max;
  const double au = kin.a_up;
  const double al = kin.a_low_mag;
  PassingTimeBounds b;
  // A negative radicand means v_max is always reached before L.
  const double crit_sq = vm * vm - 2.0 * au * L;
  if (crit_sq >= 0.0 && v0 <= std::sqrt(crit_sq)) {
    b.low = (std::sqrt(v0 * v0 + 2.0 * au * L) - v0) / au;
  } else {
    b.low = (vm - v0) / au + L / vm - (vm * vm - v0 * v0) / (2.0 * au * vm);
  }
  const double stop_speed = std::sqrt(2.0 * al * L);
  if (v0 > stop_speed) b.up = (v0 - std::sqrt(v0 * v0 - 2.0 * al * L)) / al;
  return b;
}

namespace {

TrajectoryPlan assemble(double t0, double v0, double length, const std::array<double, 3>& a,
                        const std::array<double, 3>& d, const KinematicParams& kin) {
  TrajectoryPlan p;
  p.t0 = t0;
  p.v0 = v0;
  p.length = length;
  p.pattern = a;
  p.durations = d;
  double t = t0;
  double v = v0;
  for (int i = 0; i < 3; ++i) {
    if (d[i] <= 0.0) continue;
    t += d[i];
    v += a[i] * d[i];
    p.segments.push_back({a[i], t});
  }
  p.t_f = t;
  p.v_f = std::clamp(v, 0.0, kin.v_max);
  p.entry_speed_out_of_range = v0 < kin.v0_low - kEps || v0 > kin.v0_up + kEps;
  return p;
}

struct Candidate {
  std::array<double, 3> d{};
  double v_f = 0.0;
  double accel_time = 0.0;
  int pattern_index = 0;
};

// Distance covered by durations d under pattern a from speed v0.
double distance(const Eigen::Vector3d& d, const Eigen::Matrix3d& Q, double v0) {
  return v0 * d.sum() + 0.5 * d.dot(Q * d);
}

}  // namespace

TrajectoryPlan plan_earliest(double t0, double v0, const KinematicParams& kin) {
  const double L = kin.passing_zone_length;
  const auto bounds = passing_time_bounds(v0, kin);
  const double au = kin.a_up;
  const double crit_sq = kin.v_max * kin.v_max - 2.0 * au * L;
  if (crit_sq >= 0.0 && v0 <= std::sqrt(crit_sq)) {
    return assemble(t0, v0, L, {au, 0.0, 0.0}, {bounds.low, 0.0, 0.0}, kin);
  }
  const double t_acc = (kin.v_max - v0) / au;
  return assemble(t0, v0, L, {au, 0.0, 0.0}, {t_acc, std::max(bounds.low - t_acc, 0.0), 0.0}, kin);
}

std::optional<TrajectoryPlan> plan_fixed_arrival(double t0, double v0, double duration,
                                                 const KinematicParams& kin) {
  const double L = kin.passing_zone_length;
  const double vm = kin.v_max;
  const std::array<double, 3> levels{kin.a_up, 0.0, -kin.a_low_mag};
  std::optional<Candidate> best;

  auto consider = [&](const Eigen::Vector3d& d_raw, const std::array<double, 3>& a, int pattern_index) {
    Eigen::Vector3d d = d_raw;
    const double tol = 1e-7 * std::max(1.0, duration);
    for (int i = 0; i < 3; ++i) {
      if (d[i] < -tol) return;
      d[i] = std::max(d[i], 0.0);
    }
    if (std::abs(d.sum() - duration) > tol) return;
    double v = v0;
    for (int i = 0; i < 3; ++i) {
      v += a[i] * d[i];
      if (v < -1e-7 || v > vm + 1e-7) return;
    }
    Eigen::Matrix3d Q;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) Q(i, k) = a[static_cast<std::size_t>(std::min(i, k))];
    if (std::abs(distance(d, Q, v0) - L) > 1e-6) return;
    Candidate c;
    for (int i = 0; i < 3; ++i) c.d[i] = d[i];
    c.v_f = std::clamp(v, 0.0, vm);
    for (int i = 0; i < 3; ++i)
      if (a[i] != 0.0) c.accel_time += d[i];
    c.pattern_index = pattern_index;
    if (!best) {
      best = c;
      return;
    }
    const double dv = c.v_f - best->v_f;
    if (dv > 1e-9) best = c;
    else if (dv >= -1e-9) {
      if (c.accel_time < best->accel_time - 1e-9) best = c;
      else if (c.accel_time <= best->accel_time + 1e-9 && c.pattern_index < best->pattern_index) best = c;
    }
  };

  int pattern_index = 0;
  for (double a1 : levels) {
    for (double a2 : levels) {
      for (double a3 : levels) {
        const std::array<double, 3> a{a1, a2, a3};
        Eigen::Matrix3d Q;
        for (int i = 0; i < 3; ++i)
          for (int k = 0; k < 3; ++k) Q(i, k) = a[static_cast<std::size_t>(std::min(i, k))];

        // Boundary rows: one segment vanishes, or a segment-end speed sits on 0 or v_max.
        std::vector<std::pair<Eigen::Vector3d, double>> extra;
        for (int k = 0; k < 3; ++k) extra.emplace_back(Eigen::Vector3d::Unit(k), 0.0);
        for (int k = 0; k < 3; ++k) {
          Eigen::Vector3d c = Eigen::Vector3d::Zero();
          for (int i = 0; i <= k; ++i) c[i] = a[static_cast<std::size_t>(i)];
          if (c.isZero()) continue;
          extra.emplace_back(c, 0.0 - v0);
          extra.emplace_back(c, vm - v0);
        }

        for (const auto& [row, rhs] : extra) {
          Eigen::Matrix<double, 2, 3> A;
          A.row(0) = Eigen::RowVector3d::Ones();
          A.row(1) = row.transpose();
          const Eigen::Vector2d b(duration, rhs);
          const Eigen::Vector3d n = A.row(0).transpose().cross(A.row(1).transpose());
          if (n.norm() < 1e-12) continue;
          const Eigen::Vector3d p = A.transpose() * (A * A.transpose()).ldlt().solve(b);
          // distance(p + s n) = L is quadratic in s.
          const double qa = 0.5 * n.dot(Q * n);
          const double qb = p.dot(Q * n) + v0 * n.sum();
          const double qc = distance(p, Q, v0) - L;
          std::vector<double> roots;
          if (std::abs(qa) < 1e-14) {
            if (std::abs(qb) > 1e-14) roots.push_back(-qc / qb);
          } else {
            const double disc = qb * qb - 4.0 * qa * qc;
            if (disc < -1e-9) continue;
            const double sq = std::sqrt(std::max(disc, 0.0));
            roots.push_back((-qb + sq) / (2.0 * qa));
            roots.push_back((-qb - sq) / (2.0 * qa));
          }
          for (double s : roots) {
            // Newton polish on the distance residual.
            for (int it = 0; it < 2; ++it) {
              const double f = qa * s * s + qb * s + qc;
              const double fp = 2.0 * qa * s + qb;
              if (std::abs(fp) < 1e-14) break;
              s -= f / fp;
            }
            consider(p + s * n, a, pattern_index);
          }
        }
        ++pattern_index;
      }
    }
  }
  if (!best) return std::nullopt;
  const auto& c = *best;
  const int pi = c.pattern_index;
  const std::array<double, 3> a{levels[static_cast<std::size_t>(pi / 9)], levels[static_cast<std::size_t>((pi / 3) % 3)],
                                levels[static_cast<std::size_t>(pi % 3)]};
  auto plan = assemble(t0, v0, L, a, c.d, kin);
  plan.t_f = t0 + duration;
  if (!plan.segments.empty()) plan.segments.back().end_time = plan.t_f;
  plan.v_f = c.v_f;
  return plan;
}

std::optional<TrajectoryPlan> try_plan_leader(double t0, double v0, const PhaseWindow& window,
                                              const KinematicParams& kin, PlanCase* which) {
  if (v0 < 0.0 || v0 > kin.v_max + kEps) throw std::invalid_argument("entry speed outside [0, v_max]");
  v0 = std::min(v0, kin.v_max);
  const auto bounds = passing_time_bounds(v0, kin);
  const double earliest = t0 + bounds.low;
  if (earliest > window.end() + kEps) return std::nullopt;
  if (earliest >= window.start - kEps) {
    if (which) *which = PlanCase::EarliestArrival;
    return plan_earliest(t0, v0, kin);
  }
  if (bounds.up && window.start > t0 + *bounds.up + kEps) return std::nullopt;
  if (which) *which = PlanCase::WaitForGreen;
  return plan_fixed_arrival(t0, v0, window.start - t0, kin);
}

TrajectoryPlan plan_leader(double t0, double v0, const PhaseWindow& window, const KinematicParams& kin) {
  auto p = try_plan_leader(t0, v0, window, kin);
  if (!p) throw InfeasibleWindow("stop line cannot be reached inside the phase window");
  return *p;
}

double follow_update(double x, double v, const std::optional<LeaderView>& leader, double dt,
                     const FollowParams& p) {
  double upper = std::min(x + v * dt + p.a_up * dt * dt, x + p.v_max * dt);
  if (leader) {
    upper = std::min(upper, leader->x_delayed - p.jam);
    const double gap = leader->x_now - x - p.jam;
    const double dtau = p.a_low_mag * (p.tau + 0.5 * dt);
    const double radicand = dtau * dtau + leader->v_now * leader->v_now + 2.0 * p.a_low_mag * gap;
    const double safe_advance = radicand > 0.0 ? dt * std::max(-dtau + std::sqrt(radicand), 0.0) : 0.0;
    upper = std::min(upper, x + safe_advance);
  }
  const double lower = std::max(x, x + v * dt - p.a_low_mag * dt * dt);
  return std::max(upper, lower);
}

double recommended_passing_length(const KinematicParams& kin, int x_min_steps, double dt) {
  const double span = x_min_steps * dt;
  const double t_acc = (kin.v_max - kin.v0_low) / kin.a_up;
  if (span < t_acc - kEps)
    throw ConfigError("X_min * dt must be at least (v_max - v0_low) / a_up");
  return (kin.v_max * kin.v_max - kin.v0_low * kin.v0_low) / (2.0 * kin.a_up) + (span - t_acc) * kin.v_max;
}

double min_travel_time(double distance, double v, double a_up, double v_max) {
  if (distance <= 0.0) return 0.0;
  const double d_acc = (v_max * v_max - v * v) / (2.0 * a_up);
  if (distance <= d_acc) return (std::sqrt(v * v + 2.0 * a_up * distance) - v) / a_up;
  return (v_max - v) / a_up + (distance - d_acc) / v_max;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryPlan& plan, double sample_dt, bool header) {
  if (header) os << "t,x,v,a\n";
  const auto old = os.precision(9);
  const auto n = static_cast<long>(std::floor((plan.t_f - plan.t0) / sample_dt + 1e-9));
  for (long k = 0; k <= n; ++k) {
    const double t = plan.t0 + static_cast<double>(k) * sample_dt;
    os << t << ',' << plan.position(t) << ',' << plan.speed(t) << ',' << plan.accel(t) << '\n';
  }
  if (plan.t0 + static_cast<double>(n) * sample_dt < plan.t_f - 1e-9)
    os << plan.t_f << ',' << plan.position(plan.t_f) << ',' << plan.v_f << ',' << 0.0 << '\n';
  os.precision(old);
}

}  // namespace spdl
