#pragma once

#include <vector>

#include "pih/alignment.hpp"

namespace pih {

// Linear prior for the interaction transition: x_next = A x + B (x_d - x).
struct LinearModel {
  Eigen::Matrix<double, 6, 6> a{Eigen::Matrix<double, 6, 6>::Identity()};
  Eigen::Matrix<double, 6, 6> b{Eigen::Matrix<double, 6, 6>::Identity()};
};

Vec6 predict(const LinearModel& model, const Vec6& x, const Vec6& x_desired);

// RLS estimator state over the stacked parameter matrix gamma = [A; B].
struct RlsState {
  Eigen::Matrix<double, 12, 6> gamma;
  Eigen::Matrix<double, 12, 12> p;
  double lambda = 0.98;

  static RlsState initial(double lambda = 0.98, double p0 = 1e3);
  LinearModel model() const;
  void check() const;  // symmetric positive definite covariance
};

// One RLS step from an observed transition; poses are raw 6-vectors,
// unwrapped by the caller. Throws NumericalConditioningError when the
// covariance loses positive definiteness.
void rls_update(RlsState& state, const Vec6& x, const Vec6& x_desired, const Vec6& x_next);

struct MpcConfig {
  int horizon = 3;
  double dev_min_trans = 0.0;
  double dev_max_trans = 0.004;            // m
  double dev_min_rot = 0.0;
  double dev_max_rot = 5.0 * M_PI / 180.0;  // rad per step
  double smooth_weight = 0.1;
  double alpha_target = M_PI / 2.0;
  double alpha_tol = 0.5 * M_PI / 180.0;
  double press_depth = 0.003;  // commanded vertex depth below the surface
  int max_steps = 100;
};

// Contact reference frame at the corner; x-axis follows the rotation angle
// of the inclined state. Diagnostic only.
struct ContactFrame {
  Vec3 origin{Vec3::Zero()};
  double x_axis_yaw = 0.0;

  static ContactFrame at(const Vec2& corner, double beta) {
    return {Vec3(corner.x(), corner.y(), 0.0), beta};
  }
};

// Receding-horizon plan: candidate grid over (d_alpha, well nudge, depth)
// scored on the linear surrogate, best candidate refined by coordinate
// descent. Returns the full horizon of desired poses; callers execute the
// first. Throws InfeasiblePlanError when no candidate satisfies the well
// and deviation constraints.
std::vector<Pose6> plan(const LinearModel& model, const InclinedState& state,
                        const IntersectedRegions& regions, const MpcConfig& cfg,
                        const PegShape& peg);

struct YawPlay {
  double lo = 0.0;     // feasible rotation toward -yaw
  double hi = 0.0;     // feasible rotation toward +yaw
  bool unbounded = false;
  double spread() const { return lo + hi; }
};

// Extreme penetration-free yaw rotations about the vertical axis through the
// supporting vertex, at fixed inclination.
YawPlay measure_yaw_play(const BoardEnvironment& env, const PegShape& peg,
                         const InclinedState& state);

struct InsertionStep {
  int step = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double delta_v = 0.0;
  double delta_theta = 0.0;
  double wrench_norm = 0.0;
  double plan_ms = 0.0;
  double yaw_play = 0.0;
  double delta_s = 0.0;  // delta_v + yaw-play midpoint error
};

struct InsertionTrace {
  std::vector<InsertionStep> steps;
  bool success = false;
  std::string failure;
  Pose6 final_pose;
};

struct InsertionContext {
  // yaw values (mod symmetry) at which the peg nests in the hole; used for
  // the midpoint-error diagnostic
  double symmetry_period = 2.0 * M_PI;
  // execution noise on each commanded pose
  double sigma = 0.0;
  RandomStream* rng = nullptr;
};

// Alg. "MPC-based insertion planning": plan, execute the first desired pose,
// re-measure, update the identified model, until the inclination reaches the
// target. Success requires tolerance reached and the final footprint
// contained in the true opening.
InsertionTrace insert(const BoardEnvironment& env, const PegShape& peg,
                      const SteadyState& aligned, const IntersectedRegions& regions,
                      const MpcConfig& cfg, const ComplianceParams& k,
                      const InsertionContext& ctx = {});

}  // namespace pih
