#pragma once

// Independent brute-force oracles for the test suites. Everything here
// deliberately avoids the library's production code paths: distances come
// from dense boundary sampling, footprints from sampled wireframe edges with
// bisection refinement, steady states from exhaustive grid minimization.

#include <vector>

#include "pih/geometry.hpp"
#include "pih/quasistatic.hpp"

namespace pih::oracle {

// min distance to densely sampled boundary points; sign via contains()
double boundary_sampled_distance(const Polygon2& poly, const Vec2& p, int samples_per_edge = 20000);

// plane intersections found by scanning each wireframe edge at fine steps
// and bisecting every sign change
std::vector<Vec3> sampled_footprint(const PegShape& peg, const Pose6& pose, int steps_per_edge = 4000);

// exhaustive grid minimization of the impedance potential over the feasible
// subset of a 3-DOF (x, z, pitch) pose box around `center`
struct GridMinResult {
  Pose6 pose;
  double energy;
  bool found;
};
GridMinResult grid_minimize_3dof(const BoardEnvironment& env, const PegShape& peg,
                                 const Pose6& desired, const Vec6& stiffness, const Pose6& center,
                                 double half_x, double half_z, double half_pitch, int cells_per_axis);

// largest +/- yaw rotations (about the vertical axis through `pivot`) that
// keep the peg base polygon inside the hole opening; fine sweep + bisection
double polygon_rotational_play(const Polygon2& peg_base, const Polygon2& hole_base,
                               const PlanarPose& hole_pose, const PlanarPose& peg_planar,
                               const Vec2& pivot, double tol = 1e-6);

// batch least squares matching the RLS recursion exactly: minimizes
// sum_t lambda^(T-1-t) |x_t+1 - gamma^T phi_t|^2 + prior on (gamma - gamma0)
Eigen::MatrixXd batch_rls_solution(const std::vector<Eigen::VectorXd>& phis,
                                   const std::vector<Eigen::VectorXd>& targets,
                                   const Eigen::MatrixXd& gamma0, const Eigen::MatrixXd& p0,
                                   double lambda);

}  // namespace pih::oracle
