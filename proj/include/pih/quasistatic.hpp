#pragma once

#include <optional>
#include <vector>

#include "pih/geometry.hpp"

namespace pih {

// Diagonal impedance gains. Damping never enters the steady-state math
// (every observed state has zero velocity); it is carried for documentation.
struct ComplianceParams {
  Vec6 stiffness{(Vec6() << 1000, 1000, 1000, 30, 30, 30).finished()};
  Vec6 damping{Vec6::Zero()};

  static ComplianceParams defaults() { return {}; }

  // probing: hold orientation nearly rigid, let translation comply
  static ComplianceParams probe() {
    ComplianceParams k;
    k.stiffness << 1000, 1000, 1000, 300, 300, 300;
    return k;
  }

  // corner alignment: energy budget dominated by translation deviation
  static ComplianceParams translation_dominant() {
    ComplianceParams k;
    k.stiffness << 3000, 3000, 3000, 20, 20, 20;
    return k;
  }

  // insertion: energy budget dominated by rotation deviation
  static ComplianceParams rotation_dominant() {
    ComplianceParams k;
    k.stiffness << 0.8, 0.8, 0.8, 120, 120, 120;
    return k;
  }

  double translation_dominance() const {
    return stiffness.head<3>().minCoeff() / stiffness.tail<3>().maxCoeff();
  }
  double rotation_dominance() const {
    return stiffness.tail<3>().minCoeff() / stiffness.head<3>().maxCoeff();
  }
  void validate() const {
    if ((stiffness.array() <= 0.0).any()) throw PreconditionError("stiffness entries must be > 0");
  }
};

struct InteractionCommand {
  Pose6 start;
  Pose6 desired;
  std::optional<int> supporting_vertex;
};

// Inclined state: designated base vertex is the unique lowest point; the peg
// z-axis in {O} is n = [cos(a)cos(b), cos(a)sin(b), sin(a)].
struct InclinedState {
  Pose6 pose;
  int supporting_vertex = 0;
  double alpha = 0.0;
  double beta = 0.0;

  static InclinedState from_pose(const Pose6& pose, const PegShape& peg);
  void validate() const;  // axis reconstructed from (alpha, beta) within 1e-9
};

struct SolverStats {
  int iterations = 0;
  double max_penetration = 0.0;
  double final_pose_change = 0.0;
  bool supporting_vertex_ok = true;
  bool converged = false;
};

struct SteadyState {
  Pose6 pose;
  Vec6 external_wrench{Vec6::Zero()};  // K_d (x_d - x) at the steady pose
  Footprint footprint;                 // observed interaction outcome
  double energy = 0.0;
  SolverStats stats;
};

struct SettleTrace {
  SteadyState steady;
  std::vector<Pose6> poses;
  std::vector<double> energies;
};

struct NonConvergenceError : Error {
  NonConvergenceError(const std::string& what, const Pose6& last_iterate)
      : Error(what), last(last_iterate) {}
  Pose6 last;
};

// Steady-state outcome of one compliant interaction: a constrained local
// minimum of U(x) = 1/2 (x_d - x)^T K (x_d - x) subject to non-penetration of
// every sampled peg point, reached by projected-gradient descent from the
// start pose.
SteadyState settle(const BoardEnvironment& env, const PegShape& peg,
                   const InteractionCommand& cmd, const ComplianceParams& k);

SettleTrace settle_trace(const BoardEnvironment& env, const PegShape& peg,
                         const InteractionCommand& cmd, const ComplianceParams& k);

// Observation extracted from a steady pose. A pierced plane yields the set of
// transversal edge crossings (all of which non-penetration confines to the
// hole opening); a surface contact without piercing yields the single lowest
// contact point; a pose clear of the plane yields an empty footprint.
Footprint observed_footprint(const PegShape& peg, const Pose6& pose);

// Desired pose placing the supporting vertex at (target, -depth) with the
// orientation given by (alpha, beta); the vertex's outward bisector is spun
// to face the downhill direction so it is the strict lowest point.
Pose6 inclined_pose(const PegShape& peg, int supporting_vertex, const Vec2& target,
                    double vertex_z, double alpha, double beta);

// Interaction command from the current inclined state toward the target
// point at the given probing depth. Throws InvalidCommandError when the
// requested geometry violates the supporting-vertex condition.
InteractionCommand make_inclined_command(const PegShape& peg, const InclinedState& current,
                                         const Vec2& target, double depth, double alpha,
                                         double beta);

// Probe command starting from a hover pose directly above the target.
InteractionCommand make_probe_command(const PegShape& peg, int supporting_vertex,
                                      const Vec2& target, double depth, double alpha,
                                      double beta, double hover_clearance = 0.02);

// Gaussian action noise on the desired-pose XY (sigma meters, per axis).
InteractionCommand perturb(const InteractionCommand& cmd, double sigma, RandomStream& rng);

// max penetration depth of any sampled peg point into board material
double max_penetration(const BoardEnvironment& env, const PegShape& peg, const Pose6& pose);

// true when the supporting vertex is the lowest sampled point (1e-12 slack)
bool supporting_vertex_lowest(const PegShape& peg, const Pose6& pose, int vertex);

}  // namespace pih
