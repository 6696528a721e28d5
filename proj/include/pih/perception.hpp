#pragma once

#include <functional>
#include <vector>

#include "pih/quasistatic.hpp"

namespace pih {

// Containment constraints are stated on the intersection area shrunk toward
// its centroid by the observation resolution: steady-state contacts land on
// the rim to solver precision, and demanding containment of razor-exact rim
// points would pin the feasible set to a measure-near-zero sliver that no
// sampler can populate.
constexpr double kAreaObservationMargin = 1e-4;  // m

struct ObservationConstraint {
  Footprint footprint;
  FootprintKind kind = FootprintKind::ContactPoint;

  static ObservationConstraint from_footprint(const Footprint& fp) {
    if (fp.empty()) throw PreconditionError("empty footprint carries no constraint");
    ObservationConstraint obs{fp, fp.kind()};
    if (obs.kind == FootprintKind::IntersectionArea) {
      Vec3 centroid = Vec3::Zero();
      for (const Vec3& p : obs.footprint.points) centroid += p;
      centroid /= static_cast<double>(obs.footprint.points.size());
      for (Vec3& p : obs.footprint.points) {
        const Vec3 d = centroid - p;
        const double len = d.norm();
        if (len > 1e-12) p += d * (std::min(kAreaObservationMargin, len) / len);
      }
    }
    return obs;
  }
};

// g value of one observation under a hole-pose hypothesis. A contact point
// must stay out of the opening (g = f); an intersection area must be fully
// contained (g = -max f). Negative g rules the hypothesis out.
double evaluate_constraint(const PlanarPose& hypothesis, const ObservationConstraint& obs,
                           const HoleShape& hole);

// Pose hypothesis set bounded by the accumulated inequality constraints.
// Samples are kept consistent with every constraint (tolerance 1e-9 m) and
// with the initial board-containment condition.
struct ProposalRegion {
  std::vector<ObservationConstraint> constraints;
  std::vector<PlanarPose> samples;
  HoleShape hole;
  BoardRegion board;
  double yaw_lo = 0.0, yaw_hi = 0.0;  // symmetry-reduced sampling interval
  double acceptance_rate = 1.0;

  static ProposalRegion initialize(const HoleShape& hole, const BoardRegion& board, int k,
                                   double yaw_lo, double yaw_hi, RandomStream& rng);

  bool hypothesis_feasible(const PlanarPose& pose) const;  // constraints + board containment
  // axis-aligned bounds of the samples in (x, y, yaw); yaw unwrapped around
  // its circular mean
  struct Box {
    double x_lo, x_hi, y_lo, y_hi, yaw_lo, yaw_hi;
    double volume(double yaw_scale) const;
  };
  Box sample_box() const;
};

constexpr double kConstraintTol = 1e-9;

// appends the constraint and refills the hypothesis set by rejection
// sampling over the inflated sample box; throws DegenerateRegionError when
// the acceptance rate collapses below 1e-6
void update_region(ProposalRegion& region, const ObservationConstraint& obs, RandomStream& rng);

// fraction of sample hypotheses whose transformed opening contains the point
double p_in(const Vec2& grid_point, const std::vector<PlanarPose>& samples,
            const HoleShape& hole);

// expected entropy reduction of probing at the grid point; entropies are
// log bounding-box volumes of the hypothesis set, yaw scaled by the hole
// circumradius to keep the units commensurable
double expected_entropy_reduction(const Vec2& grid_point, const ProposalRegion& region);

struct ProbeGrid {
  std::vector<Vec2> points;
  double spacing = 0.0;

  static ProbeGrid over_board(const BoardRegion& board, double spacing);
};

// argmax of expected entropy reduction; ties resolved by distance to the
// sample centroid, then lexicographic coordinates
Vec2 select_probe(const ProposalRegion& region, const ProbeGrid& grid);

struct JaccardEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int points = 0;
};

// Monte-Carlo intersection-over-union between the true opening and the union
// of hypothesized openings
JaccardEstimate jaccard(const ProposalRegion& region, const BoardEnvironment& env,
                        RandomStream& rng, int min_points = 100000);

enum class ProbePolicy { Entropy, Random };

struct PerceptionConfig {
  int hypothesis_count = 200;
  double grid_spacing = 0.0;  // 0: peg circumradius / 4, clipped to >= 2 mm
  double sigma = 0.0;         // meters, action noise
  ProbePolicy policy = ProbePolicy::Entropy;
  int max_steps = 8;
  // stop early when the box volume drops < 1% over two consecutive steps
  double min_volume_drop = 0.01;
  bool early_stop = true;
  double probe_alpha = M_PI / 4.0;
  double probe_beta = 0.0;
  double probe_depth = 0.003;
  double hover_clearance = 0.02;
  int probe_vertex = 0;
  double yaw_lo = 0.0, yaw_hi = 0.0;
  bool compute_jaccard = true;
  int jaccard_points = 100000;
  ComplianceParams compliance = ComplianceParams::probe();
};

struct PerceptionStepMetrics {
  int step = 0;
  ProbePolicy policy = ProbePolicy::Entropy;
  double sigma = 0.0;
  double jaccard = 0.0;
  double jaccard_std_error = 0.0;
  double delta_h = 0.0;
  double acceptance_rate = 0.0;
  Vec2 probe{Vec2::Zero()};
  FootprintKind outcome = FootprintKind::ContactPoint;
};

struct PerceptionResult {
  ProposalRegion region;
  std::vector<PerceptionStepMetrics> steps;
};

// Alg. "entropy-based interactive perception": probe, settle, accumulate the
// footprint constraint, resample, until the stop rule fires. seed_region,
// when given, continues from an existing region (hypotheses already
// consistent with earlier observations) instead of initializing from the
// board area.
PerceptionResult run_interactive_perception(const BoardEnvironment& env, const PegShape& peg,
                                            const PerceptionConfig& config, RandomStream& rng,
                                            const ProposalRegion* seed_region = nullptr);

}  // namespace pih
