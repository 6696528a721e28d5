#pragma once

#include <vector>

#include "pih/perception.hpp"
#include "pih/quasistatic.hpp"

namespace pih {

// Projection of an inclined state onto the board plane: where the supporting
// lateral edge pierces it, and the footprint-polygon angle at that point.
struct ProjectedState {
  Vec2 v_lateral{Vec2::Zero()};
  double theta_lateral = 0.0;
};

ProjectedState project(const PegShape& peg, const InclinedState& state);

// Convex planar sector given by two half-plane conditions; membership is an
// exact sign test. Covers corner wedges, potential wells and basins.
struct AngularSector {
  enum class Kind { Well, Basin };

  Vec2 apex{Vec2::Zero()};
  Vec2 ray_a{Vec2::Zero()}, ray_b{Vec2::Zero()};  // boundary directions
  Kind kind = Kind::Well;
  bool degenerate = false;

  // inward half-plane normal form: (p - anchor_i) . normal_i >= 0
  Vec2 anchor1{Vec2::Zero()}, normal1{Vec2::Zero()};
  Vec2 anchor2{Vec2::Zero()}, normal2{Vec2::Zero()};

  bool contains(const Vec2& p) const {
    if (degenerate) return false;
    return (p - anchor1).dot(normal1) >= 0.0 && (p - anchor2).dot(normal2) >= 0.0;
  }
  // distance to the nearest boundary line (positive inside)
  double boundary_clearance(const Vec2& p) const {
    return std::min((p - anchor1).dot(normal1), (p - anchor2).dot(normal2));
  }
};

// Placements of the attraction point for which the corner vertex is the
// local minimum: directions at least pi/2 away from both corner edges.
AngularSector well_region(const CornerGeometry& corner);

// Limit basin of attraction (|v_d - v_j| -> infinity): the band behind the
// perpendiculars at the corner's neighbor vertices.
AngularSector basin_region(const CornerGeometry& corner);

// Basin for a concrete attraction point: the wedge at v_d toward the corner
// intersected with the corner's interior wedge.
struct BasinForAnchor {
  AngularSector at_anchor;
  AngularSector at_corner;
  bool contains(const Vec2& p) const { return at_anchor.contains(p) && at_corner.contains(p); }
};
BasinForAnchor basin_region_for(const CornerGeometry& corner, const Vec2& anchor);

// Conjunction of the per-hypothesis wells and basins plus the chosen
// attraction anchor (Alg. "nondeterministic corner alignment").
struct IntersectedRegions {
  std::vector<AngularSector> wells;
  std::vector<BasinForAnchor> basins;
  Vec2 well_anchor{Vec2::Zero()};
  Vec2 basin_witness{Vec2::Zero()};
  Vec2 corner_estimate{Vec2::Zero()};  // mean of per-hypothesis corner apexes
  int corner_index = 0;

  bool well_contains(const Vec2& p) const {
    for (const auto& w : wells)
      if (!w.contains(p)) return false;
    return !wells.empty();
  }
  bool basin_contains(const Vec2& p) const {
    for (const auto& b : basins)
      if (!b.contains(p)) return false;
    return !basins.empty();
  }
};

struct IntersectParams {
  double anchor_radius_factor = 5.0;   // times hole circumradius
  double max_anchor_radius = 0.3;      // workspace clip, meters
  int anchor_ring_candidates = 720;
  int witness_tries = 20000;
};

IntersectedRegions intersect_over_samples(const HoleShape& hole, int corner_index,
                                          const std::vector<PlanarPose>& samples,
                                          RandomStream& rng, const IntersectParams& params = {});

// Among the corners symmetry-equivalent to base_corner (stride vertices
// apart), pick the one whose intersected basin contains the given projection
// and return its regions. For central-symmetric pegs any corner nests the
// peg, so the landing corner is committed after contact; asymmetric pegs
// admit only the base corner.
std::optional<IntersectedRegions> regions_containing(const HoleShape& hole, int base_corner,
                                                     int corner_stride,
                                                     const std::vector<PlanarPose>& samples,
                                                     const Vec2& projection, RandomStream& rng,
                                                     const IntersectParams& params = {});

// vertex stride between symmetry-equivalent corners of an n-gon under a
// rotational symmetry of the given period
int symmetry_corner_stride(int vertex_count, double symmetry_period);

struct Deviation {
  double delta_v = 0.0;      // meters to the ground-truth corner
  double delta_theta = 0.0;  // rad between footprint and corner angle
};

struct AlignOutcome {
  SteadyState steady;
  Deviation deviation;  // scored against ground truth by the harness
};

// One translation-only interaction pulling the projection to the well
// anchor. Requires a translation-dominant stiffness ratio >= 100 and a start
// whose projection lies in the intersected basin. sigma adds execution noise
// to the commanded pose.
AlignOutcome align(const BoardEnvironment& env, const PegShape& peg,
                   const IntersectedRegions& regions, const InclinedState& start,
                   const ComplianceParams& k, double sigma = 0.0, RandomStream* rng = nullptr);

// Corner whose intersected well keeps the largest rasterized area over the
// hypothesis set; reflex corners are skipped.
int choose_corner(const HoleShape& hole, const std::vector<PlanarPose>& samples);

// Debug: rasterize sector-conjunction membership over a window into a PGM.
void dump_membership_pgm(const std::string& path, const IntersectedRegions& regions,
                         bool well, const Vec2& center, double half_extent, int resolution);

}  // namespace pih
