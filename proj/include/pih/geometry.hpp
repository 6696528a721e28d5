#pragma once

#include <optional>
#include <vector>

#include "pih/errors.hpp"
#include "pih/pose.hpp"
#include "pih/rng.hpp"

namespace pih {

// Simple polygon, counter-clockwise vertex order, meters.
struct Polygon2 {
  std::vector<Vec2> vertices;

  // cached on validate(); centroid/circumradius back the broad-phase tests
  Vec2 centroid{Vec2::Zero()};
  double circumradius = 0.0;

  int size() const { return static_cast<int>(vertices.size()); }
  double area() const;       // positive for CCW
  double perimeter() const;
  bool is_convex() const;
  void validate();           // throws InvalidGeometryError; fills cache

  // crossing-number test, boundary counts as inside
  bool contains(const Vec2& p) const;
};

Polygon2 make_polygon(std::vector<Vec2> vertices);
Polygon2 make_regular_polygon(int n, double circumradius);
Polygon2 make_rectangle(double width, double height);

// Exact distance to the polygon boundary; negative inside, positive outside.
double signed_distance(const Polygon2& poly, const Vec2& p);

struct SignedDistanceDetail {
  double value;
  Vec2 gradient;  // unit, points toward increasing distance
  Vec2 closest;   // closest boundary point
};
SignedDistanceDetail signed_distance_detail(const Polygon2& poly, const Vec2& p);

// Mitered outward offset; polygon must be convex.
Polygon2 offset_convex(const Polygon2& poly, double distance);

// Planar rigid transform (x, y, yaw), yaw in (-pi, pi].
struct PlanarPose {
  double x = 0.0, y = 0.0, yaw = 0.0;

  Vec2 xy() const { return Vec2(x, y); }
  Vec2 apply(const Vec2& p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return Vec2(c * p.x() - s * p.y() + x, s * p.x() + c * p.y() + y);
  }
  Vec2 apply_inverse(const Vec2& p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double dx = p.x() - x, dy = p.y() - y;
    return Vec2(c * dx + s * dy, -s * dx + c * dy);
  }
  PlanarPose normalized() const { return {x, y, wrap_angle(yaw)}; }
};

struct HoleShape {
  Polygon2 base;                      // hole-frame boundary of the opening
  double depth = 0.0;                 // meters, > 0
  std::vector<double> corner_angles;  // interior angle at each vertex

  void validate() const;  // corner_angles must match base within 1e-9 rad
};
HoleShape make_hole(Polygon2 base, double depth);

struct CornerGeometry {
  int index;
  Vec2 vj;      // the corner vertex
  Vec2 vi, vk;  // previous / next vertex (CCW)
  double angle; // interior angle, in (0, pi) for the supported case
};
// Throws UnsupportedCornerError for reflex corners (angle >= pi).
CornerGeometry corner(const HoleShape& hole, int index);
CornerGeometry transformed(const CornerGeometry& c, const PlanarPose& pose);

struct PegShape {
  Polygon2 base;                 // frame {E}, extruded along +Z
  double height = 0.0;           // meters, > 0
  std::vector<Vec3> edge_samples;
  double sample_density = 0.0;   // points per meter of edge length

  // cached dense views used by the solver
  Eigen::Matrix3Xd samples;      // edge_samples as columns
  std::vector<int> base_vertex_sample;  // sample index of each base vertex
  double circumradius3d = 0.0;   // max |p| over samples

  int sample_count() const { return static_cast<int>(edge_samples.size()); }
  Vec3 base_vertex(int i) const { return Vec3(base.vertices[i].x(), base.vertices[i].y(), 0.0); }
};
PegShape make_peg(Polygon2 base, double height, double sample_density = 2000.0);

// Area of interest on the board plane: a disc, or a convex polygon.
struct BoardRegion {
  Vec2 center{Vec2::Zero()};
  double radius = 0.0;
  std::optional<Polygon2> poly;  // when set, overrides the disc

  bool contains(const Vec2& p) const;
  double margin(const Vec2& p) const;  // distance inside the boundary (negative outside)
  Eigen::AlignedBox2d bounding_box() const;
};

struct BoardEnvironment {
  HoleShape hole;
  PlanarPose hole_pose;  // ground truth T_OH restricted to the board plane
  BoardRegion board;

  Vec2 world_to_hole(const Vec2& p) const { return hole_pose.apply_inverse(p); }
  // signed distance of a world point to the transformed hole area
  double hole_distance(const Vec2& world_xy) const {
    return signed_distance(hole.base, world_to_hole(world_xy));
  }
  void validate() const;  // transformed hole must sit inside the board region
};

// Occupancy of the task environment: -1 board material, 0 surface, +1 free.
int occupancy(const BoardEnvironment& env, const Vec3& p);

enum class FootprintKind { ContactPoint, IntersectionArea };

struct Footprint {
  std::vector<Vec3> points;  // all on the z=0 plane of {O}

  bool empty() const { return points.empty(); }
  FootprintKind kind() const {
    return points.size() == 1 ? FootprintKind::ContactPoint : FootprintKind::IntersectionArea;
  }
};

// All intersections of the peg wireframe (base, lateral and top edges) with
// the z=0 plane, deduplicated within 1e-7 m. plane_tol widens the band in
// which an endpoint counts as lying on the plane.
Footprint footprint(const PegShape& peg, const Pose6& pose, double plane_tol = 1e-9);

struct PrismPair {
  PegShape peg;
  HoleShape hole;
  double clearance = 0.0;
};

// Deterministic generator for a random convex peg base inside bounding_box
// (width x height, meters) plus the matching hole offset outward by
// clearance/2. Throws InvalidGeometryError if no valid pair can be produced.
PrismPair random_prism(uint64_t seed, const Vec2& bounding_box,
                       std::pair<int, int> vertex_count_range, double clearance,
                       double peg_height = 0.025, double hole_depth = 0.012,
                       double sample_density = 2000.0);

}  // namespace pih
