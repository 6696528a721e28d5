#include "pih/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pih {

namespace {

Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// wedge at `apex` spanned between unit rays a and b (opening < pi)
AngularSector wedge(const Vec2& apex, const Vec2& a, const Vec2& b, AngularSector::Kind kind) {
  AngularSector s;
  s.apex = apex;
  s.ray_a = a;
  s.ray_b = b;
  s.kind = kind;
  const double sgn = cross2(a, b) >= 0.0 ? 1.0 : -1.0;
  s.anchor1 = apex;
  s.normal1 = sgn * perp(a);
  s.anchor2 = apex;
  s.normal2 = -sgn * perp(b);
  const double width = std::atan2(std::abs(cross2(a, b)), a.dot(b));
  s.degenerate = width <= 1e-6;
  return s;
}

}  // namespace

ProjectedState project(const PegShape& peg, const InclinedState& state) {
  const Mat3 r = state.pose.rotation_matrix();
  const Vec3& t = state.pose.position;
  const int n = peg.base.size();
  const int v = state.supporting_vertex;
  auto world = [&](const Vec2& base_xy, double z) {
    return Vec3(r * Vec3(base_xy.x(), base_xy.y(), z) + t);
  };
  const Vec3 a = world(peg.base.vertices[v], 0.0);
  const Vec3 b = world(peg.base.vertices[v], peg.height);
  const double dz = b.z() - a.z();
  if (std::abs(dz) < 1e-12)
    throw ProjectionUndefinedError("supporting lateral edge is parallel to the board plane");
  const double s = -a.z() / dz;
  if (s < -1e-9 || s > 1.0 + 1e-9)
    throw ProjectionUndefinedError("supporting lateral edge does not reach the board plane");
  const Vec3 vl = a + s * (b - a);

  // footprint-polygon edge directions at v_lateral: each adjacent lateral
  // face of the prism cuts the plane along a line through v_lateral
  const Vec3 h_vec = r * Vec3(0, 0, peg.height);
  const Vec3 a_prev = world(peg.base.vertices[(v + n - 1) % n], 0.0);
  const Vec3 a_next = world(peg.base.vertices[(v + 1) % n], 0.0);
  // face (prev -> v): u runs from prev (0) to v (1); into the face means du < 0
  const Vec3 dir_prev = -h_vec.z() * (a - a_prev) + (a.z() - a_prev.z()) * h_vec;
  // face (v -> next): u runs from v (0) to next (1); into the face means du > 0
  const Vec3 dir_next = h_vec.z() * (a_next - a) - (a_next.z() - a.z()) * h_vec;
  const Vec2 d1(dir_prev.x(), dir_prev.y());
  const Vec2 d2(dir_next.x(), dir_next.y());
  if (d1.norm() < 1e-15 || d2.norm() < 1e-15)
    throw ProjectionUndefinedError("degenerate footprint angle at the lateral vertex");

  ProjectedState out;
  out.v_lateral = Vec2(vl.x(), vl.y());
  out.theta_lateral = std::atan2(std::abs(cross2(d1, d2)), d1.dot(d2));
  return out;
}

AngularSector well_region(const CornerGeometry& corner) {
  if (corner.angle >= M_PI) throw UnsupportedCornerError("reflex corner has no potential well");
  const Vec2 ui = (corner.vi - corner.vj).normalized();
  const Vec2 uk = (corner.vk - corner.vj).normalized();
  AngularSector s;
  s.apex = corner.vj;
  s.kind = AngularSector::Kind::Well;
  s.anchor1 = corner.vj;
  s.normal1 = -ui;
  s.anchor2 = corner.vj;
  s.normal2 = -uk;
  // boundary rays: perpendiculars to each edge on the admissible side
  const Vec2 p1 = perp(ui);
  s.ray_a = (p1.dot(uk) <= 0.0) ? p1 : Vec2(-p1);
  const Vec2 p2 = perp(uk);
  s.ray_b = (p2.dot(ui) <= 0.0) ? p2 : Vec2(-p2);
  s.degenerate = (M_PI - corner.angle) <= 1e-6;
  return s;
}

AngularSector basin_region(const CornerGeometry& corner) {
  if (corner.angle >= M_PI) throw UnsupportedCornerError("reflex corner has no basin");
  const Vec2 m1 = (corner.vj - corner.vi).normalized();
  const Vec2 m2 = (corner.vj - corner.vk).normalized();
  AngularSector s;
  s.kind = AngularSector::Kind::Basin;
  s.anchor1 = corner.vi;
  s.normal1 = m1;
  s.anchor2 = corner.vk;
  s.normal2 = m2;
  // apex: intersection of the two boundary lines (through vi perp m1, vk perp m2)
  const double denom = cross2(perp(m1), perp(m2));
  if (std::abs(denom) < 1e-12) {
    s.degenerate = true;
    s.apex = corner.vj;
    return s;
  }
  // solve vi + t1 * perp(m1) with (p - vk) . m2 = 0
  const double t1 = (corner.vk - corner.vi).dot(m2) / perp(m1).dot(m2);
  s.apex = corner.vi + t1 * perp(m1);
  s.ray_a = (corner.vi - s.apex).norm() > 1e-12 ? (corner.vi - s.apex).normalized() : -m2;
  s.ray_b = (corner.vk - s.apex).norm() > 1e-12 ? (corner.vk - s.apex).normalized() : -m1;
  s.degenerate = (M_PI - corner.angle) <= 1e-6;
  return s;
}

BasinForAnchor basin_region_for(const CornerGeometry& corner, const Vec2& anchor) {
  BasinForAnchor b;
  const Vec2 da = (corner.vi - anchor).normalized();
  const Vec2 db = (corner.vk - anchor).normalized();
  b.at_anchor = wedge(anchor, da, db, AngularSector::Kind::Basin);
  const Vec2 ui = (corner.vi - corner.vj).normalized();
  const Vec2 uk = (corner.vk - corner.vj).normalized();
  b.at_corner = wedge(corner.vj, ui, uk, AngularSector::Kind::Basin);
  return b;
}

IntersectedRegions intersect_over_samples(const HoleShape& hole, int corner_index,
                                          const std::vector<PlanarPose>& samples,
                                          RandomStream& rng, const IntersectParams& params) {
  if (samples.empty()) throw PreconditionError("intersect_over_samples: no hypotheses");
  const CornerGeometry local = corner(hole, corner_index);
  IntersectedRegions regions;
  regions.corner_index = corner_index;
  Vec2 mean_apex = Vec2::Zero();
  std::vector<CornerGeometry> corners;
  corners.reserve(samples.size());
  for (const PlanarPose& s : samples) {
    const CornerGeometry c = transformed(local, s);
    corners.push_back(c);
    regions.wells.push_back(well_region(c));
    mean_apex += c.vj;
  }
  mean_apex /= static_cast<double>(samples.size());
  regions.corner_estimate = mean_apex;

  const double radius =
      std::min(params.anchor_radius_factor * hole.base.circumradius, params.max_anchor_radius);
  double best_clearance = -1.0;
  for (int i = 0; i < params.anchor_ring_candidates; ++i) {
    const double a = 2.0 * M_PI * i / params.anchor_ring_candidates;
    const Vec2 cand = mean_apex + radius * Vec2(std::cos(a), std::sin(a));
    double clearance = std::numeric_limits<double>::max();
    bool ok = true;
    for (const AngularSector& w : regions.wells) {
      if (!w.contains(cand)) {
        ok = false;
        break;
      }
      clearance = std::min(clearance, w.boundary_clearance(cand));
    }
    if (ok && clearance > best_clearance) {
      best_clearance = clearance;
      regions.well_anchor = cand;
    }
  }
  if (best_clearance < 0.0)
    throw EmptyWellError("intersected well is empty: hypotheses too spread for alignment");

  for (const CornerGeometry& c : corners)
    regions.basins.push_back(basin_region_for(c, regions.well_anchor));

  // witness: a point of the intersected basin near the corner, inside every
  // hypothesized opening so a placement there can actually pierce the plane
  double margin = std::min(0.002, 0.2 * hole.base.circumradius);
  for (int relax = 0; relax < 2; ++relax) {
    for (int t = 0; t < params.witness_tries; ++t) {
      const double a = rng.uniform(0.0, 2.0 * M_PI);
      const double r = hole.base.circumradius * std::sqrt(rng.uniform());
      const Vec2 cand = mean_apex + r * Vec2(std::cos(a), std::sin(a));
      if (!regions.basin_contains(cand)) continue;
      bool inside_all = true;
      for (const PlanarPose& s : samples) {
        if (signed_distance(hole.base, s.apply_inverse(cand)) > -margin) {
          inside_all = false;
          break;
        }
      }
      if (inside_all) {
        regions.basin_witness = cand;
        return regions;
      }
    }
    margin *= 0.25;
  }
  throw EmptyWellError("no basin witness found inside the hypothesized openings");
}

int symmetry_corner_stride(int vertex_count, double symmetry_period) {
  const double stride = vertex_count * symmetry_period / (2.0 * M_PI);
  const int s = static_cast<int>(std::lround(stride));
  if (s < 1) return 1;
  return std::min(s, vertex_count);
}

std::optional<IntersectedRegions> regions_containing(const HoleShape& hole, int base_corner,
                                                     int corner_stride,
                                                     const std::vector<PlanarPose>& samples,
                                                     const Vec2& projection, RandomStream& rng,
                                                     const IntersectParams& params) {
  const int n = hole.base.size();
  corner_stride = std::max(1, corner_stride);
  // candidate corners ordered by distance of their mean apex to the projection
  std::vector<std::pair<double, int>> order;
  for (int c = base_corner % corner_stride; c < n; c += corner_stride) {
    if (hole.corner_angles[c] >= M_PI) continue;
    Vec2 mean = Vec2::Zero();
    for (const PlanarPose& s : samples) mean += s.apply(hole.base.vertices[c]);
    mean /= static_cast<double>(samples.size());
    order.emplace_back((mean - projection).norm(), c);
  }
  std::sort(order.begin(), order.end());
  for (const auto& [dist, c] : order) {
    try {
      IntersectedRegions regions = intersect_over_samples(hole, c, samples, rng, params);
      if (regions.basin_contains(projection)) return regions;
    } catch (const EmptyWellError&) {
      continue;
    }
  }
  return std::nullopt;
}

AlignOutcome align(const BoardEnvironment& env, const PegShape& peg,
                   const IntersectedRegions& regions, const InclinedState& start,
                   const ComplianceParams& k, double sigma, RandomStream* rng) {
  if (k.translation_dominance() < 100.0)
    throw PreconditionError("align: translational stiffness dominance ratio must be >= 100");
  const ProjectedState proj = project(peg, start);
  if (!regions.basin_contains(proj.v_lateral))
    throw PreconditionError("align: start projection lies outside the intersected basin");

  InteractionCommand cmd;
  cmd.start = start.pose;
  cmd.desired = start.pose;
  const Vec2 pull = regions.well_anchor - proj.v_lateral;
  cmd.desired.position.x() += pull.x();
  cmd.desired.position.y() += pull.y();
  cmd.supporting_vertex = start.supporting_vertex;
  if (sigma > 0.0 && rng) cmd = perturb(cmd, sigma, *rng);

  AlignOutcome out;
  out.steady = settle(env, peg, cmd, k);

  const CornerGeometry truth =
      transformed(corner(env.hole, regions.corner_index), env.hole_pose);
  const InclinedState result = InclinedState::from_pose(out.steady.pose, peg);
  const ProjectedState result_proj = project(peg, result);
  out.deviation.delta_v = (result_proj.v_lateral - truth.vj).norm();
  out.deviation.delta_theta = std::abs(truth.angle - result_proj.theta_lateral);
  return out;
}

int choose_corner(const HoleShape& hole, const std::vector<PlanarPose>& samples) {
  if (samples.empty()) throw PreconditionError("choose_corner: no hypotheses");
  const int n = hole.base.size();
  int best_index = -1;
  double best_area = -1.0;
  for (int i = 0; i < n; ++i) {
    if (hole.corner_angles[i] >= M_PI) continue;  // reflex corners excluded
    const CornerGeometry local = corner(hole, i);
    std::vector<AngularSector> wells;
    Vec2 mean_apex = Vec2::Zero();
    wells.reserve(samples.size());
    for (const PlanarPose& s : samples) {
      const CornerGeometry c = transformed(local, s);
      wells.push_back(well_region(c));
      mean_apex += c.vj;
    }
    mean_apex /= static_cast<double>(samples.size());
    const double half = 2.0 * hole.base.circumradius;
    const int res = 64;
    const double cell = 2.0 * half / res;
    int count = 0;
    for (int iy = 0; iy < res; ++iy) {
      for (int ix = 0; ix < res; ++ix) {
        const Vec2 p(mean_apex.x() - half + (ix + 0.5) * cell,
                     mean_apex.y() - half + (iy + 0.5) * cell);
        bool in_all = true;
        for (const AngularSector& w : wells) {
          if (!w.contains(p)) {
            in_all = false;
            break;
          }
        }
        if (in_all) ++count;
      }
    }
    const double area = count * cell * cell;
    if (area > best_area + 1e-15) {
      best_area = area;
      best_index = i;
    }
  }
  if (best_index < 0 || best_area <= 0.0)
    throw EmptyWellError("every corner yields an empty intersected well");
  return best_index;
}

void dump_membership_pgm(const std::string& path, const IntersectedRegions& regions, bool well,
                         const Vec2& center, double half_extent, int resolution) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path);
  out << "P2\n" << resolution << " " << resolution << "\n255\n";
  const double cell = 2.0 * half_extent / resolution;
  for (int iy = resolution - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      const Vec2 p(center.x() - half_extent + (ix + 0.5) * cell,
                   center.y() - half_extent + (iy + 0.5) * cell);
      const bool in = well ? regions.well_contains(p) : regions.basin_contains(p);
      out << (in ? 255 : 0) << (ix + 1 == resolution ? "" : " ");
    }
    out << "\n";
  }
}

}  // namespace pih
