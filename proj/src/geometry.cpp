#include "pih/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace pih {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = cross2(b - a, c - a);
  const double d2 = cross2(b - a, d - a);
  const double d3 = cross2(d - c, a - c);
  const double d4 = cross2(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

}  // namespace

double Polygon2::area() const {
  double a = 0.0;
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const Vec2& p = vertices[i];
    const Vec2& q = vertices[(i + 1) % n];
    a += cross2(p, q);
  }
  return 0.5 * a;
}

double Polygon2::perimeter() const {
  double l = 0.0;
  const int n = size();
  for (int i = 0; i < n; ++i) l += (vertices[(i + 1) % n] - vertices[i]).norm();
  return l;
}

bool Polygon2::is_convex() const {
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % n];
    const Vec2& c = vertices[(i + 2) % n];
    if (cross2(b - a, c - b) <= 0.0) return false;
  }
  return true;
}

void Polygon2::validate() {
  const int n = size();
  if (n < 3) throw InvalidGeometryError("polygon needs at least 3 vertices");
  const double a = area();
  if (a <= 0.0) throw InvalidGeometryError("polygon must be CCW with non-zero area");
  // non-adjacent edge pairs must not cross
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j],
                             vertices[(j + 1) % n]))
        throw InvalidGeometryError("polygon is self-intersecting");
    }
  }
  Vec2 c = Vec2::Zero();
  for (const Vec2& v : vertices) c += v;
  centroid = c / n;
  circumradius = 0.0;
  for (const Vec2& v : vertices) circumradius = std::max(circumradius, (v - centroid).norm());
}

bool Polygon2::contains(const Vec2& p) const {
  const int n = size();
  bool inside = false;
  for (int i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& vi = vertices[i];
    const Vec2& vj = vertices[j];
    // on-edge check
    const Vec2 e = vj - vi;
    const double t = e.squaredNorm() > 0 ? std::clamp((p - vi).dot(e) / e.squaredNorm(), 0.0, 1.0) : 0.0;
    if ((vi + t * e - p).squaredNorm() < 1e-24) return true;
    if ((vi.y() > p.y()) != (vj.y() > p.y())) {
      const double xint = vi.x() + (p.y() - vi.y()) / (vj.y() - vi.y()) * (vj.x() - vi.x());
      if (p.x() < xint) inside = !inside;
    }
  }
  return inside;
}

Polygon2 make_polygon(std::vector<Vec2> vertices) {
  Polygon2 poly;
  poly.vertices = std::move(vertices);
  poly.validate();
  return poly;
}

Polygon2 make_regular_polygon(int n, double circumradius) {
  std::vector<Vec2> v;
  v.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    v.emplace_back(circumradius * std::cos(a), circumradius * std::sin(a));
  }
  return make_polygon(std::move(v));
}

Polygon2 make_rectangle(double width, double height) {
  const double w = width / 2.0, h = height / 2.0;
  return make_polygon({{-w, -h}, {w, -h}, {w, h}, {-w, h}});
}

SignedDistanceDetail signed_distance_detail(const Polygon2& poly, const Vec2& p) {
  const int n = poly.size();
  if (n < 3) throw InvalidGeometryError("degenerate polygon");
  double best = std::numeric_limits<double>::max();
  Vec2 closest = poly.vertices[0];
  for (int i = 0; i < n; ++i) {
    const Vec2& a = poly.vertices[i];
    const Vec2& b = poly.vertices[(i + 1) % n];
    const Vec2 e = b - a;
    const double len2 = e.squaredNorm();
    const double t = len2 > 0 ? std::clamp((p - a).dot(e) / len2, 0.0, 1.0) : 0.0;
    const Vec2 q = a + t * e;
    const double d2 = (p - q).squaredNorm();
    if (d2 < best) {
      best = d2;
      closest = q;
    }
  }
  const double dist = std::sqrt(best);
  const bool inside = poly.contains(p);
  SignedDistanceDetail out;
  out.value = inside ? -dist : dist;
  out.closest = closest;
  if (dist > 1e-15) {
    out.gradient = (inside ? (closest - p) : (p - closest)) / dist;
  } else {
    out.gradient = Vec2(0, 0);
    out.value = 0.0;
  }
  return out;
}

double signed_distance(const Polygon2& poly, const Vec2& p) {
  return signed_distance_detail(poly, p).value;
}

Polygon2 offset_convex(const Polygon2& poly, double distance) {
  if (distance == 0.0) return poly;
  if (!poly.is_convex()) throw InvalidGeometryError("offset requires a convex polygon");
  const int n = poly.size();
  std::vector<Vec2> out(n);
  for (int i = 0; i < n; ++i) {
    // new vertex i = intersection of the offset lines of edges (i-1,i) and (i,i+1)
    const Vec2& prev = poly.vertices[(i + n - 1) % n];
    const Vec2& cur = poly.vertices[i];
    const Vec2& next = poly.vertices[(i + 1) % n];
    const Vec2 e0 = (cur - prev).normalized();
    const Vec2 e1 = (next - cur).normalized();
    const Vec2 n0(e0.y(), -e0.x());  // outward for CCW
    const Vec2 n1(e1.y(), -e1.x());
    const double denom = cross2(e0, e1);
    if (std::abs(denom) < 1e-12) {
      out[i] = cur + distance * n0;  // collinear edges share the normal
      continue;
    }
    // solve p . n0 = cur . n0 + d, p . n1 = cur . n1 + d
    Eigen::Matrix2d m;
    m << n0.x(), n0.y(), n1.x(), n1.y();
    const Vec2 rhs(cur.dot(n0) + distance, cur.dot(n1) + distance);
    out[i] = m.inverse() * rhs;
  }
  return make_polygon(std::move(out));
}

void HoleShape::validate() const {
  if (depth <= 0.0) throw InvalidGeometryError("hole depth must be > 0");
  const int n = base.size();
  if (static_cast<int>(corner_angles.size()) != n)
    throw InvalidGeometryError("corner_angles size mismatch");
  for (int i = 0; i < n; ++i) {
    const Vec2& vj = base.vertices[i];
    const Vec2 ui = (base.vertices[(i + n - 1) % n] - vj).normalized();
    const Vec2 uk = (base.vertices[(i + 1) % n] - vj).normalized();
    double ang = std::atan2(cross2(uk, ui), uk.dot(ui));
    if (ang < 0) ang += 2.0 * M_PI;
    if (std::abs(ang - corner_angles[i]) > 1e-9)
      throw InvalidGeometryError("corner angle mismatch");
  }
}

HoleShape make_hole(Polygon2 base, double depth) {
  base.validate();
  HoleShape hole;
  hole.base = std::move(base);
  hole.depth = depth;
  const int n = hole.base.size();
  hole.corner_angles.resize(n);
  for (int i = 0; i < n; ++i) {
    const Vec2& vj = hole.base.vertices[i];
    const Vec2 ui = (hole.base.vertices[(i + n - 1) % n] - vj).normalized();
    const Vec2 uk = (hole.base.vertices[(i + 1) % n] - vj).normalized();
    double ang = std::atan2(cross2(uk, ui), uk.dot(ui));
    if (ang < 0) ang += 2.0 * M_PI;
    hole.corner_angles[i] = ang;
  }
  hole.validate();
  return hole;
}

CornerGeometry corner(const HoleShape& hole, int index) {
  const int n = hole.base.size();
  if (index < 0 || index >= n) throw InvalidGeometryError("corner index out of range");
  CornerGeometry c;
  c.index = index;
  c.vj = hole.base.vertices[index];
  c.vi = hole.base.vertices[(index + n - 1) % n];
  c.vk = hole.base.vertices[(index + 1) % n];
  c.angle = hole.corner_angles[index];
  if (c.angle >= M_PI) throw UnsupportedCornerError("reflex corners are not supported");
  return c;
}

CornerGeometry transformed(const CornerGeometry& c, const PlanarPose& pose) {
  CornerGeometry out = c;
  out.vi = pose.apply(c.vi);
  out.vj = pose.apply(c.vj);
  out.vk = pose.apply(c.vk);
  return out;
}

PegShape make_peg(Polygon2 base, double height, double sample_density) {
  base.validate();
  if (height <= 0.0) throw InvalidGeometryError("peg height must be > 0");
  PegShape peg;
  peg.base = std::move(base);
  peg.height = height;
  peg.sample_density = sample_density;

  const int n = peg.base.size();
  auto sample_edge = [&](const Vec3& a, const Vec3& b, bool include_start) {
    const double len = (b - a).norm();
    const int segs = std::max(1, static_cast<int>(std::ceil(len * sample_density)));
    for (int s = include_start ? 0 : 1; s < segs; ++s)
      peg.edge_samples.push_back(a + (b - a) * (static_cast<double>(s) / segs));
  };

  peg.base_vertex_sample.resize(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 v0 = peg.base_vertex(i);
    const Vec3 v1 = peg.base_vertex((i + 1) % n);
    peg.base_vertex_sample[i] = static_cast<int>(peg.edge_samples.size());
    sample_edge(v0, v1, true);                              // base edge, owns its start vertex
    sample_edge(v0, v0 + Vec3(0, 0, height), false);        // lateral edge
    sample_edge(v0 + Vec3(0, 0, height), v1 + Vec3(0, 0, height), false);  // top edge
    peg.edge_samples.push_back(v0 + Vec3(0, 0, height));    // top vertex
  }

  peg.samples.resize(3, peg.sample_count());
  for (int i = 0; i < peg.sample_count(); ++i) peg.samples.col(i) = peg.edge_samples[i];
  peg.circumradius3d = 0.0;
  for (const Vec3& p : peg.edge_samples)
    peg.circumradius3d = std::max(peg.circumradius3d, p.norm());
  return peg;
}

bool BoardRegion::contains(const Vec2& p) const { return margin(p) >= 0.0; }

double BoardRegion::margin(const Vec2& p) const {
  if (poly) return -signed_distance(*poly, p);
  return radius - (p - center).norm();
}

Eigen::AlignedBox2d BoardRegion::bounding_box() const {
  Eigen::AlignedBox2d box;
  if (poly) {
    for (const Vec2& v : poly->vertices) box.extend(v);
  } else {
    box.extend(Vec2(center.x() - radius, center.y() - radius));
    box.extend(Vec2(center.x() + radius, center.y() + radius));
  }
  return box;
}

void BoardEnvironment::validate() const {
  hole.validate();
  for (const Vec2& v : hole.base.vertices) {
    if (!board.contains(hole_pose.apply(v)))
      throw InvalidGeometryError("transformed hole area must lie inside the board region");
  }
}

int occupancy(const BoardEnvironment& env, const Vec3& p) {
  if (p.z() > 0.0) return 1;
  const double f = env.hole_distance(Vec2(p.x(), p.y()));
  if (p.z() < 0.0 && f > 0.0) return -1;
  if (p.z() <= 0.0 && f < 0.0) return 1;
  return 0;
}

namespace {

void add_plane_hits(std::vector<Vec3>& hits, const Vec3& wa, const Vec3& wb, double tol) {
  const double za = wa.z(), zb = wb.z();
  const bool a_on = std::abs(za) <= tol, b_on = std::abs(zb) <= tol;
  if (a_on) hits.emplace_back(wa.x(), wa.y(), 0.0);
  if (b_on) hits.emplace_back(wb.x(), wb.y(), 0.0);
  if (!a_on && !b_on && ((za > 0) != (zb > 0))) {
    const double t = za / (za - zb);
    const Vec3 c = wa + t * (wb - wa);
    hits.emplace_back(c.x(), c.y(), 0.0);
  }
}

}  // namespace

Footprint footprint(const PegShape& peg, const Pose6& pose, double plane_tol) {
  const Mat3 r = pose.rotation_matrix();
  const Vec3& t = pose.position;
  const int n = peg.base.size();
  std::vector<Vec3> hits;
  auto world = [&](const Vec3& local) { return Vec3(r * local + t); };
  for (int i = 0; i < n; ++i) {
    const Vec3 b0 = world(peg.base_vertex(i));
    const Vec3 b1 = world(peg.base_vertex((i + 1) % n));
    const Vec3 t0 = world(peg.base_vertex(i) + Vec3(0, 0, peg.height));
    const Vec3 t1 = world(peg.base_vertex((i + 1) % n) + Vec3(0, 0, peg.height));
    add_plane_hits(hits, b0, b1, plane_tol);  // base edge
    add_plane_hits(hits, b0, t0, plane_tol);  // lateral edge
    add_plane_hits(hits, t0, t1, plane_tol);  // top edge
  }
  // dedup within 1e-7 m
  Footprint fp;
  for (const Vec3& h : hits) {
    bool dup = false;
    for (const Vec3& kept : fp.points) {
      if ((kept - h).norm() <= 1e-7) {
        dup = true;
        break;
      }
    }
    if (!dup) fp.points.push_back(h);
  }
  return fp;
}

PrismPair random_prism(uint64_t seed, const Vec2& bounding_box,
                       std::pair<int, int> vertex_count_range, double clearance,
                       double peg_height, double hole_depth, double sample_density) {
  if (clearance < 0.0) throw InvalidGeometryError("clearance must be >= 0");
  RandomStream rng(seed);
  const int retry_bound = 64;
  for (int attempt = 0; attempt < retry_bound; ++attempt) {
    // convex hull of random points, rescaled to the exact bounding box
    const int want = rng.uniform_int(vertex_count_range.first, vertex_count_range.second);
    std::vector<Vec2> pts;
    const int cloud = std::max(want * 3, 12);
    for (int i = 0; i < cloud; ++i)
      pts.emplace_back(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    // Andrew monotone chain
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
      return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    auto build = [&](std::vector<Vec2>& out, auto begin, auto end) {
      for (auto it = begin; it != end; ++it) {
        while (out.size() >= 2 &&
               cross2(out[out.size() - 1] - out[out.size() - 2], *it - out[out.size() - 1]) <=
                   1e-9)
          out.pop_back();
        out.push_back(*it);
      }
    };
    std::vector<Vec2> lower, upper;
    build(lower, pts.begin(), pts.end());
    build(upper, pts.rbegin(), pts.rend());
    lower.pop_back();
    upper.pop_back();
    std::vector<Vec2> hull = lower;
    hull.insert(hull.end(), upper.begin(), upper.end());
    if (static_cast<int>(hull.size()) < vertex_count_range.first ||
        static_cast<int>(hull.size()) > vertex_count_range.second)
      continue;
    // rescale so the bbox is exactly as requested, centered at the origin
    Eigen::AlignedBox2d box;
    for (const Vec2& v : hull) box.extend(v);
    const Vec2 span = box.max() - box.min();
    if (span.x() < 1e-9 || span.y() < 1e-9) continue;
    const Vec2 mid = 0.5 * (box.max() + box.min());
    for (Vec2& v : hull) {
      v = Vec2((v.x() - mid.x()) * bounding_box.x() / span.x(),
               (v.y() - mid.y()) * bounding_box.y() / span.y());
    }
    try {
      Polygon2 base = make_polygon(hull);
      if (!base.is_convex()) continue;
      PrismPair pair;
      pair.clearance = clearance;
      pair.peg = make_peg(base, peg_height, sample_density);
      pair.hole = make_hole(clearance > 0.0 ? offset_convex(base, clearance / 2.0) : base,
                            hole_depth);
      return pair;
    } catch (const InvalidGeometryError&) {
      continue;
    }
  }
  throw InvalidGeometryError("random_prism: retry bound exceeded");
}

}  // namespace pih
