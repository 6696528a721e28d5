#include "support/oracles.hpp"

#include <cmath>
#include <limits>

namespace pih::oracle {

double boundary_sampled_distance(const Polygon2& poly, const Vec2& p, int samples_per_edge) {
  double best = std::numeric_limits<double>::max();
  const int n = poly.size();
  for (int i = 0; i < n; ++i) {
    const Vec2& a = poly.vertices[i];
    const Vec2& b = poly.vertices[(i + 1) % n];
    for (int s = 0; s <= samples_per_edge; ++s) {
      const Vec2 q = a + (b - a) * (static_cast<double>(s) / samples_per_edge);
      best = std::min(best, (p - q).norm());
    }
  }
  return poly.contains(p) ? -best : best;
}

std::vector<Vec3> sampled_footprint(const PegShape& peg, const Pose6& pose, int steps_per_edge) {
  const Mat3 r = pose.rotation_matrix();
  const Vec3& t = pose.position;
  std::vector<Vec3> hits;
  auto push_unique = [&](const Vec3& h) {
    for (const Vec3& kept : hits)
      if ((kept - h).norm() <= 1e-7) return;
    hits.push_back(h);
  };
  auto scan_edge = [&](const Vec3& la, const Vec3& lb) {
    auto z_at = [&](double s) { return (r * (la + s * (lb - la)) + t).z(); };
    auto world_at = [&](double s) { return Vec3(r * (la + s * (lb - la)) + t); };
    double prev_s = 0.0, prev_z = z_at(0.0);
    if (std::abs(prev_z) < 1e-12) {
      const Vec3 w = world_at(0.0);
      push_unique(Vec3(w.x(), w.y(), 0.0));
    }
    for (int i = 1; i <= steps_per_edge; ++i) {
      const double s = static_cast<double>(i) / steps_per_edge;
      const double z = z_at(s);
      if (std::abs(z) < 1e-12) {
        const Vec3 w = world_at(s);
        push_unique(Vec3(w.x(), w.y(), 0.0));
      } else if ((prev_z < 0) != (z < 0) && std::abs(prev_z) >= 1e-12) {
        double lo = prev_s, hi = s;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          if ((z_at(mid) < 0) == (prev_z < 0))
            lo = mid;
          else
            hi = mid;
        }
        const Vec3 w = world_at(0.5 * (lo + hi));
        push_unique(Vec3(w.x(), w.y(), 0.0));
      }
      prev_s = s;
      prev_z = z;
    }
  };
  const int n = peg.base.size();
  for (int i = 0; i < n; ++i) {
    const Vec3 b0 = peg.base_vertex(i);
    const Vec3 b1 = peg.base_vertex((i + 1) % n);
    scan_edge(b0, b1);
    scan_edge(b0, b0 + Vec3(0, 0, peg.height));
    scan_edge(b0 + Vec3(0, 0, peg.height), b1 + Vec3(0, 0, peg.height));
  }
  return hits;
}

GridMinResult grid_minimize_3dof(const BoardEnvironment& env, const PegShape& peg,
                                 const Pose6& desired, const Vec6& stiffness, const Pose6& center,
                                 double half_x, double half_z, double half_pitch,
                                 int cells_per_axis) {
  GridMinResult result;
  result.found = false;
  result.energy = std::numeric_limits<double>::max();
  const int n = cells_per_axis;
  for (int ix = -n; ix <= n; ++ix) {
    for (int iz = -n; iz <= n; ++iz) {
      for (int ip = -n; ip <= n; ++ip) {
        Pose6 pose = center;
        pose.position.x() += half_x * ix / n;
        pose.position.z() += half_z * iz / n;
        pose.rotation.y() += half_pitch * ip / n;
        if (max_penetration(env, peg, pose) > 1e-9) continue;
        const Vec6 d = pose_delta(desired, pose);
        const double u = 0.5 * (stiffness.array() * d.array() * d.array()).sum();
        if (u < result.energy) {
          result.energy = u;
          result.pose = pose;
          result.found = true;
        }
      }
    }
  }
  return result;
}

double polygon_rotational_play(const Polygon2& peg_base, const Polygon2& hole_base,
                               const PlanarPose& hole_pose, const PlanarPose& peg_planar,
                               const Vec2& pivot, double tol) {
  auto feasible = [&](double psi) {
    const double c = std::cos(psi), s = std::sin(psi);
    for (const Vec2& v : peg_base.vertices) {
      const Vec2 w0 = peg_planar.apply(v) - pivot;
      const Vec2 w(pivot.x() + c * w0.x() - s * w0.y(), pivot.y() + s * w0.x() + c * w0.y());
      if (signed_distance(hole_base, hole_pose.apply_inverse(w)) > tol) return false;
    }
    return true;
  };
  auto extreme = [&](double dir) {
    double lo = 0.0, hi = 0.5;
    if (feasible(dir * hi)) return hi;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (feasible(dir * mid))
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  };
  return extreme(+1.0) + extreme(-1.0);
}

Eigen::MatrixXd batch_rls_solution(const std::vector<Eigen::VectorXd>& phis,
                                   const std::vector<Eigen::VectorXd>& targets,
                                   const Eigen::MatrixXd& gamma0, const Eigen::MatrixXd& p0,
                                   double lambda) {
  const int d = static_cast<int>(gamma0.rows());
  const int T = static_cast<int>(phis.size());
  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd atb = Eigen::MatrixXd::Zero(d, gamma0.cols());
  for (int t = 0; t < T; ++t) {
    const double w = std::pow(lambda, T - 1 - t);
    ata += w * phis[t] * phis[t].transpose();
    atb += w * phis[t] * targets[t].transpose();
  }
  const double w_prior = std::pow(lambda, T);
  const Eigen::MatrixXd p0_inv = p0.inverse();
  ata += w_prior * p0_inv;
  atb += w_prior * p0_inv * gamma0;
  return ata.ldlt().solve(atb);
}

}  // namespace pih::oracle
