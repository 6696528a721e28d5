#include "pih/quasistatic.hpp"

#include <algorithm>
#include <cmath>

namespace pih {

namespace {

constexpr double kStepTrans = 1e-4;      // m
constexpr double kStepRot = 1e-3;        // rad
constexpr int kIterationBudget = 100000;
constexpr double kResolveTarget = 1e-10;  // residual penetration after projection
constexpr double kPenetrationTol = 1e-6;  // hard bound on any steady state
constexpr double kPoseChangeTol = 1e-9;
constexpr double kPlaneBand = 1e-8;       // on-plane band for observations

struct Contact {
  double depth;
  Vec3 world;
  Vec3 normal;  // exit direction out of board material
};

// Penetration of sampled peg points, plus rim-crossing contacts: where a
// wireframe edge pierces the surface plane, the crossing point itself must
// lie in the opening's closure (the sampled points only bound penetration at
// sample resolution; for a convex opening, enforcing the crossing confines
// the whole submerged stretch). Returns the max depth; contacts deeper than
// depth_tol are appended when out != nullptr.
double contact_scan(const BoardEnvironment& env, const PegShape& peg, const Pose6& pose,
                    double depth_tol, std::vector<Contact>* out, double* min_z_out) {
  const Mat3 r = pose.rotation_matrix();
  const Eigen::RowVectorXd z = (r.row(2) * peg.samples).array() + pose.position.z();
  if (min_z_out) *min_z_out = z.minCoeff();
  double max_depth = 0.0;
  auto consider = [&](double depth, const Vec3& world, const Vec3& normal) {
    max_depth = std::max(max_depth, depth);
    if (out && depth > depth_tol) out->push_back({depth, world, normal});
  };
  auto lateral_normal = [&](const SignedDistanceDetail& sd) {
    const double cy = std::cos(env.hole_pose.yaw), sy = std::sin(env.hole_pose.yaw);
    const Vec2 g(cy * sd.gradient.x() - sy * sd.gradient.y(),
                 sy * sd.gradient.x() + cy * sd.gradient.y());
    return Vec3(-g.x(), -g.y(), 0.0);
  };
  for (int i = 0; i < z.size(); ++i) {
    if (z[i] >= 0.0) continue;
    const Vec3 w = r * peg.samples.col(i) + pose.position;
    const auto sd =
        signed_distance_detail(env.hole.base, env.world_to_hole(Vec2(w.x(), w.y())));
    if (sd.value <= 0.0) continue;  // below the plane but inside the opening
    const double up = -z[i];
    if (up <= sd.value)
      consider(up, w, Vec3(0, 0, 1));
    else
      consider(sd.value, w, lateral_normal(sd));
  }
  // rim crossings of wireframe edges with a genuinely submerged end
  const int n = peg.base.size();
  auto world_of = [&](const Vec3& local) { return Vec3(r * local + pose.position); };
  auto edge_crossing = [&](const Vec3& wa, const Vec3& wb) {
    const double za = wa.z(), zb = wb.z();
    const bool a_sub = za < -1e-9, b_sub = zb < -1e-9;
    if (a_sub == b_sub) return;
    const Vec3& sub = a_sub ? wa : wb;
    if ((a_sub ? zb : za) < 1e-15) return;  // no strictly-above end
    const double t = za / (za - zb);
    const Vec3 c = wa + t * (wb - wa);
    const auto sd = signed_distance_detail(env.hole.base, env.world_to_hole(Vec2(c.x(), c.y())));
    if (sd.value <= 0.0) return;
    const double lift = -sub.z();
    if (lift <= sd.value)
      consider(lift, sub, Vec3(0, 0, 1));
    else
      consider(sd.value, Vec3(c.x(), c.y(), 0.0), lateral_normal(sd));
  };
  for (int i = 0; i < n; ++i) {
    const Vec3 b0 = world_of(peg.base_vertex(i));
    const Vec3 b1 = world_of(peg.base_vertex((i + 1) % n));
    const Vec3 t0 = world_of(peg.base_vertex(i) + Vec3(0, 0, peg.height));
    const Vec3 t1 = world_of(peg.base_vertex((i + 1) % n) + Vec3(0, 0, peg.height));
    edge_crossing(b0, b1);
    edge_crossing(b0, t0);
    edge_crossing(t0, t1);
  }
  return max_depth;
}

class Solver {
 public:
  Solver(const BoardEnvironment& env, const PegShape& peg, const InteractionCommand& cmd,
         const ComplianceParams& k)
      : env_(env), peg_(peg), cmd_(cmd), stiffness_(k.stiffness) {
    k.validate();
    desired_ = cmd.desired.vec();
  }

  SteadyState run(std::vector<Pose6>* trace_poses, std::vector<double>* trace_energies);

 private:
  double energy(const Vec6& x) const {
    const Vec6 u = deviation(x);
    return 0.5 * (stiffness_.array() * u.array() * u.array()).sum();
  }

  Vec6 deviation(const Vec6& x) const {
    Vec6 u = desired_ - x;
    for (int i = 3; i < 6; ++i) u[i] = wrap_angle(u[i]);
    return u;
  }

  double scan(const Pose6& pose, double depth_tol, std::vector<Contact>* contacts,
              double* min_z_out) const {
    return contact_scan(env_, peg_, pose, depth_tol, contacts, min_z_out);
  }

  // push the pose out of penetration; K^-1-weighted corrections emulate the
  // impedance response to the constraint forces. Projected Gauss-Seidel over
  // the deepest contacts keeps symmetric contact sets from see-sawing.
  bool resolve(Pose6* pose) const {
    const Vec6 w_inv = stiffness_.cwiseInverse();
    for (int round = 0; round < 120; ++round) {
      std::vector<Contact> contacts;
      const double max_depth = scan(*pose, kResolveTarget, &contacts, nullptr);
      if (max_depth <= kResolveTarget) return true;
      std::sort(contacts.begin(), contacts.end(),
                [](const Contact& a, const Contact& b) { return a.depth > b.depth; });
      if (contacts.size() > 64) contacts.resize(64);
      const int m = static_cast<int>(contacts.size());
      const Mat3 e = euler_rate_map(pose->rotation);
      Eigen::MatrixXd jac(m, 6);
      Eigen::VectorXd phi(m), denom(m), lambda = Eigen::VectorXd::Zero(m);
      for (int i = 0; i < m; ++i) {
        jac.row(i).head<3>() = contacts[i].normal;
        jac.row(i).tail<3>() =
            (e.transpose() * (contacts[i].world - pose->position).cross(contacts[i].normal))
                .transpose();
        phi[i] = contacts[i].depth * 1.05 + 1e-13;
        denom[i] = (jac.row(i).transpose().array() * w_inv.array() *
                    jac.row(i).transpose().array())
                       .sum();
      }
      Vec6 dx = Vec6::Zero();
      for (int sweep = 0; sweep < 8; ++sweep) {
        for (int i = 0; i < m; ++i) {
          if (denom[i] < 1e-18) continue;
          const double resid = phi[i] - jac.row(i).dot(dx);
          const double next = std::max(0.0, lambda[i] + resid / denom[i]);
          const double d_lambda = next - lambda[i];
          lambda[i] = next;
          dx += w_inv.asDiagonal() * jac.row(i).transpose() * d_lambda;
        }
      }
      // keep corrections within collision-resolution granularity
      const double mt = dx.head<3>().cwiseAbs().maxCoeff();
      const double mr = dx.tail<3>().cwiseAbs().maxCoeff();
      const double scale = std::max({mt / (20 * kStepTrans), mr / (20 * kStepRot), 1.0});
      if (scale > 1.0) dx /= scale;
      if (dx.cwiseAbs().maxCoeff() < 1e-15) return false;  // constraints not actuatable
      pose->position += dx.head<3>();
      pose->rotation += dx.tail<3>();
    }
    return scan(*pose, kResolveTarget, nullptr, nullptr) <= kPenetrationTol;
  }

  bool segment_feasible(const Pose6& a, const Pose6& b) const {
    const Vec6 d = pose_delta(b, a);
    const double nt = d.head<3>().cwiseAbs().maxCoeff() / kStepTrans;
    const double nr = d.tail<3>().cwiseAbs().maxCoeff() / kStepRot;
    const int n = std::clamp(static_cast<int>(std::ceil(std::max(nt, nr))), 1, 128);
    for (int i = 1; i < n; ++i) {
      Pose6 p;
      const double t = static_cast<double>(i) / n;
      p.position = a.position + t * d.head<3>();
      p.rotation = a.rotation + t * d.tail<3>();
      if (scan(p, kResolveTarget, nullptr, nullptr) > 1e-7) return false;
      if (cmd_.supporting_vertex && !supporting_vertex_lowest(peg_, p, *cmd_.supporting_vertex))
        return false;
    }
    return true;
  }

  const BoardEnvironment& env_;
  const PegShape& peg_;
  const InteractionCommand& cmd_;
  Vec6 stiffness_;
  Vec6 desired_;
};

SteadyState Solver::run(std::vector<Pose6>* trace_poses, std::vector<double>* trace_energies) {
  Pose6 pose = cmd_.start;
  if (scan(pose, kResolveTarget, nullptr, nullptr) > kPenetrationTol)
    throw PreconditionError("settle: start pose penetrates the board");

  Vec6 x = pose.vec();
  double u_val = energy(x);
  bool support_ok = !cmd_.supporting_vertex ||
                    supporting_vertex_lowest(peg_, pose, *cmd_.supporting_vertex);
  auto record = [&](const Pose6& p, double e) {
    if (trace_poses) trace_poses->push_back(p.normalized());
    if (trace_energies) trace_energies->push_back(e);
  };
  record(pose, u_val);

  const double k_max = stiffness_.maxCoeff();
  int stall = 0;
  int iter = 0;
  bool converged = false;
  double last_change = 0.0;

  while (iter < kIterationBudget) {
    ++iter;
    const Vec6 u = deviation(x);
    if (u.cwiseAbs().maxCoeff() < 1e-12) {
      converged = true;
      break;
    }

    // direct shot: jump to the projected desired pose when the straight
    // segment is clear; handles free flight and plain surface presses
    if (iter == 1 || iter % 64 == 0) {
      Pose6 shot = cmd_.desired;
      if (resolve(&shot)) {
        const double e_shot = energy(shot.vec());
        if (e_shot <= u_val + 1e-15 && segment_feasible(pose, shot)) {
          const Vec6 moved = pose_delta(shot, pose);
          if (moved.cwiseAbs().maxCoeff() > kPoseChangeTol) {
            pose = shot;
            x = pose.vec();
            u_val = e_shot;
            record(pose, u_val);
            stall = 0;
            continue;
          }
          converged = true;
          break;
        }
      }
    }

    const Vec6 force = stiffness_.asDiagonal() * u;
    const double ft = force.head<3>().cwiseAbs().maxCoeff();
    const double fr = force.tail<3>().cwiseAbs().maxCoeff();
    double s = 1.0 / k_max;
    if (ft > 1e-300) s = std::min(s, kStepTrans / ft);
    if (fr > 1e-300) s = std::min(s, kStepRot / fr);

    // free flight: scale the step up while every sample is well clear
    double min_z = 0.0;
    scan(pose, kResolveTarget, nullptr, &min_z);
    if (min_z > 4 * kStepTrans) {
      const double move_bound = kStepTrans * 1.8 + kStepRot * peg_.circumradius3d;
      s *= std::clamp(0.5 * min_z / move_bound, 1.0, 1e7);
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      Vec6 x_trial = x + s * force;
      Pose6 trial = Pose6::from_vec(x_trial);
      if (!resolve(&trial)) {
        s *= 0.25;
        continue;
      }
      const double e_trial = energy(trial.vec());
      if (e_trial > u_val + 1e-15) {
        s *= 0.5;
        continue;
      }
      const Vec6 moved = pose_delta(trial, pose);
      last_change = moved.cwiseAbs().maxCoeff();
      pose = trial;
      x = pose.vec();
      u_val = e_trial;
      record(pose, u_val);
      if (cmd_.supporting_vertex)
        support_ok = support_ok && supporting_vertex_lowest(peg_, pose, *cmd_.supporting_vertex);
      accepted = true;
    }
    if (!accepted) {
      // no energy-decreasing feasible step remains: constrained minimum
      converged = true;
      break;
    }
    if (last_change < kPoseChangeTol) {
      if (++stall >= 2) {
        converged = true;
        break;
      }
    } else {
      stall = 0;
    }
  }

  if (!converged)
    throw NonConvergenceError("settle: iteration budget exhausted", pose.normalized());

  SteadyState out;
  out.pose = pose.normalized();
  out.energy = u_val;
  out.external_wrench = stiffness_.asDiagonal() * deviation(out.pose.vec());
  out.footprint = observed_footprint(peg_, out.pose);
  out.stats.iterations = iter;
  out.stats.max_penetration = scan(out.pose, kResolveTarget, nullptr, nullptr);
  out.stats.final_pose_change = last_change;
  out.stats.supporting_vertex_ok = support_ok;
  out.stats.converged = true;
  return out;
}

}  // namespace

SteadyState settle(const BoardEnvironment& env, const PegShape& peg,
                   const InteractionCommand& cmd, const ComplianceParams& k) {
  Solver solver(env, peg, cmd, k);
  return solver.run(nullptr, nullptr);
}

SettleTrace settle_trace(const BoardEnvironment& env, const PegShape& peg,
                         const InteractionCommand& cmd, const ComplianceParams& k) {
  SettleTrace trace;
  Solver solver(env, peg, cmd, k);
  trace.steady = solver.run(&trace.poses, &trace.energies);
  return trace;
}

double max_penetration(const BoardEnvironment& env, const PegShape& peg, const Pose6& pose) {
  return contact_scan(env, peg, pose, 1e300, nullptr, nullptr);
}

bool supporting_vertex_lowest(const PegShape& peg, const Pose6& pose, int vertex) {
  const Mat3 r = pose.rotation_matrix();
  const Eigen::RowVectorXd z = (r.row(2) * peg.samples).array() + pose.position.z();
  const double zv = z[peg.base_vertex_sample[vertex]];
  return zv - z.minCoeff() <= 1e-12;
}

Footprint observed_footprint(const PegShape& peg, const Pose6& pose) {
  const Mat3 r = pose.rotation_matrix();
  const Vec3& t = pose.position;
  const Eigen::RowVectorXd z = (r.row(2) * peg.samples).array() + t.z();
  const double min_z = z.minCoeff();
  Footprint fp;
  if (min_z > kPlaneBand) return fp;  // clear of the plane

  if (min_z >= -kPlaneBand) {
    // surface contact without piercing: the lowest contact point
    int arg = 0;
    z.minCoeff(&arg);
    const Vec3 w = r * peg.samples.col(arg) + t;
    fp.points.emplace_back(w.x(), w.y(), 0.0);
    return fp;
  }

  // pierced: transversal crossings of the wireframe, endpoints on the plane
  // included only next to a submerged stretch
  const int n = peg.base.size();
  auto world = [&](const Vec3& local) { return Vec3(r * local + t); };
  std::vector<Vec3> hits;
  auto classify = [&](double zz) { return zz < -kPlaneBand ? -1 : (zz > kPlaneBand ? 1 : 0); };
  auto edge = [&](const Vec3& wa, const Vec3& wb) {
    const int ca = classify(wa.z()), cb = classify(wb.z());
    if ((ca == -1 && cb >= 0) || (ca >= 0 && cb == -1)) {
      // crossing out of the submerged stretch, at z = 0 exactly
      const double span = wa.z() - wb.z();
      if (std::abs(span) < 1e-15) return;
      const double s = std::clamp(wa.z() / span, 0.0, 1.0);
      const Vec3 c = wa + s * (wb - wa);
      hits.emplace_back(c.x(), c.y(), 0.0);
    } else if (ca == 0 && cb == 0) {
      hits.emplace_back(wa.x(), wa.y(), 0.0);
      hits.emplace_back(wb.x(), wb.y(), 0.0);
    }
  };
  for (int i = 0; i < n; ++i) {
    const Vec3 b0 = world(peg.base_vertex(i));
    const Vec3 b1 = world(peg.base_vertex((i + 1) % n));
    const Vec3 t0 = world(peg.base_vertex(i) + Vec3(0, 0, peg.height));
    const Vec3 t1 = world(peg.base_vertex((i + 1) % n) + Vec3(0, 0, peg.height));
    edge(b0, b1);
    edge(b0, t0);
    edge(t0, t1);
  }
  for (const Vec3& h : hits) {
    bool dup = false;
    for (const Vec3& kept : fp.points)
      if ((kept - h).norm() <= 1e-7) {
        dup = true;
        break;
      }
    if (!dup) fp.points.push_back(h);
  }
  return fp;
}

InclinedState InclinedState::from_pose(const Pose6& pose, const PegShape& peg) {
  InclinedState s;
  s.pose = pose.normalized();
  const Mat3 r = pose.rotation_matrix();
  const Vec3 n = r.col(2);
  s.alpha = std::asin(std::clamp(n.z(), -1.0, 1.0));
  s.beta = (n.head<2>().norm() > 1e-12) ? std::atan2(n.y(), n.x()) : 0.0;
  // lowest base vertex
  double best = std::numeric_limits<double>::max();
  for (int i = 0; i < peg.base.size(); ++i) {
    const double z = (r * peg.base_vertex(i) + pose.position).z();
    if (z < best) {
      best = z;
      s.supporting_vertex = i;
    }
  }
  return s;
}

void InclinedState::validate() const {
  const Vec3 n_pose = pose.rotation_matrix().col(2);
  const Vec3 n_ab(std::cos(alpha) * std::cos(beta), std::cos(alpha) * std::sin(beta),
                  std::sin(alpha));
  if ((n_pose - n_ab).norm() > 1e-9)
    throw PreconditionError("inclined state: (alpha, beta) inconsistent with pose axis");
  if (!(alpha > 0.0 && alpha <= M_PI / 2.0))
    throw PreconditionError("inclined state: alpha out of (0, pi/2]");
}

Pose6 inclined_pose(const PegShape& peg, int supporting_vertex, const Vec2& target,
                    double vertex_z, double alpha, double beta) {
  const int n = peg.base.size();
  if (supporting_vertex < 0 || supporting_vertex >= n)
    throw InvalidCommandError("supporting vertex index out of range");
  const Vec2 v = peg.base.vertices[supporting_vertex];
  const Vec2 prev = peg.base.vertices[(supporting_vertex + n - 1) % n];
  const Vec2 next = peg.base.vertices[(supporting_vertex + 1) % n];
  const Vec2 bisector = -((next - v).normalized() + (prev - v).normalized());
  if (bisector.norm() < 1e-9)
    throw InvalidCommandError("degenerate vertex: no outward bisector");
  const Vec2 c = bisector.normalized();
  // the chosen vertex must be the strict support point along c
  const double cv = c.dot(v);
  for (int i = 0; i < n; ++i) {
    if (i == supporting_vertex) continue;
    if (c.dot(peg.base.vertices[i]) >= cv - 1e-12)
      throw InvalidCommandError("vertex cannot be made the unique lowest point");
  }
  const double sa = std::sin(alpha), ca = std::cos(alpha);
  const double sb = std::sin(beta), cb = std::cos(beta);
  // world triad:   local triad:
  Mat3 w, u;
  w.col(0) = Vec3(sa * cb, sa * sb, -ca);
  w.col(1) = Vec3(-sb, cb, 0.0);
  w.col(2) = Vec3(ca * cb, ca * sb, sa);
  u.col(0) = Vec3(c.x(), c.y(), 0.0);
  u.col(1) = Vec3(-c.y(), c.x(), 0.0);  // z cross c
  u.col(2) = Vec3(0, 0, 1);
  const Mat3 r = w * u.transpose();
  const Vec3 vertex_world(target.x(), target.y(), vertex_z);
  return Pose6::from_matrix(r, vertex_world - r * Vec3(v.x(), v.y(), 0.0));
}

namespace {

void check_definition2_on_segment(const PegShape& peg, const Pose6& a, const Pose6& b,
                                  int vertex) {
  for (int i = 0; i <= 16; ++i) {
    const double t = i / 16.0;
    Pose6 p;
    p.position = a.position + t * (b.position - a.position);
    const Vec6 d = pose_delta(b, a);
    p.rotation = a.rotation + t * d.tail<3>();
    if (!supporting_vertex_lowest(peg, p, vertex))
      throw InvalidCommandError("supporting vertex is not the lowest point along the command");
  }
}

}  // namespace

InteractionCommand make_inclined_command(const PegShape& peg, const InclinedState& current,
                                         const Vec2& target, double depth, double alpha,
                                         double beta) {
  if (!(depth > 0.0)) throw InvalidCommandError("probe depth must be > 0");
  if (!(alpha > 0.0 && alpha < M_PI / 2.0))
    throw InvalidCommandError("alpha must lie in (0, pi/2): a vertical peg has no unique supporting vertex");
  InteractionCommand cmd;
  cmd.start = current.pose;
  cmd.desired = inclined_pose(peg, current.supporting_vertex, target, -depth, alpha, beta);
  cmd.supporting_vertex = current.supporting_vertex;
  check_definition2_on_segment(peg, cmd.start, cmd.desired, current.supporting_vertex);
  return cmd;
}

InteractionCommand make_probe_command(const PegShape& peg, int supporting_vertex,
                                      const Vec2& target, double depth, double alpha,
                                      double beta, double hover_clearance) {
  if (!(depth > 0.0)) throw InvalidCommandError("probe depth must be > 0");
  if (!(alpha > 0.0 && alpha < M_PI / 2.0))
    throw InvalidCommandError("alpha must lie in (0, pi/2): a vertical peg has no unique supporting vertex");
  InteractionCommand cmd;
  cmd.desired = inclined_pose(peg, supporting_vertex, target, -depth, alpha, beta);
  cmd.start = inclined_pose(peg, supporting_vertex, target, hover_clearance, alpha, beta);
  cmd.supporting_vertex = supporting_vertex;
  check_definition2_on_segment(peg, cmd.start, cmd.desired, supporting_vertex);
  return cmd;
}

InteractionCommand perturb(const InteractionCommand& cmd, double sigma, RandomStream& rng) {
  if (sigma < 0.0) throw PreconditionError("sigma must be >= 0");
  InteractionCommand out = cmd;
  const double dx = rng.gaussian();
  const double dy = rng.gaussian();
  out.desired.position.x() += sigma * dx;
  out.desired.position.y() += sigma * dy;
  return out;
}

}  // namespace pih
