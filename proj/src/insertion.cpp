#include "pih/insertion.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>

namespace pih {

namespace {

double alpha_of_rotation(const Vec3& euler) {
  // z-component of the rotated local z-axis
  const double nz = std::cos(euler[1]) * std::cos(euler[0]);
  return std::asin(std::clamp(nz, -1.0, 1.0));
}

Vec6 unwrap_toward(const Vec6& value, const Vec6& reference) {
  Vec6 out = value;
  for (int i = 3; i < 6; ++i) out[i] = reference[i] + wrap_angle(value[i] - reference[i]);
  return out;
}

}  // namespace

Vec6 predict(const LinearModel& model, const Vec6& x, const Vec6& x_desired) {
  return model.a * x + model.b * (x_desired - x);
}

RlsState RlsState::initial(double lambda, double p0) {
  RlsState s;
  s.gamma.topRows<6>() = Eigen::Matrix<double, 6, 6>::Identity();
  s.gamma.bottomRows<6>() = Eigen::Matrix<double, 6, 6>::Identity();
  s.p = p0 * Eigen::Matrix<double, 12, 12>::Identity();
  s.lambda = lambda;
  return s;
}

LinearModel RlsState::model() const {
  LinearModel m;
  m.a = gamma.topRows<6>().transpose();
  m.b = gamma.bottomRows<6>().transpose();
  return m;
}

void RlsState::check() const {
  const Eigen::Matrix<double, 12, 12> sym = 0.5 * (p + p.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> eig(sym,
                                                                   Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < 1e-12)
    throw NumericalConditioningError("RLS covariance lost positive definiteness");
}

void rls_update(RlsState& state, const Vec6& x, const Vec6& x_desired, const Vec6& x_next) {
  Eigen::Matrix<double, 12, 1> phi;
  phi.head<6>() = x;
  phi.tail<6>() = x_desired - x;
  const Eigen::Matrix<double, 1, 6> eps =
      x_next.transpose() - phi.transpose() * state.gamma;
  const double denom = state.lambda + (phi.transpose() * state.p * phi).value();
  const Eigen::Matrix<double, 12, 1> gain = state.p * phi / denom;
  state.gamma += gain * eps;
  state.p = (state.p - gain * phi.transpose() * state.p) / state.lambda;
  state.p = 0.5 * (state.p + state.p.transpose()).eval();
  state.check();
}

namespace {

struct Candidate {
  double d_alpha;
  double nudge;
  double depth;
};

struct CandidateEval {
  bool feasible = false;
  double cost = std::numeric_limits<double>::max();
  Pose6 first_desired;
  Vec6 u{Vec6::Zero()};
};

class Planner {
 public:
  Planner(const LinearModel& model, const InclinedState& state,
          const IntersectedRegions& regions, const MpcConfig& cfg, const PegShape& peg)
      : model_(model), state_(state), regions_(regions), cfg_(cfg), peg_(peg) {
    x0_ = state.pose.vec();
    alpha_cap_ = cfg.alpha_target - 0.1 * M_PI / 180.0;
    nudge_dir_ = regions.well_anchor - regions.corner_estimate;
    if (nudge_dir_.norm() < 1e-12) nudge_dir_ = Vec2(1, 0);
    nudge_dir_.normalize();
    const Mat3 r = state.pose.rotation_matrix();
    vertex_z_ = (r * peg.base_vertex(state.supporting_vertex) + state.pose.position).z();
  }

  CandidateEval evaluate(const Candidate& c) const {
    CandidateEval ev;
    const double alpha_d = std::min(state_.alpha + c.d_alpha, alpha_cap_);
    const Vec2 v_target = regions_.corner_estimate + c.nudge * nudge_dir_;
    if (!regions_.well_contains(v_target)) return ev;
    const double depth_d = std::min(vertex_z_, 0.0) - c.depth;
    // place the desired pose so its lateral-edge crossing sits at v_target
    const double cot = std::cos(alpha_d) / std::sin(alpha_d);
    const Vec2 b_hat(std::cos(state_.beta), std::sin(state_.beta));
    const Vec2 vertex_xy = v_target + depth_d * cot * b_hat;
    Pose6 desired;
    try {
      desired = inclined_pose(peg_, state_.supporting_vertex, vertex_xy, depth_d, alpha_d,
                              state_.beta);
    } catch (const InvalidCommandError&) {
      return ev;
    }
    const Vec6 u = pose_delta(desired, state_.pose);
    for (int i = 0; i < 3; ++i) {
      if (std::abs(u[i]) > cfg_.dev_max_trans) return ev;
      if (std::abs(u[3 + i]) > cfg_.dev_max_rot) return ev;
    }
    if (cfg_.dev_min_trans > 0.0 || cfg_.dev_min_rot > 0.0) {
      const bool any_min = u.head<3>().cwiseAbs().maxCoeff() >= cfg_.dev_min_trans &&
                           u.tail<3>().cwiseAbs().maxCoeff() >= cfg_.dev_min_rot;
      if (!any_min) return ev;
    }
    // constant-deviation rollout on the linear surrogate
    double cost = 0.0;
    Vec6 x = x0_;
    for (int i = 0; i < cfg_.horizon; ++i) {
      x = predict(model_, x, x + u);
      const double a = alpha_of_rotation(x.tail<3>());
      cost += std::max(std::abs(a - cfg_.alpha_target) - cfg_.alpha_tol, 0.0);
      cost += cfg_.smooth_weight * u.norm();
    }
    ev.feasible = true;
    ev.cost = cost;
    ev.first_desired = desired.normalized();
    ev.u = u;
    return ev;
  }

  std::vector<Pose6> run() const {
    const double max_gain = std::min(cfg_.dev_max_rot, std::max(alpha_cap_ - state_.alpha, 0.0));
    const double max_nudge = std::min(0.5 * cfg_.dev_max_trans, 0.002);
    std::vector<double> alphas, nudges, depths;
    for (int i = 0; i < 5; ++i) alphas.push_back(max_gain * i / 4.0);
    for (int i = 1; i <= 5; ++i) nudges.push_back(max_nudge * i / 5.0);
    depths = {0.0005, 0.001, 0.0015};

    Candidate best{};
    CandidateEval best_ev;
    for (double a : alphas)
      for (double n : nudges)
        for (double d : depths) {
          const Candidate c{a, n, d};
          const CandidateEval ev = evaluate(c);
          if (ev.feasible && ev.cost < best_ev.cost) {
            best_ev = ev;
            best = c;
          }
        }
    if (!best_ev.feasible)
      throw InfeasiblePlanError("no candidate satisfies the well and deviation constraints");

    // coordinate descent refinement around the best grid point
    double steps[3] = {std::max(max_gain / 8.0, 1e-4), max_nudge / 10.0, 0.00025};
    for (int round = 0; round < 2; ++round) {
      for (int axis = 0; axis < 3; ++axis) {
        for (double dir : {-1.0, 1.0}) {
          Candidate c = best;
          double* field = axis == 0 ? &c.d_alpha : (axis == 1 ? &c.nudge : &c.depth);
          *field += dir * steps[axis];
          if (*field < 0.0) continue;
          const CandidateEval ev = evaluate(c);
          if (ev.feasible && ev.cost < best_ev.cost) {
            best_ev = ev;
            best = c;
          }
        }
        steps[axis] *= 0.5;
      }
    }

    // desired poses along the rollout, constant deviation
    std::vector<Pose6> sequence;
    sequence.reserve(cfg_.horizon);
    Vec6 x = x0_;
    for (int i = 0; i < cfg_.horizon; ++i) {
      sequence.push_back(Pose6::from_vec(x + best_ev.u).normalized());
      x = predict(model_, x, x + best_ev.u);
    }
    sequence.front() = best_ev.first_desired;
    return sequence;
  }

 private:
  const LinearModel& model_;
  const InclinedState& state_;
  const IntersectedRegions& regions_;
  const MpcConfig& cfg_;
  const PegShape& peg_;
  Vec6 x0_;
  double alpha_cap_;
  Vec2 nudge_dir_;
  double vertex_z_;
};

}  // namespace

std::vector<Pose6> plan(const LinearModel& model, const InclinedState& state,
                        const IntersectedRegions& regions, const MpcConfig& cfg,
                        const PegShape& peg) {
  Planner planner(model, state, regions, cfg, peg);
  return planner.run();
}

YawPlay measure_yaw_play(const BoardEnvironment& env, const PegShape& peg,
                         const InclinedState& state) {
  YawPlay play;
  const Mat3 r = state.pose.rotation_matrix();
  const Eigen::RowVectorXd z = (r.row(2) * peg.samples).array() + state.pose.position.z();
  if (z.minCoeff() > -1e-9) {
    play.unbounded = true;  // a rotation about the vertical axis preserves z
    return play;
  }
  const Vec3 pivot = r * peg.base_vertex(state.supporting_vertex) + state.pose.position;
  auto rotated = [&](double psi) {
    Pose6 p;
    Mat3 rz;
    const double c = std::cos(psi), s = std::sin(psi);
    rz << c, -s, 0, s, c, 0, 0, 0, 1;
    p.position = pivot + rz * (state.pose.position - pivot);
    p.rotation = Pose6::euler_from_matrix(rz * r);
    return p;
  };
  auto feasible = [&](double psi) { return max_penetration(env, peg, rotated(psi)) <= 1e-6; };
  auto extreme = [&](double dir) {
    const double cap = 0.5;
    if (feasible(dir * cap)) return cap;
    double lo = 0.0, hi = cap;
    for (int i = 0; i < 40; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (feasible(dir * mid))
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  };
  play.hi = extreme(+1.0);
  play.lo = extreme(-1.0);
  return play;
}

InsertionTrace insert(const BoardEnvironment& env, const PegShape& peg,
                      const SteadyState& aligned, const IntersectedRegions& regions,
                      const MpcConfig& cfg, const ComplianceParams& k,
                      const InsertionContext& ctx) {
  if (k.rotation_dominance() < 100.0)
    throw PreconditionError("insert: rotational stiffness dominance ratio must be >= 100");
  const CornerGeometry truth =
      transformed(corner(env.hole, regions.corner_index), env.hole_pose);
  {
    const InclinedState s0 = InclinedState::from_pose(aligned.pose, peg);
    const double dv0 = (project(peg, s0).v_lateral - truth.vj).norm();
    if (dv0 > 1e-3)
      throw PreconditionError("insert: alignment deviation exceeds 1 mm");
  }

  InsertionTrace trace;
  RlsState rls = RlsState::initial();
  Pose6 current = aligned.pose;
  Vec6 x_prev = current.vec();

  for (int step = 1; step <= cfg.max_steps; ++step) {
    const InclinedState state = InclinedState::from_pose(current, peg);
    if (std::abs(state.alpha - cfg.alpha_target) <= cfg.alpha_tol) {
      // full entry: the footprint polygon must sit inside the true opening
      const Footprint fp = observed_footprint(peg, current);
      bool contained = !fp.empty();
      for (const Vec3& p : fp.points) {
        if (env.hole_distance(Vec2(p.x(), p.y())) > 1e-7) {
          contained = false;
          break;
        }
      }
      trace.success = contained;
      if (!contained) trace.failure = "inclination reached but footprint not contained";
      break;
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Pose6> desired_seq;
    try {
      desired_seq = plan(rls.model(), state, regions, cfg, peg);
    } catch (const InfeasiblePlanError& e) {
      trace.failure = e.what();
      break;
    }
    const double plan_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    Pose6 desired = desired_seq.front();
    // receding-horizon safety: executed desired pose stays inside the well
    // and within the deviation bounds
    {
      const InclinedState d_state = InclinedState::from_pose(desired, peg);
      if (!regions.well_contains(project(peg, d_state).v_lateral))
        throw Error("insert: planned desired pose left the intersected well");
      const Vec6 u = pose_delta(desired, current);
      if (u.head<3>().cwiseAbs().maxCoeff() > cfg.dev_max_trans + 1e-9 ||
          u.tail<3>().cwiseAbs().maxCoeff() > cfg.dev_max_rot + 1e-9)
        throw Error("insert: planned desired pose violates the deviation bounds");
    }
    InteractionCommand cmd;
    cmd.start = current;
    cmd.desired = desired;
    cmd.supporting_vertex = state.supporting_vertex;
    if (ctx.sigma > 0.0 && ctx.rng) cmd = perturb(cmd, ctx.sigma, *ctx.rng);

    SteadyState next;
    try {
      next = settle(env, peg, cmd, k);
    } catch (const NonConvergenceError& e) {
      trace.failure = e.what();
      break;
    }

    const Vec6 x_now = unwrap_toward(current.vec(), x_prev);
    const Vec6 x_des = unwrap_toward(cmd.desired.vec(), x_now);
    const Vec6 x_next = unwrap_toward(next.pose.vec(), x_now);
    rls_update(rls, x_now, x_des, x_next);
    x_prev = x_now;
    current = next.pose;

    InsertionStep rec;
    rec.step = step;
    const InclinedState after = InclinedState::from_pose(current, peg);
    rec.alpha = after.alpha;
    rec.beta = after.beta;
    const ProjectedState proj = project(peg, after);
    rec.delta_v = (proj.v_lateral - truth.vj).norm();
    rec.delta_theta = std::abs(truth.angle - proj.theta_lateral);
    rec.wrench_norm = next.external_wrench.norm();
    rec.plan_ms = plan_ms;
    const YawPlay play = measure_yaw_play(env, peg, after);
    rec.yaw_play = play.unbounded ? std::numeric_limits<double>::infinity() : play.spread();
    rec.delta_s = rec.delta_v + (play.unbounded ? M_PI : 0.5 * play.spread());
    trace.steps.push_back(rec);
  }

  if (!trace.success && trace.failure.empty())
    trace.failure = "insertion step budget exhausted";
  trace.final_pose = current;
  return trace;
}

}  // namespace pih
