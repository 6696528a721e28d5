#include "pih/perception.hpp"

#include <algorithm>
#include <cmath>

namespace pih {

namespace {

constexpr double kExtentFloor = 1e-9;
constexpr long kMaxDraws = 10000000;
constexpr double kMinAcceptance = 1e-6;

// quick containment of a world point by a transformed opening
bool opening_contains(const HoleShape& hole, const PlanarPose& pose, const Vec2& world) {
  const Vec2 center = pose.apply(hole.base.centroid);
  if ((world - center).squaredNorm() >
      hole.base.circumradius * hole.base.circumradius * 1.0000001)
    return false;
  return hole.base.contains(pose.apply_inverse(world));
}

double circular_mean(const std::vector<PlanarPose>& samples, double period) {
  double s = 0.0, c = 0.0;
  for (const PlanarPose& p : samples) {
    s += std::sin(p.yaw * 2.0 * M_PI / period);
    c += std::cos(p.yaw * 2.0 * M_PI / period);
  }
  if (std::abs(s) < 1e-300 && std::abs(c) < 1e-300) return 0.0;
  return std::atan2(s, c) * period / (2.0 * M_PI);
}

double unwrap_to(double yaw, double reference, double period) {
  double d = std::fmod(yaw - reference, period);
  if (d > period / 2) d -= period;
  if (d < -period / 2) d += period;
  return reference + d;
}

struct SubsetBox {
  double x_lo = std::numeric_limits<double>::max(), x_hi = std::numeric_limits<double>::lowest();
  double y_lo = std::numeric_limits<double>::max(), y_hi = std::numeric_limits<double>::lowest();
  double w_lo = std::numeric_limits<double>::max(), w_hi = std::numeric_limits<double>::lowest();
  int count = 0;

  void add(const PlanarPose& p, double yaw_unwrapped) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
    w_lo = std::min(w_lo, yaw_unwrapped);
    w_hi = std::max(w_hi, yaw_unwrapped);
    ++count;
  }
  double entropy(double yaw_scale) const {
    const double dx = std::max(x_hi - x_lo, kExtentFloor);
    const double dy = std::max(y_hi - y_lo, kExtentFloor);
    const double dw = std::max((w_hi - w_lo) * yaw_scale, kExtentFloor);
    return std::log(dx * dy * dw);
  }
};

}  // namespace

double evaluate_constraint(const PlanarPose& hypothesis, const ObservationConstraint& obs,
                           const HoleShape& hole) {
  if (obs.kind == FootprintKind::ContactPoint) {
    const Vec3& p = obs.footprint.points.front();
    return signed_distance(hole.base, hypothesis.apply_inverse(Vec2(p.x(), p.y())));
  }
  double worst = std::numeric_limits<double>::lowest();
  for (const Vec3& p : obs.footprint.points) {
    worst = std::max(worst,
                     signed_distance(hole.base, hypothesis.apply_inverse(Vec2(p.x(), p.y()))));
  }
  return -worst;
}

bool ProposalRegion::hypothesis_feasible(const PlanarPose& pose) const {
  // board containment: the circumcircle test settles most cases cheaply
  const Vec2 center = pose.apply(hole.base.centroid);
  if (!board.poly && (center - board.center).norm() + hole.base.circumradius > board.radius) {
    bool all_in = true;
    for (const Vec2& v : hole.base.vertices) {
      if (!board.contains(pose.apply(v))) {
        all_in = false;
        break;
      }
    }
    if (!all_in) return false;
  } else if (board.poly) {
    for (const Vec2& v : hole.base.vertices)
      if (!board.contains(pose.apply(v))) return false;
  }
  const double r_circ = hole.base.circumradius;
  for (const ObservationConstraint& c : constraints) {
    if (c.kind == FootprintKind::IntersectionArea) {
      // necessary condition: every footprint point within the circumcircle
      bool out = false;
      for (const Vec3& p : c.footprint.points) {
        if ((Vec2(p.x(), p.y()) - center).norm() > r_circ + kConstraintTol) {
          out = true;
          break;
        }
      }
      if (out) return false;
    } else {
      // a contact far outside the circumcircle satisfies the exclusion
      const Vec3& p = c.footprint.points.front();
      if ((Vec2(p.x(), p.y()) - center).norm() > r_circ + kConstraintTol) continue;
    }
    if (evaluate_constraint(pose, c, hole) < -kConstraintTol) return false;
  }
  return true;
}

ProposalRegion::Box ProposalRegion::sample_box() const {
  Box box{};
  const double period = yaw_hi - yaw_lo > 0 ? yaw_hi - yaw_lo : 2.0 * M_PI;
  const double mean = circular_mean(samples, period);
  SubsetBox sb;
  for (const PlanarPose& p : samples) sb.add(p, unwrap_to(p.yaw, mean, period));
  box.x_lo = sb.x_lo;
  box.x_hi = sb.x_hi;
  box.y_lo = sb.y_lo;
  box.y_hi = sb.y_hi;
  box.yaw_lo = sb.w_lo;
  box.yaw_hi = sb.w_hi;
  return box;
}

double ProposalRegion::Box::volume(double yaw_scale) const {
  return std::max(x_hi - x_lo, kExtentFloor) * std::max(y_hi - y_lo, kExtentFloor) *
         std::max((yaw_hi - yaw_lo) * yaw_scale, kExtentFloor);
}

ProposalRegion ProposalRegion::initialize(const HoleShape& hole, const BoardRegion& board, int k,
                                          double yaw_lo, double yaw_hi, RandomStream& rng) {
  ProposalRegion region;
  region.hole = hole;
  region.board = board;
  region.yaw_lo = yaw_lo;
  region.yaw_hi = yaw_hi;
  const auto bbox = board.bounding_box();
  long draws = 0;
  while (static_cast<int>(region.samples.size()) < k && draws < kMaxDraws) {
    ++draws;
    PlanarPose cand;
    cand.x = rng.uniform(bbox.min().x(), bbox.max().x());
    cand.y = rng.uniform(bbox.min().y(), bbox.max().y());
    cand.yaw = yaw_hi > yaw_lo ? wrap_angle(rng.uniform(yaw_lo, yaw_hi)) : yaw_lo;
    if (region.hypothesis_feasible(cand)) region.samples.push_back(cand);
  }
  region.acceptance_rate = draws > 0 ? static_cast<double>(region.samples.size()) / draws : 1.0;
  if (static_cast<int>(region.samples.size()) < k)
    throw DegenerateRegionError("proposal region: cannot seed hypotheses inside the board area");
  return region;
}

void update_region(ProposalRegion& region, const ObservationConstraint& obs, RandomStream& rng) {
  region.constraints.push_back(obs);
  const double period = region.yaw_hi - region.yaw_lo > 0 ? region.yaw_hi - region.yaw_lo
                                                          : 2.0 * M_PI;
  const int k = static_cast<int>(region.samples.size());

  // the recursive region update: hypotheses that satisfy the new constraint
  // stay; the rest of the set is replenished by rejection
  std::vector<PlanarPose> fresh;
  fresh.reserve(k);
  for (const PlanarPose& s : region.samples) {
    if (evaluate_constraint(s, obs, region.hole) >= -kConstraintTol) fresh.push_back(s);
  }
  const long survivors = static_cast<long>(fresh.size());
  const ProposalRegion::Box box = region.sample_box();
  long draws = 0;

  // phase 1: proposal box around the survivors (or all previous samples),
  // 10% inflation, escalating when acceptance stalls
  for (double inflation : {1.1, 2.0, 4.0}) {
    if (static_cast<int>(fresh.size()) >= k) break;
    auto widen = [&](double lo, double hi, double floor_width) {
      const double mid = 0.5 * (lo + hi);
      const double half = std::max(0.5 * inflation * (hi - lo), 0.5 * floor_width);
      return std::pair<double, double>(mid - half, mid + half);
    };
    const auto [x_lo, x_hi] = widen(box.x_lo, box.x_hi, 1e-7);
    const auto [y_lo, y_hi] = widen(box.y_lo, box.y_hi, 1e-7);
    auto [w_lo, w_hi] = widen(box.yaw_lo, box.yaw_hi, 1e-7);
    w_lo = std::max(w_lo, box.yaw_lo - period / 2);
    w_hi = std::min(w_hi, box.yaw_hi + period / 2);
    const long budget = draws + kMaxDraws / 5;
    long accepted_here = 0;
    while (static_cast<int>(fresh.size()) < k && draws < budget) {
      ++draws;
      PlanarPose cand;
      cand.x = rng.uniform(x_lo, x_hi);
      cand.y = rng.uniform(y_lo, y_hi);
      cand.yaw = wrap_angle(rng.uniform(w_lo, w_hi));
      if (region.hypothesis_feasible(cand)) {
        fresh.push_back(cand);
        ++accepted_here;
      }
      if (accepted_here == 0 && draws % 100000 == 0) break;  // escalate early
    }
  }

  // phase 2: guided by the observation geometry; any consistent hypothesis
  // must keep its opening within the circumradius of every footprint point
  if (static_cast<int>(fresh.size()) < k) {
    Vec2 centroid = Vec2::Zero();
    for (const Vec3& p : obs.footprint.points) centroid += Vec2(p.x(), p.y());
    centroid /= static_cast<double>(obs.footprint.points.size());
    const double r = region.hole.base.circumradius + region.hole.base.circumradius;
    const long budget = draws + 2 * (kMaxDraws / 5);
    while (static_cast<int>(fresh.size()) < k && draws < budget) {
      ++draws;
      PlanarPose cand;
      cand.x = rng.uniform(centroid.x() - r, centroid.x() + r);
      cand.y = rng.uniform(centroid.y() - r, centroid.y() + r);
      cand.yaw = wrap_angle(rng.uniform(region.yaw_lo, region.yaw_lo + period));
      if (region.hypothesis_feasible(cand)) fresh.push_back(cand);
    }
  }

  const long accepted_new = static_cast<long>(fresh.size()) - survivors;
  region.acceptance_rate = draws > 0 ? static_cast<double>(accepted_new) / draws : 1.0;
  if (static_cast<int>(fresh.size()) < k) {
    if (fresh.empty() || region.acceptance_rate < kMinAcceptance)
      throw DegenerateRegionError("proposal region: acceptance rate collapsed");
    // top up by cycling the accepted hypotheses
    int i = 0;
    while (static_cast<int>(fresh.size()) < k) fresh.push_back(fresh[i++ % fresh.size()]);
  }
  region.samples = std::move(fresh);
}

double p_in(const Vec2& grid_point, const std::vector<PlanarPose>& samples,
            const HoleShape& hole) {
  if (samples.empty()) throw PreconditionError("p_in: empty hypothesis set");
  int inside = 0;
  for (const PlanarPose& s : samples)
    if (opening_contains(hole, s, grid_point)) ++inside;
  return static_cast<double>(inside) / samples.size();
}

double expected_entropy_reduction(const Vec2& grid_point, const ProposalRegion& region) {
  const double period =
      region.yaw_hi - region.yaw_lo > 0 ? region.yaw_hi - region.yaw_lo : 2.0 * M_PI;
  const double mean = circular_mean(region.samples, period);
  const double yaw_scale = region.hole.base.circumradius;
  SubsetBox all, in, out;
  for (const PlanarPose& s : region.samples) {
    const double w = unwrap_to(s.yaw, mean, period);
    all.add(s, w);
    if (opening_contains(region.hole, s, grid_point))
      in.add(s, w);
    else
      out.add(s, w);
  }
  if (all.count == 0) throw PreconditionError("expected_entropy_reduction: empty hypothesis set");
  const double p = static_cast<double>(in.count) / all.count;
  double posterior = 0.0;
  if (in.count > 0) posterior += p * in.entropy(yaw_scale);
  if (out.count > 0) posterior += (1.0 - p) * out.entropy(yaw_scale);
  if (in.count == 0 || out.count == 0) return 0.0;  // outcome certain, no information
  return all.entropy(yaw_scale) - posterior;
}

ProbeGrid ProbeGrid::over_board(const BoardRegion& board, double spacing) {
  ProbeGrid grid;
  grid.spacing = spacing;
  const auto bbox = board.bounding_box();
  const Vec2 mid = 0.5 * (bbox.min() + bbox.max());
  const int nx = static_cast<int>(std::floor((bbox.max().x() - mid.x()) / spacing));
  const int ny = static_cast<int>(std::floor((bbox.max().y() - mid.y()) / spacing));
  for (int iy = -ny; iy <= ny; ++iy) {
    for (int ix = -nx; ix <= nx; ++ix) {
      const Vec2 p(mid.x() + ix * spacing, mid.y() + iy * spacing);
      if (board.contains(p)) grid.points.push_back(p);
    }
  }
  if (grid.points.empty()) grid.points.push_back(mid);
  return grid;
}

Vec2 select_probe(const ProposalRegion& region, const ProbeGrid& grid) {
  if (grid.points.empty()) throw PreconditionError("select_probe: empty grid");
  Vec2 centroid = Vec2::Zero();
  for (const PlanarPose& s : region.samples) centroid += s.xy();
  centroid /= static_cast<double>(region.samples.size());

  Vec2 best = grid.points.front();
  double best_dh = -std::numeric_limits<double>::max();
  double best_dist = std::numeric_limits<double>::max();
  for (const Vec2& g : grid.points) {
    const double dh = expected_entropy_reduction(g, region);
    const double dist = (g - centroid).norm();
    bool take = false;
    if (dh > best_dh) {
      take = true;
    } else if (dh == best_dh) {
      if (dist < best_dist) {
        take = true;
      } else if (dist == best_dist) {
        take = (g.x() < best.x()) || (g.x() == best.x() && g.y() < best.y());
      }
    }
    if (take) {
      best = g;
      best_dh = dh;
      best_dist = dist;
    }
  }
  return best;
}

JaccardEstimate jaccard(const ProposalRegion& region, const BoardEnvironment& env,
                        RandomStream& rng, int min_points) {
  struct SampleXf {
    PlanarPose pose;
    Vec2 center;
  };
  std::vector<SampleXf> xf;
  xf.reserve(region.samples.size());
  const double r_hole = region.hole.base.circumradius;
  Eigen::AlignedBox2d bbox;
  const Vec2 true_center = env.hole_pose.apply(env.hole.base.centroid);
  bbox.extend(true_center - Vec2(r_hole, r_hole));
  bbox.extend(true_center + Vec2(r_hole, r_hole));
  for (const PlanarPose& s : region.samples) {
    const Vec2 c = s.apply(region.hole.base.centroid);
    bbox.extend(c - Vec2(r_hole, r_hole));
    bbox.extend(c + Vec2(r_hole, r_hole));
    xf.push_back({s, c});
  }
  long in_both = 0, in_either = 0;
  const double r2 = r_hole * r_hole * 1.0000001;
  for (int i = 0; i < min_points; ++i) {
    const Vec2 p(rng.uniform(bbox.min().x(), bbox.max().x()),
                 rng.uniform(bbox.min().y(), bbox.max().y()));
    const bool in_true = opening_contains(env.hole, env.hole_pose, p);
    bool in_union = false;
    for (const SampleXf& s : xf) {
      if ((p - s.center).squaredNorm() > r2) continue;
      if (region.hole.base.contains(s.pose.apply_inverse(p))) {
        in_union = true;
        break;
      }
    }
    if (in_true && in_union) ++in_both;
    if (in_true || in_union) ++in_either;
  }
  JaccardEstimate est;
  est.points = min_points;
  if (in_either == 0) {
    est.value = 0.0;
    est.std_error = 0.0;
    return est;
  }
  est.value = static_cast<double>(in_both) / in_either;
  est.std_error = std::sqrt(std::max(est.value * (1.0 - est.value), 1e-12) / in_either);
  return est;
}

PerceptionResult run_interactive_perception(const BoardEnvironment& env, const PegShape& peg,
                                            const PerceptionConfig& config, RandomStream& rng,
                                            const ProposalRegion* seed_region) {
  PerceptionResult result;
  RandomStream region_rng = rng.child(0x7e67);
  RandomStream probe_rng = rng.child(0x9a0b);
  RandomStream noise_rng = rng.child(0x11c4);
  RandomStream mc_rng = rng.child(0x5eed);
  if (seed_region)
    result.region = *seed_region;
  else
    result.region = ProposalRegion::initialize(env.hole, env.board, config.hypothesis_count,
                                               config.yaw_lo, config.yaw_hi, region_rng);
  double spacing = config.grid_spacing;
  if (spacing <= 0.0) spacing = std::max(peg.base.circumradius / 4.0, 0.002);
  const ProbeGrid grid = ProbeGrid::over_board(env.board, spacing);

  const double yaw_scale = env.hole.base.circumradius;
  double prev_volume = result.region.sample_box().volume(yaw_scale);
  int low_drop_streak = 0;
  ProbeGrid remaining = grid;  // entropy policy: commanded points are spent

  for (int step = 1; step <= config.max_steps; ++step) {
    Vec2 probe;
    if (config.policy == ProbePolicy::Entropy) {
      probe = select_probe(result.region, remaining.points.empty() ? grid : remaining);
      std::erase_if(remaining.points, [&](const Vec2& g) { return (g - probe).norm() == 0.0; });
    } else {
      probe = grid.points[probe_rng.uniform_int(0, static_cast<int>(grid.points.size()) - 1)];
    }
    const double dh = expected_entropy_reduction(probe, result.region);

    InteractionCommand cmd =
        make_probe_command(peg, config.probe_vertex, probe, config.probe_depth,
                           config.probe_alpha, config.probe_beta, config.hover_clearance);
    cmd = perturb(cmd, config.sigma, noise_rng);
    const SteadyState steady = settle(env, peg, cmd, config.compliance);
    if (steady.footprint.empty())
      throw PreconditionError("probe produced no footprint");  // unreachable for valid probes
    const ObservationConstraint obs = ObservationConstraint::from_footprint(steady.footprint);
    update_region(result.region, obs, region_rng);

    PerceptionStepMetrics m;
    m.step = step;
    m.policy = config.policy;
    m.sigma = config.sigma;
    m.delta_h = dh;
    m.acceptance_rate = result.region.acceptance_rate;
    m.probe = probe;
    m.outcome = obs.kind;
    if (config.compute_jaccard) {
      const JaccardEstimate est = jaccard(result.region, env, mc_rng, config.jaccard_points);
      m.jaccard = est.value;
      m.jaccard_std_error = est.std_error;
    }
    result.steps.push_back(m);

    const double volume = result.region.sample_box().volume(yaw_scale);
    if (config.early_stop) {
      if (volume > prev_volume * (1.0 - config.min_volume_drop))
        ++low_drop_streak;
      else
        low_drop_streak = 0;
      if (low_drop_streak >= 2) break;
    }
    prev_volume = volume;
  }
  return result;
}

}  // namespace pih
