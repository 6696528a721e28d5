#include <iostream>

#include "doctest.h"
#include "pih/harness.hpp"
#include "pih/perception.hpp"

using namespace pih;

namespace {

Footprint point_footprint(const Vec2& p) {
  Footprint fp;
  fp.points.emplace_back(p.x(), p.y(), 0.0);
  return fp;
}

Footprint area_footprint(const std::vector<Vec2>& pts) {
  Footprint fp;
  for (const Vec2& p : pts) fp.points.emplace_back(p.x(), p.y(), 0.0);
  return fp;
}

HoleShape square_hole(double side = 0.02) { return make_hole(make_rectangle(side, side), 0.012); }

BoardRegion disc(const Vec2& center, double radius) {
  BoardRegion b;
  b.center = center;
  b.radius = radius;
  return b;
}

ProposalRegion two_cluster_region(int k) {
  // half the hypotheses centered at -x, half at +x
  ProposalRegion region;
  region.hole = square_hole();
  region.board = disc({0, 0}, 0.2);
  region.yaw_lo = 0.0;
  region.yaw_hi = 0.0;
  for (int i = 0; i < k; ++i) {
    const double x = (i < k / 2) ? -0.03 : 0.03;
    region.samples.push_back({x, 0.0, 0.0});
  }
  return region;
}

}  // namespace

TEST_CASE("evaluate_constraint: contact points exclude, areas contain") {
  const HoleShape hole = square_hole();
  const PlanarPose hyp{0.01, -0.005, 0.3};

  const auto contact_inside =
      ObservationConstraint::from_footprint(point_footprint(hyp.apply(hole.base.centroid)));
  CHECK(evaluate_constraint(hyp, contact_inside, hole) < 0.0);

  const auto contact_far =
      ObservationConstraint::from_footprint(point_footprint(hyp.apply(Vec2(0.08, 0.0))));
  CHECK(evaluate_constraint(hyp, contact_far, hole) > 0.0);

  // a small patch strictly inside the hypothesized opening
  std::vector<Vec2> patch;
  for (double dx : {-0.002, 0.002})
    for (double dy : {-0.002, 0.002}) patch.push_back(hyp.apply(Vec2(dx, dy)));
  const auto area_in = ObservationConstraint::from_footprint(area_footprint(patch));
  const double g_in = evaluate_constraint(hyp, area_in, hole);
  CHECK(g_in > 0.0);
  // brute force: g = -max over footprint points of the hole-frame distance
  double max_f = -1e9;
  for (const Vec3& p : area_in.footprint.points)
    max_f = std::max(max_f, signed_distance(hole.base, hyp.apply_inverse(Vec2(p.x(), p.y()))));
  CHECK(g_in == doctest::Approx(-max_f).epsilon(1e-12));

  // shift the patch so one point leaves the opening
  std::vector<Vec2> shifted;
  for (double dx : {-0.002, 0.012})
    for (double dy : {-0.002, 0.002}) shifted.push_back(hyp.apply(Vec2(dx, dy)));
  const auto area_out = ObservationConstraint::from_footprint(area_footprint(shifted));
  CHECK(evaluate_constraint(hyp, area_out, hole) < 0.0);
}

TEST_CASE("update_region: monotone bounds, vacuous constraints, truth retention") {
  RandomStream rng(31);
  const HoleShape hole = square_hole();
  const BoardRegion board = disc({0, 0}, 0.05);
  ProposalRegion region = ProposalRegion::initialize(hole, board, 150, 0.0, 0.0, rng);

  // vacuous constraint: a contact far outside every hypothesized opening
  const auto before = region.sample_box();
  update_region(region, ObservationConstraint::from_footprint(point_footprint({0.2, 0.2})), rng);
  const auto after = region.sample_box();
  CHECK(after.x_lo >= before.x_lo - 0.06 * (before.x_hi - before.x_lo));
  CHECK(after.x_hi <= before.x_hi + 0.06 * (before.x_hi - before.x_lo));
  CHECK(region.acceptance_rate > 0.5);

  // informative constraint shrinks or keeps the bounds (never grows beyond
  // the sampling box), and the true pose stays feasible
  const PlanarPose truth{0.004, -0.003, 0.0};
  const auto obs = ObservationConstraint::from_footprint(
      area_footprint({truth.apply(Vec2(-0.003, 0.0)), truth.apply(Vec2(0.003, 0.0)),
                      truth.apply(Vec2(0.0, 0.003))}));
  const auto prev = region.sample_box();
  update_region(region, obs, rng);
  const auto now = region.sample_box();
  const double grow = 0.06;  // 10% inflation of the proposal box is the cap
  CHECK(now.x_lo >= prev.x_lo - grow * (prev.x_hi - prev.x_lo) - 1e-12);
  CHECK(now.x_hi <= prev.x_hi + grow * (prev.x_hi - prev.x_lo) + 1e-12);
  for (const auto& c : region.constraints)
    CHECK(evaluate_constraint(truth, c, hole) >= -kConstraintTol);
  for (const auto& s : region.samples) CHECK(region.hypothesis_feasible(s));
}

TEST_CASE("degenerate region detection") {
  RandomStream rng(32);
  const HoleShape hole = square_hole();
  ProposalRegion region = ProposalRegion::initialize(hole, disc({0, 0}, 0.04), 60, 0.0, 0.0, rng);
  // contradictory observations: a point interior to a contained area is
  // reported as excluded
  update_region(region,
                ObservationConstraint::from_footprint(
                    area_footprint({{0.0, 0.0}, {0.003, 0.0}, {0.0, 0.003}})),
                rng);
  CHECK_THROWS_AS(
      update_region(region,
                    ObservationConstraint::from_footprint(point_footprint({0.001, 0.001})),
                    rng),
      DegenerateRegionError);
}

TEST_CASE("p_in counts containing hypotheses") {
  const HoleShape hole = square_hole();
  ProposalRegion region = two_cluster_region(200);
  CHECK(p_in(Vec2(-0.03, 0.0), region.samples, hole) == doctest::Approx(0.5).epsilon(1e-2));
  CHECK(p_in(Vec2(0.0, 0.05), region.samples, hole) == 0.0);
  ProposalRegion tight = two_cluster_region(200);
  for (auto& s : tight.samples) s = {0.0, 0.0, 0.0};
  CHECK(p_in(Vec2(0.0, 0.0), tight.samples, hole) == 1.0);
}

TEST_CASE("expected entropy reduction: certainty gives zero, split is maximal") {
  ProposalRegion region = two_cluster_region(200);
  // certain outcomes: a point outside all the openings, or inside all
  CHECK(expected_entropy_reduction(Vec2(0.0, 0.08), region) == 0.0);
  // the half-split point separates the clusters: maximal over a scan line
  const double dh_split = expected_entropy_reduction(Vec2(-0.03, 0.0), region);
  CHECK(dh_split > 0.0);
  for (double x = -0.06; x <= 0.06; x += 0.004) {
    const double dh = expected_entropy_reduction(Vec2(x, 0.0), region);
    CHECK(dh <= dh_split + 1e-12);
  }
  // duplicates evaluate identically
  CHECK(expected_entropy_reduction(Vec2(-0.03, 0.0), region) ==
        expected_entropy_reduction(Vec2(-0.03, 0.0), region));
}

TEST_CASE("select_probe: argmax, tie-break, permutation invariance") {
  ProposalRegion region = two_cluster_region(200);
  ProbeGrid single;
  single.points = {Vec2(0.01, 0.02)};
  CHECK((select_probe(region, single) - Vec2(0.01, 0.02)).norm() == 0.0);

  ProbeGrid grid;
  for (double x = -0.06; x <= 0.0601; x += 0.006)
    for (double y = -0.02; y <= 0.0201; y += 0.01) grid.points.emplace_back(x, y);
  const Vec2 pick = select_probe(region, grid);
  // exhaustive scan oracle
  double best = -1.0;
  for (const Vec2& g : grid.points)
    best = std::max(best, expected_entropy_reduction(g, region));
  CHECK(expected_entropy_reduction(pick, region) == doctest::Approx(best));

  ProbeGrid reversed;
  reversed.points.assign(grid.points.rbegin(), grid.points.rend());
  const Vec2 pick2 = select_probe(region, reversed);
  CHECK((pick - pick2).norm() == 0.0);
}

TEST_CASE("jaccard: exact fit, half union, shrinking with updates") {
  const HoleShape hole = square_hole();
  BoardEnvironment env;
  env.hole = hole;
  env.hole_pose = {0.0, 0.0, 0.0};
  env.board = disc({0, 0}, 0.1);
  env.validate();

  ProposalRegion exact;
  exact.hole = hole;
  exact.board = env.board;
  for (int i = 0; i < 50; ++i) exact.samples.push_back({0.0, 0.0, 0.0});
  RandomStream rng(41);
  const JaccardEstimate j1 = jaccard(exact, env, rng);
  CHECK(j1.value == doctest::Approx(1.0).epsilon(1e-6));

  // half the samples at truth, half at a disjoint offset: the union doubles
  ProposalRegion half = exact;
  for (int i = 25; i < 50; ++i) half.samples[i] = {0.05, 0.0, 0.0};
  const JaccardEstimate j2 = jaccard(half, env, rng);
  CHECK(j2.value == doctest::Approx(0.5).epsilon(0.03));
  CHECK(j2.std_error > 0.0);
  CHECK(j2.std_error < 0.01);
}

TEST_CASE("interactive perception converges on the round-16 peg") {
  const CatalogEntry& entry = catalog_entry("Round 16");
  const PrismPair pair = build_catalog_pair(entry);
  int reached = 0;
  const int seeds = 3;
  for (int seed = 0; seed < seeds; ++seed) {
    RandomStream scenario(900 + seed);
    PlanarPose hole_pose{scenario.uniform(-0.004, 0.004), scenario.uniform(-0.004, 0.004),
                         wrap_angle(scenario.uniform(-M_PI, M_PI))};
    const BoardRegion board =
        dilated_bounding_circle(pair.hole, hole_pose, 2.0, scenario);
    const BoardEnvironment env = make_environment(pair, hole_pose, board);

    PerceptionConfig pc;
    pc.sigma = 0.0;
    pc.policy = ProbePolicy::Entropy;
    pc.yaw_hi = entry.symmetry_period();
    pc.early_stop = false;
    RandomStream rng(1700 + seed);
    const PerceptionResult result = run_interactive_perception(env, pair.peg, pc, rng);
    REQUIRE(!result.steps.empty());

    // Lemma: the ground truth satisfies every accumulated constraint
    for (const auto& c : result.region.constraints)
      CHECK(evaluate_constraint(hole_pose, c, pair.hole) >= -kConstraintTol);

    if (result.steps.back().jaccard >= 0.8) ++reached;
  }
  CHECK(reached == seeds);
}

TEST_CASE("funnel monotonicity on a fixed reference set") {
  const CatalogEntry& entry = catalog_entry("Rectangle 12");
  const PrismPair pair = build_catalog_pair(entry);
  RandomStream scenario(77);
  PlanarPose hole_pose{0.002, -0.003, 0.4};
  const BoardRegion board = dilated_bounding_circle(pair.hole, hole_pose, 2.0, scenario);
  const BoardEnvironment env = make_environment(pair, hole_pose, board);

  // reference set drawn once from the initial region
  RandomStream ref_rng(78);
  const ProposalRegion x0 =
      ProposalRegion::initialize(pair.hole, board, 2000, 0.0, entry.symmetry_period(), ref_rng);

  PerceptionConfig pc;
  pc.sigma = 0.002;
  pc.policy = ProbePolicy::Entropy;
  pc.yaw_hi = entry.symmetry_period();
  pc.early_stop = false;
  pc.compute_jaccard = false;
  RandomStream rng(79);
  const PerceptionResult result = run_interactive_perception(env, pair.peg, pc, rng);

  // replay the constraints in order; the satisfying count never increases
  std::vector<char> alive(x0.samples.size(), 1);
  int prev = static_cast<int>(x0.samples.size());
  for (const auto& c : result.region.constraints) {
    int count = 0;
    for (size_t i = 0; i < x0.samples.size(); ++i) {
      if (alive[i] && evaluate_constraint(x0.samples[i], c, pair.hole) < -kConstraintTol)
        alive[i] = 0;
      if (alive[i]) ++count;
    }
    CHECK(count <= prev);
    prev = count;
  }
}
