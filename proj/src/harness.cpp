#include "pih/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json.hpp"

namespace pih {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(const Clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  return x ^ (x >> 27);
}

constexpr double kPlaceAlpha = 20.0 * M_PI / 180.0;  // initial inclination
constexpr double kPlaceDepth = 0.002;
constexpr int kPlaceRetries = 8;

struct Placement {
  InclinedState state;
  IntersectedRegions regions;  // built for the corner actually landed on
  int attempts = 0;
  bool ok = false;
};

// corner interior bisector direction, averaged over the hypothesis set
Vec2 mean_corner_bisector(const HoleShape& hole, int corner_index,
                          const std::vector<PlanarPose>& samples) {
  const CornerGeometry local = corner(hole, corner_index);
  Vec2 bis = Vec2::Zero();
  for (const PlanarPose& s : samples) {
    const CornerGeometry c = transformed(local, s);
    bis += ((c.vi - c.vj).normalized() + (c.vk - c.vj).normalized());
  }
  return bis.normalized();
}

// Drop the peg vertex-first near the basin witness of the chosen corner
// until it pierces the plane and its projection lies in the intersected
// basin of a symmetry-equivalent corner (the edge lands on whichever
// equivalent vertex the contact selects).
Placement place_into_basin(const BoardEnvironment& env, const PegShape& peg,
                           const HoleShape& hole, const std::vector<PlanarPose>& samples,
                           int base_corner, int corner_stride, double sigma,
                           RandomStream& rng) {
  Placement out;
  IntersectedRegions base;
  try {
    base = intersect_over_samples(hole, base_corner, samples, rng);
  } catch (const EmptyWellError&) {
    return out;
  }
  const Vec2 bisector = mean_corner_bisector(hole, base_corner, samples);
  const double beta = std::atan2(-bisector.y(), -bisector.x());
  for (int attempt = 0; attempt < kPlaceRetries; ++attempt) {
    ++out.attempts;
    InteractionCommand cmd =
        make_probe_command(peg, base_corner, base.basin_witness, kPlaceDepth, kPlaceAlpha, beta);
    cmd = perturb(cmd, sigma, rng);
    SteadyState steady;
    try {
      steady = settle(env, peg, cmd, ComplianceParams::probe());
    } catch (const Error&) {
      continue;
    }
    if (steady.footprint.empty() || steady.footprint.kind() != FootprintKind::IntersectionArea)
      continue;  // vertex did not enter the opening
    const InclinedState state = InclinedState::from_pose(steady.pose, peg);
    if (state.supporting_vertex != base_corner) continue;
    ProjectedState proj;
    try {
      proj = project(peg, state);
    } catch (const ProjectionUndefinedError&) {
      continue;
    }
    auto regions = regions_containing(hole, base_corner, corner_stride, samples,
                                      proj.v_lateral, rng);
    if (!regions) continue;
    out.state = state;
    out.regions = std::move(*regions);
    out.ok = true;
    return out;
  }
  return out;
}

}  // namespace

double CatalogEntry::symmetry_period() const {
  switch (symmetry) {
    case SymmetryClass::Central:
      return 2.0 * M_PI / 64.0;
    case SymmetryClass::Axial:
      return M_PI;
    default:
      return 2.0 * M_PI;
  }
}

const std::vector<CatalogEntry>& peg_catalog() {
  static const std::vector<CatalogEntry> catalog = {
      {"Round 8", PegKind::Round, 8, 8, 0.8, SymmetryClass::Central, 0},
      {"Round 12", PegKind::Round, 12, 12, 0.8, SymmetryClass::Central, 0},
      {"Round 16", PegKind::Round, 16, 16, 0.8, SymmetryClass::Central, 0},
      {"Rectangle 8", PegKind::Rectangle, 8, 7, 0.6, SymmetryClass::Axial, 0},
      {"Rectangle 12", PegKind::Rectangle, 12, 8, 0.7, SymmetryClass::Axial, 0},
      {"Rectangle 16", PegKind::Rectangle, 16, 10, 0.8, SymmetryClass::Axial, 0},
      {"Random #1", PegKind::Random, 20, 16, 0.4, SymmetryClass::Asymmetric, 101},
      {"Random #2", PegKind::Random, 22, 25, 0.4, SymmetryClass::Asymmetric, 202},
      {"Random #3", PegKind::Random, 23, 17, 0.4, SymmetryClass::Asymmetric, 303},
  };
  return catalog;
}

const CatalogEntry& catalog_entry(const std::string& name) {
  for (const CatalogEntry& e : peg_catalog())
    if (e.name == name) return e;
  throw PreconditionError("unknown catalog peg: " + name);
}

PrismPair build_catalog_pair(const CatalogEntry& entry, double sample_density) {
  const double clearance = entry.clearance_mm * 1e-3;
  const double height = 0.025, depth = 0.012;
  switch (entry.kind) {
    case PegKind::Round: {
      PrismPair pair;
      pair.clearance = clearance;
      Polygon2 base = make_regular_polygon(64, entry.scale_a_mm * 1e-3 / 2.0);
      pair.peg = make_peg(base, height, sample_density);
      pair.hole = make_hole(offset_convex(base, clearance / 2.0), depth);
      return pair;
    }
    case PegKind::Rectangle: {
      PrismPair pair;
      pair.clearance = clearance;
      Polygon2 base = make_rectangle(entry.scale_a_mm * 1e-3, entry.scale_b_mm * 1e-3);
      pair.peg = make_peg(base, height, sample_density);
      pair.hole = make_hole(offset_convex(base, clearance / 2.0), depth);
      return pair;
    }
    default:
      return random_prism(entry.generator_seed,
                          Vec2(entry.scale_a_mm * 1e-3, entry.scale_b_mm * 1e-3), {5, 9},
                          clearance, height, depth, sample_density);
  }
}

void save_prism_pair(const std::string& path, const PrismPair& pair, const std::string& name) {
  json j;
  j["name"] = name;
  j["clearance_mm"] = pair.clearance * 1e3;
  auto poly_mm = [](const Polygon2& p) {
    json arr = json::array();
    for (const Vec2& v : p.vertices) arr.push_back({v.x() * 1e3, v.y() * 1e3});
    return arr;
  };
  j["peg"]["base_mm"] = poly_mm(pair.peg.base);
  j["peg"]["height_mm"] = pair.peg.height * 1e3;
  j["peg"]["sample_density_per_m"] = pair.peg.sample_density;
  j["hole"]["base_mm"] = poly_mm(pair.hole.base);
  j["hole"]["depth_mm"] = pair.hole.depth * 1e3;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

PrismPair load_prism_pair(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  json j;
  in >> j;
  auto poly_m = [](const json& arr) {
    std::vector<Vec2> v;
    for (const auto& p : arr) v.emplace_back(p[0].get<double>() * 1e-3, p[1].get<double>() * 1e-3);
    return make_polygon(std::move(v));
  };
  PrismPair pair;
  pair.clearance = j["clearance_mm"].get<double>() * 1e-3;
  pair.peg = make_peg(poly_m(j["peg"]["base_mm"]), j["peg"]["height_mm"].get<double>() * 1e-3,
                      j["peg"]["sample_density_per_m"].get<double>());
  pair.hole = make_hole(poly_m(j["hole"]["base_mm"]), j["hole"]["depth_mm"].get<double>() * 1e-3);
  return pair;
}

BoardRegion dilated_bounding_circle(const HoleShape& hole, const PlanarPose& hole_pose,
                                    double dilation, RandomStream& rng) {
  BoardRegion board;
  const double r_hole = hole.base.circumradius;
  board.radius = (1.0 + dilation) * r_hole;
  const double jitter = 0.9 * dilation * r_hole;
  const double a = rng.uniform(0.0, 2.0 * M_PI);
  const double r = jitter * std::sqrt(rng.uniform());
  board.center = hole_pose.apply(hole.base.centroid) + r * Vec2(std::cos(a), std::sin(a));
  return board;
}

BoardEnvironment make_environment(const PrismPair& pair, const PlanarPose& hole_pose,
                                  const BoardRegion& board) {
  BoardEnvironment env;
  env.hole = pair.hole;
  env.hole_pose = hole_pose.normalized();
  env.board = board;
  env.validate();
  return env;
}

std::string TrialResult::csv_header() {
  return "scenario_id,perception_steps,interactions,final_jaccard,alignment_delta_v,"
         "insertion_steps,success,failure_phase,perception_ms,alignment_ms,insertion_ms";
}

std::string TrialResult::csv_row() const {
  std::ostringstream out;
  out << scenario_id << ',' << perception_steps << ',' << interactions << ','
      << fmt(final_jaccard) << ',' << fmt(alignment_delta_v) << ',' << insertion_steps << ','
      << (success ? 1 : 0) << ',' << failure_phase << ',' << fmt(perception_ms) << ','
      << fmt(alignment_ms) << ',' << fmt(insertion_ms);
  return out.str();
}

TrialResult run_pipeline(const ScenarioConfig& config) {
  const CatalogEntry& entry = catalog_entry(config.peg_name);
  const PrismPair pair = build_catalog_pair(entry);
  const double sigma = config.noise_sigma_mm * 1e-3;

  TrialResult result;
  {
    std::ostringstream id;
    id << config.peg_name << '|' << (config.prior == PriorKind::PartiallyInside ? "partial" : "bounded")
       << '|' << config.noise_sigma_mm << "mm|"
       << (config.policy == ProbePolicy::Entropy ? "entropy" : "random") << '|' << config.seed;
    result.scenario_id = id.str();
  }

  RandomStream master(config.seed);
  RandomStream env_rng = master.child(1);
  RandomStream percept_rng = master.child(2);
  RandomStream place_rng = master.child(3);
  RandomStream align_rng = master.child(4);
  RandomStream insert_rng = master.child(5);
  RandomStream mc_rng = master.child(6);

  PlanarPose hole_pose;
  if (config.hole_pose) {
    hole_pose = config.hole_pose->normalized();
  } else {
    hole_pose.x = env_rng.uniform(-0.01, 0.01);
    hole_pose.y = env_rng.uniform(-0.01, 0.01);
    hole_pose.yaw = wrap_angle(env_rng.uniform(-M_PI, M_PI));
  }
  const BoardRegion board =
      dilated_bounding_circle(pair.hole, hole_pose, config.board_dilation, env_rng);
  const BoardEnvironment env = make_environment(pair, hole_pose, board);

  PerceptionConfig pc;
  pc.hypothesis_count = config.hypothesis_count;
  pc.sigma = sigma;
  pc.policy = config.policy;
  pc.max_steps = config.max_perception_steps;
  pc.yaw_lo = 0.0;
  pc.yaw_hi = entry.symmetry_period();
  pc.compute_jaccard = false;

  // ---- perception ----
  const auto t_perception = Clock::now();
  ProposalRegion region;
  try {
    if (config.prior == PriorKind::PartiallyInside) {
      region = ProposalRegion::initialize(env.hole, env.board, pc.hypothesis_count, pc.yaw_lo,
                                          pc.yaw_hi, percept_rng);
      // seed observation: peg placed partially inside the true opening
      bool seeded = false;
      for (int attempt = 0; attempt < kPlaceRetries && !seeded; ++attempt) {
        ++result.interactions;
        Vec2 local(0, 0);
        for (int t = 0; t < 256; ++t) {
          local = Vec2(place_rng.uniform(-1.0, 1.0), place_rng.uniform(-1.0, 1.0)) *
                  pair.hole.base.circumradius;
          if (signed_distance(pair.hole.base, local) <
              -std::min(0.3 * pair.hole.base.circumradius, 0.003))
            break;
        }
        const Vec2 target = hole_pose.apply(local);
        const Vec2 center = hole_pose.apply(pair.hole.base.centroid);
        const Vec2 outward = target - center;
        const double beta =
            outward.norm() > 1e-9 ? std::atan2(outward.y(), outward.x()) : 0.0;
        InteractionCommand cmd =
            make_probe_command(pair.peg, 0, target, kPlaceDepth, kPlaceAlpha, beta);
        cmd = perturb(cmd, sigma, place_rng);
        const SteadyState steady = settle(env, pair.peg, cmd, ComplianceParams::probe());
        if (!steady.footprint.empty() &&
            steady.footprint.kind() == FootprintKind::IntersectionArea) {
          update_region(region, ObservationConstraint::from_footprint(steady.footprint),
                        percept_rng);
          seeded = true;
        }
      }
      if (!seeded) {
        result.failure_phase = "perception";
        return result;
      }
    }
    const ProposalRegion* seed =
        config.prior == PriorKind::PartiallyInside ? &region : nullptr;
    PerceptionResult pr = run_interactive_perception(env, pair.peg, pc, percept_rng, seed);
    region = std::move(pr.region);
    result.perception_steps = static_cast<int>(pr.steps.size());
    result.interactions += result.perception_steps;
    result.final_jaccard = jaccard(region, env, mc_rng).value;
  } catch (const Error& e) {
    result.failure_phase = "perception";
    result.perception_ms = ms_since(t_perception);
    return result;
  }
  result.perception_ms = ms_since(t_perception);

  // ---- corner alignment ----
  const auto t_align = Clock::now();
  const int stride = symmetry_corner_stride(pair.hole.base.size(), entry.symmetry_period());
  Placement placement;
  AlignOutcome aligned;
  try {
    for (int round = 0; round < 3 && !placement.ok; ++round) {
      bool need_more_perception = false;
      try {
        const int corner_index = choose_corner(pair.hole, region.samples);
        placement = place_into_basin(env, pair.peg, pair.hole, region.samples, corner_index,
                                     stride, sigma, place_rng);
        result.interactions += placement.attempts;
        need_more_perception = !placement.ok;
      } catch (const EmptyWellError&) {
        need_more_perception = true;
      }
      if (need_more_perception && round + 1 < 3) {
        // hypotheses still too spread: spend two more probes and retry
        PerceptionConfig extra = pc;
        extra.max_steps = 2;
        extra.early_stop = false;
        PerceptionResult pr =
            run_interactive_perception(env, pair.peg, extra, percept_rng, &region);
        region = std::move(pr.region);
        result.perception_steps += static_cast<int>(pr.steps.size());
        result.interactions += static_cast<int>(pr.steps.size());
      }
    }
    if (!placement.ok) {
      result.failure_phase = "alignment";
      result.alignment_ms = ms_since(t_align);
      return result;
    }
    aligned = align(env, pair.peg, placement.regions, placement.state,
                    ComplianceParams::translation_dominant(), sigma, &align_rng);
    result.interactions += 1;
    result.alignment_delta_v = aligned.deviation.delta_v;
  } catch (const Error&) {
    result.failure_phase = "alignment";
    result.alignment_ms = ms_since(t_align);
    return result;
  }
  result.alignment_ms = ms_since(t_align);

  // ---- insertion ----
  const auto t_insert = Clock::now();
  try {
    InsertionContext ctx;
    ctx.symmetry_period = entry.symmetry_period();
    ctx.sigma = sigma;
    ctx.rng = &insert_rng;
    const InsertionTrace trace = insert(env, pair.peg, aligned.steady, placement.regions,
                                        MpcConfig{}, ComplianceParams::rotation_dominant(), ctx);
    result.insertion_steps = static_cast<int>(trace.steps.size());
    result.success = trace.success;
    if (!trace.success) result.failure_phase = "insertion";
  } catch (const Error&) {
    result.failure_phase = "insertion";
  }
  result.insertion_ms = ms_since(t_insert);
  return result;
}

InsertionTrialResult run_insertion_trial(const PrismPair& pair, const PlanarPose& hole_pose,
                                         double sigma, uint64_t seed, bool baseline,
                                         double symmetry_period) {
  InsertionTrialResult result;
  RandomStream rng(seed);
  BoardRegion board;
  board.center = hole_pose.apply(pair.hole.base.centroid);
  board.radius = 4.0 * pair.hole.base.circumradius + 0.02;
  const BoardEnvironment env = make_environment(pair, hole_pose, board);

  if (baseline) {
    // position-controlled rigid descent at the known pose; execution noise
    // shifts the commanded XY and the first contact aborts the motion
    const Vec2 offset(sigma * rng.gaussian(), sigma * rng.gaussian());
    Pose6 pose;
    pose.position = Vec3(hole_pose.x + offset.x(), hole_pose.y + offset.y(), 0.005);
    pose.rotation = Vec3(0, 0, hole_pose.yaw);
    const double target_z = -0.002;
    auto feasible = [&](double z) {
      Pose6 p = pose;
      p.position.z() = z;
      return max_penetration(env, pair.peg, p) <= 1e-9;
    };
    result.success = feasible(target_z);
    result.steps = 1;
    if (!result.success) result.failure_phase = "baseline-descent";
    return result;
  }

  try {
    const std::vector<PlanarPose> samples = {hole_pose.normalized()};
    const int corner_index = choose_corner(pair.hole, samples);
    const int stride = symmetry_corner_stride(pair.hole.base.size(), symmetry_period);
    RandomStream place_rng = rng.child(12);
    const Placement placement = place_into_basin(env, pair.peg, pair.hole, samples,
                                                 corner_index, stride, sigma, place_rng);
    if (!placement.ok) {
      result.failure_phase = "placement";
      return result;
    }
    RandomStream align_rng = rng.child(13);
    const AlignOutcome aligned = align(env, pair.peg, placement.regions, placement.state,
                                       ComplianceParams::translation_dominant(), sigma,
                                       &align_rng);
    result.delta_v = aligned.deviation.delta_v;
    RandomStream insert_rng = rng.child(14);
    InsertionContext ctx;
    ctx.sigma = sigma;
    ctx.rng = &insert_rng;
    ctx.symmetry_period = symmetry_period;
    result.trace = insert(env, pair.peg, aligned.steady, placement.regions, MpcConfig{},
                          ComplianceParams::rotation_dominant(), ctx);
    result.steps = static_cast<int>(result.trace.steps.size());
    result.success = result.trace.success;
    if (!result.success) result.failure_phase = "insertion";
  } catch (const Error& e) {
    result.failure_phase = std::string("error: ") + e.what();
  }
  return result;
}

std::vector<BenchmarkRow> run_benchmark(const BenchConfig& config,
                                        const std::string& output_path) {
  std::vector<std::string> pegs = config.pegs;
  if (pegs.empty())
    for (const CatalogEntry& e : peg_catalog()) pegs.push_back(e.name);
  if (pegs.empty() || config.repetitions <= 0)
    throw PreconditionError("run_benchmark: empty suite");

  struct Trial {
    std::string peg;
    int rep;
    uint64_t seed;
    bool success = false;
    double interactions = 0;
    double uncertainty = 0;
    std::string failure;
  };
  std::vector<Trial> trials;
  for (size_t pi = 0; pi < pegs.size(); ++pi)
    for (int rep = 0; rep < config.repetitions; ++rep)
      trials.push_back({pegs[pi], rep, mix(config.seed, mix(pi + 1, rep + 1))});

  const char* mode_name = config.mode == BenchMode::InsertionFunnel
                              ? "funnel"
                              : (config.mode == BenchMode::PositionBaseline ? "baseline"
                                                                            : "pipeline");

  parallel_for(static_cast<int>(trials.size()), [&](int i) {
    Trial& t = trials[i];
    if (config.mode == BenchMode::FullPipeline) {
      ScenarioConfig sc;
      sc.peg_name = t.peg;
      sc.prior = config.prior;
      sc.noise_sigma_mm = config.sigma_mm;
      sc.seed = t.seed;
      const TrialResult r = run_pipeline(sc);
      t.success = r.success;
      t.interactions = r.interactions;
      t.uncertainty = 1.0 - r.final_jaccard;
      t.failure = r.failure_phase;
    } else {
      const CatalogEntry& entry = catalog_entry(t.peg);
      const PrismPair pair = build_catalog_pair(entry);
      RandomStream rng(t.seed);
      PlanarPose pose;
      pose.x = rng.uniform(-0.005, 0.005);
      pose.y = rng.uniform(-0.005, 0.005);
      pose.yaw = wrap_angle(rng.uniform(-M_PI, M_PI));
      const InsertionTrialResult r =
          run_insertion_trial(pair, pose, config.sigma_mm * 1e-3, rng.next_u64(),
                              config.mode == BenchMode::PositionBaseline,
                              entry.symmetry_period());
      t.success = r.success;
      t.interactions = r.steps;
      t.uncertainty = 0.0;
      t.failure = r.failure_phase;
    }
  });

  // per-peg aggregation
  std::vector<BenchmarkRow> rows;
  for (const std::string& peg : pegs) {
    BenchmarkRow row;
    row.peg = peg;
    row.mode = mode_name;
    double sum_i = 0, sum_i2 = 0, sum_u = 0, sum_u2 = 0;
    for (const Trial& t : trials) {
      if (t.peg != peg) continue;
      ++row.trials;
      if (t.success) ++row.successes;
      sum_i += t.interactions;
      sum_i2 += t.interactions * t.interactions;
      sum_u += t.uncertainty;
      sum_u2 += t.uncertainty * t.uncertainty;
    }
    const double n = row.trials;
    row.mean_interactions = sum_i / n;
    row.std_interactions =
        std::sqrt(std::max(sum_i2 / n - row.mean_interactions * row.mean_interactions, 0.0));
    row.mean_uncertainty = sum_u / n;
    row.std_uncertainty =
        std::sqrt(std::max(sum_u2 / n - row.mean_uncertainty * row.mean_uncertainty, 0.0));
    rows.push_back(row);
  }

  if (!output_path.empty()) {
    std::ofstream csv(output_path);
    if (!csv) throw IoError("cannot write " + output_path);
    csv << "peg,mode,successes,trials,mean_interactions,std_interactions,mean_uncertainty,"
           "std_uncertainty\n";
    for (const BenchmarkRow& r : rows) {
      csv << r.peg << ',' << r.mode << ',' << r.successes << ',' << r.trials << ','
          << fmt(r.mean_interactions) << ',' << fmt(r.std_interactions) << ','
          << fmt(r.mean_uncertainty) << ',' << fmt(r.std_uncertainty) << '\n';
    }
    std::ofstream txt(output_path + ".summary.txt");
    if (!txt) throw IoError("cannot write " + output_path + ".summary.txt");
    int succ = 0, total = 0;
    txt << "benchmark mode=" << mode_name << " sigma=" << config.sigma_mm << "mm reps="
        << config.repetitions << "\n";
    for (const BenchmarkRow& r : rows) {
      txt << "  " << r.peg << ": " << r.successes << "/" << r.trials << " success, "
          << fmt(r.mean_interactions) << " +/- " << fmt(r.std_interactions)
          << " interactions, uncertainty " << fmt(r.mean_uncertainty) << " +/- "
          << fmt(r.std_uncertainty) << "\n";
      succ += r.successes;
      total += r.trials;
    }
    txt << "overall: " << succ << "/" << total << "\n";
  }
  return rows;
}

void emit_convergence_study(const StudyConfig& config, const std::string& output_path) {
  std::vector<std::string> pegs = config.pegs;
  if (pegs.empty())
    for (const CatalogEntry& e : peg_catalog()) pegs.push_back(e.name);

  struct Run {
    std::string peg;
    double sigma_mm;
    ProbePolicy policy;
    int seed_index;
    std::vector<PerceptionStepMetrics> steps;
  };
  std::vector<Run> runs;
  for (const std::string& peg : pegs)
    for (double s : config.sigmas_mm)
      for (ProbePolicy pol : config.policies)
        for (int seed = 0; seed < config.seeds; ++seed)
          runs.push_back({peg, s, pol, seed, {}});

  parallel_for(static_cast<int>(runs.size()), [&](int i) {
    Run& run = runs[i];
    const CatalogEntry& entry = catalog_entry(run.peg);
    const PrismPair pair = build_catalog_pair(entry);
    // paired seeds: identical scenario and noise stream across policies
    const uint64_t scenario_seed = mix(config.seed_base, mix(std::hash<std::string>{}(run.peg),
                                                             run.seed_index + 1));
    RandomStream env_rng(scenario_seed);
    PlanarPose hole_pose;
    hole_pose.x = env_rng.uniform(-0.005, 0.005);
    hole_pose.y = env_rng.uniform(-0.005, 0.005);
    hole_pose.yaw = wrap_angle(env_rng.uniform(-M_PI, M_PI));
    const BoardRegion board =
        dilated_bounding_circle(pair.hole, hole_pose, config.board_dilation, env_rng);
    const BoardEnvironment env = make_environment(pair, hole_pose, board);

    PerceptionConfig pc;
    pc.sigma = run.sigma_mm * 1e-3;
    pc.policy = run.policy;
    pc.max_steps = config.steps;
    pc.early_stop = false;
    pc.yaw_lo = 0.0;
    pc.yaw_hi = entry.symmetry_period();
    RandomStream rng(mix(scenario_seed, run.sigma_mm * 1000 + 7));
    const PerceptionResult pr = run_interactive_perception(env, pair.peg, pc, rng);
    run.steps = pr.steps;
  });

  std::ofstream csv(output_path);
  if (!csv) throw IoError("cannot write " + output_path);
  csv << "peg,sigma_mm,policy,seed,step,jaccard,jaccard_stderr,delta_h,acceptance_rate,"
         "probe_x,probe_y\n";
  for (const Run& run : runs) {
    for (const PerceptionStepMetrics& m : run.steps) {
      csv << run.peg << ',' << fmt(run.sigma_mm) << ','
          << (run.policy == ProbePolicy::Entropy ? "entropy" : "random") << ','
          << run.seed_index << ',' << m.step << ',' << fmt(m.jaccard) << ','
          << fmt(m.jaccard_std_error) << ',' << fmt(m.delta_h) << ','
          << fmt(m.acceptance_rate) << ',' << fmt(m.probe.x()) << ',' << fmt(m.probe.y())
          << '\n';
    }
  }
}

void parallel_for(int count, const std::function<void(int)>& work, int max_workers) {
  if (count <= 0) return;
  int workers = max_workers > 0 ? max_workers
                                : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::mutex err_mutex;
  std::exception_ptr first_error;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace pih
