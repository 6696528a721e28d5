#pragma once

#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pih/insertion.hpp"

namespace pih {

enum class PegKind { Round, Rectangle, Random };
enum class SymmetryClass { Central, Axial, Asymmetric };

struct CatalogEntry {
  std::string name;
  PegKind kind;
  double scale_a_mm;  // diameter for rounds, bounding box otherwise
  double scale_b_mm;
  double clearance_mm;
  SymmetryClass symmetry;
  uint64_t generator_seed;  // random-base pegs only

  double max_scale_mm() const { return std::max(scale_a_mm, scale_b_mm); }
  double symmetry_period() const;
};

// The nine benchmark pegs.
const std::vector<CatalogEntry>& peg_catalog();
const CatalogEntry& catalog_entry(const std::string& name);
PrismPair build_catalog_pair(const CatalogEntry& entry, double sample_density = 2000.0);

// Shape-file round trip (JSON, vertex lists in millimeters).
void save_prism_pair(const std::string& path, const PrismPair& pair, const std::string& name);
PrismPair load_prism_pair(const std::string& path);

enum class PriorKind { PartiallyInside, BoundedArea };

struct ScenarioConfig {
  std::string peg_name = "Round 16";
  std::optional<PlanarPose> hole_pose;  // unset: random within the board
  PriorKind prior = PriorKind::BoundedArea;
  double board_dilation = 0.3;  // bounding-circle dilation for the search area
  double noise_sigma_mm = 0.0;
  ProbePolicy policy = ProbePolicy::Entropy;
  uint64_t seed = 0;
  int hypothesis_count = 200;
  int max_perception_steps = 8;
  double stiffness_scale = 1.0;
};

struct TrialResult {
  std::string scenario_id;
  int perception_steps = 0;
  int interactions = 0;  // perception probes + placement attempts + alignment
  double final_jaccard = 0.0;
  double alignment_delta_v = 0.0;
  int insertion_steps = 0;
  bool success = false;
  std::string failure_phase;  // empty on success
  double perception_ms = 0.0;
  double alignment_ms = 0.0;
  double insertion_ms = 0.0;

  std::string csv_row() const;
  static std::string csv_header();
};

// Full Alg. "peg-in-hole assembly" pipeline: perceive (or seed the region
// from a partial insertion), align to the chosen corner, insert under MPC.
TrialResult run_pipeline(const ScenarioConfig& config);

// Insertion-only trial at a known hole pose with execution noise. baseline
// selects the position-controlled rigid descent instead of the funnels.
struct InsertionTrialResult {
  bool success = false;
  int steps = 0;
  double delta_v = 0.0;
  std::string failure_phase;
  InsertionTrace trace;
};
InsertionTrialResult run_insertion_trial(const PrismPair& pair, const PlanarPose& hole_pose,
                                         double sigma, uint64_t seed, bool baseline,
                                         double symmetry_period = 2.0 * M_PI);

struct BenchmarkRow {
  std::string peg;
  std::string mode;
  int successes = 0;
  int trials = 0;
  double mean_interactions = 0.0;
  double std_interactions = 0.0;
  double mean_uncertainty = 0.0;  // 1 - jaccard
  double std_uncertainty = 0.0;
};

enum class BenchMode { InsertionFunnel, PositionBaseline, FullPipeline };

struct BenchConfig {
  std::vector<std::string> pegs;  // empty: whole catalog
  int repetitions = 10;
  double sigma_mm = 2.0;
  BenchMode mode = BenchMode::InsertionFunnel;
  PriorKind prior = PriorKind::BoundedArea;  // FullPipeline only
  uint64_t seed = 1;
};

std::vector<BenchmarkRow> run_benchmark(const BenchConfig& config, const std::string& output_path);

struct StudyConfig {
  std::vector<double> sigmas_mm{0, 1, 2, 4};
  std::vector<ProbePolicy> policies{ProbePolicy::Entropy, ProbePolicy::Random};
  std::vector<std::string> pegs;
  int seeds = 30;
  int steps = 8;
  double board_dilation = 2.0;  // search-area scale for the convergence study
  uint64_t seed_base = 1;
};

// Per (peg, sigma, policy, seed, step) Jaccard rows for convergence plots.
void emit_convergence_study(const StudyConfig& config, const std::string& output_path);

// Environment construction shared by the harness entry points.
BoardRegion dilated_bounding_circle(const HoleShape& hole, const PlanarPose& hole_pose,
                                    double dilation, RandomStream& rng);
BoardEnvironment make_environment(const PrismPair& pair, const PlanarPose& hole_pose,
                                  const BoardRegion& board);

// Bounded worker pool; results land in submission order regardless of
// completion order.
void parallel_for(int count, const std::function<void(int)>& work, int max_workers = 0);

}  // namespace pih
