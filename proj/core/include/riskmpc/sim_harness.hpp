/*
 Copyright 2026 The riskmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

     http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "riskmpc/scenario_mpc.hpp"
#include "riskmpc/terminal_design.hpp"

// Experiment orchestration: the risk-aversion sweep over tail levels, the
// horizon-scaling study on randomly generated plants, and CSV/JSON report
// emission.  All randomness is derived from a master seed through a stable
// hash, so identical configurations produce identical outputs.
namespace riskmpc {

// Stable 64-bit mix of a seed with two indices.  Used to derive per-run
// seeds as stable_hash(master_seed, alpha_index, run_index); pairwise
// distinct for any practical run count.
std::uint64_t stable_hash(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b);

// Configuration of a closed-loop sweep over tail levels.
struct ExperimentConfig {
  std::vector<double> alphas = {0.001, 0.5, 1.0};  // tail levels, 1 = mean
  int horizon = 4;
  int steps = 15;
  int runs = 1000;
  std::uint64_t master_seed = 0;
  Vector initial_state;                  // start of every run
  std::vector<int> snapshots = {3, 7, 11, 14};  // cost CDF snapshot steps
  std::vector<double> quantile_levels = {0.99};
  int jobs = 1;                          // worker threads across runs
  double violation_tolerance = 1e-6;     // absolute margin tolerance
};

// Aggregate of one snapshot step: the empirical distribution of cumulative
// cost over runs, with nearest-rank quantiles.
struct SnapshotTable {
  int step_index = 0;
  std::vector<double> sorted_costs;   // ascending, one per completed run
  std::vector<double> quantiles;      // one per configured level
  double mean = 0.0;
};

// Everything recorded for one tail level.
struct AlphaResult {
  double alpha = 1.0;
  bool synthesized = false;
  std::string failure_reason;            // set when synthesis failed
  std::vector<SnapshotTable> snapshots;  // empty when synthesis failed
  std::vector<TrajectoryRecord> runs;    // per-run trajectories, run order
  std::int64_t violation_count = 0;      // steps beyond tolerance
  std::int64_t infeasible_step_count = 0;  // steps without an optimal solve
  double feasibility_rate = 1.0;         // optimal solves / total steps
};

// One row of the horizon-scaling study.
struct ScalingRow {
  int horizon = 0;
  std::int64_t control_nodes = 0;
  double solve_mean_ms = 0.0;
  double solve_max_ms = 0.0;
  double build_mean_ms = 0.0;
  int measured_steps = 0;
};

struct ExperimentReport {
  std::vector<AlphaResult> alpha_results;
  std::vector<ScalingRow> scaling;
  std::string generator_note;  // reproducibility note for generated plants
};

// Runs the full sweep: per tail level, synthesize the terminal design,
// run `runs` closed loops with seeds derived from the master seed, and
// aggregate cumulative-cost distributions at the snapshot steps.  A
// synthesis failure records its reason and the sweep continues with the
// next level.
ExperimentReport run_alpha_sweep(const SystemModel& model,
                                 const CostWeights& weights,
                                 const ConstraintSet& constraints,
                                 const ExperimentConfig& config);

// Configuration of the horizon-scaling study on a generated plant.
struct ScalingConfig {
  int branches = 6;
  int nx = 5;
  int nu = 2;
  double alpha = 0.2;
  std::vector<int> horizons = {1, 2, 3, 4, 5};
  int runs = 2;
  int steps = 15;
  std::uint64_t master_seed = 0;
  Index node_cap = ScenarioTree::kDefaultNodeCap;
};

// Generates a random stabilizable plant (per-branch Schur-stable dynamics
// with spectral radius drawn uniformly from [0.3, 0.95], unit-column input
// maps, Dirichlet branch probabilities), synthesizes its terminal design,
// and times online solves along closed-loop runs for each horizon.  A
// horizon whose tree exceeds the node cap is skipped with a note.
ExperimentReport run_scaling_study(const ScalingConfig& config);

// Writes cdf_<alpha>_<k>.csv tables, summary.json, and (when scaling rows
// are present) scaling.csv into the directory, creating it if needed.
// Numeric CSV fields use maximum-precision formatting so identical reports
// serialize byte-identically.
void emit_report(const ExperimentReport& report,
                 const std::filesystem::path& dir);

}  // namespace riskmpc
