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
#include <span>
#include <string>
#include <vector>

#include "riskmpc/common.hpp"
#include "riskmpc/conic/program.hpp"
#include "riskmpc/conic/solver.hpp"
#include "riskmpc/risk_envelope.hpp"
#include "riskmpc/system_model.hpp"
#include "riskmpc/terminal_design.hpp"

namespace riskmpc {

// Complete L-ary disturbance-history tree for a lookahead horizon: control
// (interior) nodes at levels 0..N-1 and leaf state nodes at level N, all
// indexed in level order. The node for history (j_0, ..., j_{h-1}) lives at
// level h; the root has the empty history.
class ScenarioTree {
 public:
  static constexpr Index kDefaultNodeCap = 1000000;

  ScenarioTree(int branching, int horizon, Index node_cap = kDefaultNodeCap);

  int branching() const { return branching_; }
  int horizon() const { return horizon_; }
  Index node_count() const { return offsets_.back(); }
  Index interior_count() const { return offsets_[horizon_]; }
  Index leaf_count() const { return offsets_.back() - offsets_[horizon_]; }
  Index level_offset(int level) const { return offsets_[level]; }
  Index level_size(int level) const {
    return offsets_[level + 1] - offsets_[level];
  }
  int level_of(Index node) const;
  Index child(Index node, int branch) const;
  Index parent(Index node) const;
  std::vector<int> history(Index node) const;
  Index node_at(std::span<const int> history) const;

 private:
  int branching_;
  int horizon_;
  std::vector<Index> offsets_;  // horizon + 2 entries; last = node_count
};

// Structural size report of one assembled lookahead program.
struct MpcProgramStats {
  int variables = 0;              // scalar decision variables
  Index epigraph_variables = 0;   // one risk epigraph per interior node
  Index vertex_inequalities = 0;  // envelope vertices x interior nodes
  Index quadratic_epigraphs = 0;  // one per state node (cost epigraphs)
  Index norm_constraints = 0;     // control/state/terminal norm bounds
};

// Assembled program plus the handles needed to read a solution back.
struct CmpcProgram {
  conic::ConicProgram program;
  std::vector<conic::RectMatrixVar> node_controls;  // by interior node
  std::vector<conic::Var> node_epigraphs;           // by interior node
  std::vector<conic::Var> node_costs;               // by state node
  MpcProgramStats stats;
};

struct MpcStepResult {
  conic::SolveStatus status = conic::SolveStatus::kNumericalFailure;
  Vector control;   // first control, set on optimal
  double objective = 0.0;
  // |objective - nested-risk recomposition of the solved policy's realized
  // cost tree|; small at an exact optimum.
  double risk_consistency_gap = 0.0;
  MpcProgramStats stats;
  double build_seconds = 0.0;
  double solve_seconds = 0.0;
  std::string note;

  bool optimal() const { return status == conic::SolveStatus::kOptimal; }
};

// Receding-horizon controller: assembles and solves the lookahead program
// for a given state. Immutable after construction; safe to share across
// threads for concurrent solves on distinct states.
class ScenarioMpc {
 public:
  ScenarioMpc(SystemModel model, CostWeights weights,
              ConstraintSet constraints, TerminalDesign design,
              RiskEnvelope envelope, int horizon,
              Index node_cap = ScenarioTree::kDefaultNodeCap);

  const ScenarioTree& tree() const { return tree_; }
  const SystemModel& model() const { return model_; }
  const CostWeights& weights() const { return weights_; }
  const ConstraintSet& constraints() const { return constraints_; }
  const TerminalDesign& design() const { return design_; }
  const RiskEnvelope& envelope() const { return envelope_; }
  const Ellipsoid& terminal_set() const { return terminal_set_; }

  // Assembles the lookahead program at state x: controls and risk
  // epigraphs on interior nodes, states eliminated by affine substitution,
  // per-node quadratic cost epigraphs, norm constraints at every node, a
  // terminal-ellipsoid bound at every leaf, and one inequality per
  // (interior node, envelope vertex). Objective: first stage cost plus the
  // root epigraph. leaf_cost_offset adds a constant to every leaf cost —
  // by translation invariance of the recursion it shifts the optimum by
  // exactly that constant, which diagnostics exploit.
  CmpcProgram build_program(const Vector& x,
                            double leaf_cost_offset = 0.0) const;

  // Builds and solves; on optimal extracts the first control and
  // recomposes the nested risk of the realized cost tree as an internal
  // consistency measure. A state outside the state set is reported as
  // infeasible without solving.
  MpcStepResult solve_step(const Vector& x,
                           const conic::SolveOptions& options = {}) const;

 private:
  SystemModel model_;
  CostWeights weights_;
  ConstraintSet constraints_;
  TerminalDesign design_;
  RiskEnvelope envelope_;
  ScenarioTree tree_;
  Ellipsoid terminal_set_;
  Matrix stage_state_sqrt_;    // square root of the state weight
  Matrix stage_control_sqrt_;  // square root of the control weight
  Matrix terminal_cost_sqrt_;  // square root of the terminal cost
  Matrix shape_inv_sqrt_;      // inverse square root of the ellipsoid shape
};

struct TrajectoryStep {
  Vector state;    // x_k before applying the control
  Vector control;  // u_k actually applied
  int branch = 0;  // sampled disturbance branch
  double stage_cost = 0.0;
  double cumulative_cost = 0.0;
  double objective = 0.0;  // lookahead value at x_k (0 when fallback used)
  bool mpc_optimal = false;
  bool used_fallback = false;
  double state_margin = 0.0;    // membership margin of x_k (negative inside)
  double control_margin = 0.0;  // membership margin of u_k
  double solve_seconds = 0.0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryStep> steps;
  Vector final_state;
  bool completed = false;
  std::string abort_reason;
};

// Runs the closed loop for a fixed number of steps with deterministic
// branch sampling from the seed. A non-optimal solve after the first step
// falls back to the terminal gain when the state is inside the terminal
// set, otherwise the run aborts with a diagnostic. Throws std::domain_error
// when the very first solve is not optimal.
TrajectoryRecord closed_loop(const ScenarioMpc& mpc, const Vector& x0,
                             int steps, std::uint64_t seed,
                             const conic::SolveOptions& options = {});

}  // namespace riskmpc
