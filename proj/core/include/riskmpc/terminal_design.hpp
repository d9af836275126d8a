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

#include <vector>

#include "riskmpc/common.hpp"
#include "riskmpc/conic/program.hpp"
#include "riskmpc/conic/solver.hpp"
#include "riskmpc/system_model.hpp"

namespace riskmpc {

// Result of the offline terminal synthesis: the invariant-ellipsoid shape,
// the terminal cost matrix, and the terminal feedback gain, together with
// the raw factor variables they were recovered from. The factorized form
// guarantees invertibility of the slack factor (its symmetric part is
// positive definite), which is what makes the gain recovery well posed.
struct TerminalDesign {
  Matrix shape;          // terminal ellipsoid {x : x' shape^{-1} x <= 1}
  Matrix cost;           // terminal cost matrix (symmetric positive definite)
  Matrix gain;           // terminal feedback u = gain * x
  Matrix raw_gain_factor;  // gain = raw_gain_factor * raw_slack^{-1}
  Matrix raw_slack;        // slack factor; raw_slack + raw_slack' > 0
  Matrix raw_cost_inverse;  // cost = raw_cost_inverse^{-1}
};

// Per-condition worst margins from re-evaluating the original (bilinear)
// design conditions at a concrete design. Margins are largest eigenvalues:
// negative means the condition holds strictly.
struct VerificationReport {
  std::vector<double> stability_margins;   // one per envelope vertex
  double control_margin = 0.0;             // control-constraint condition
  std::vector<double> state_margins;       // one per branch
  std::vector<double> invariance_margins;  // one per branch
  double tolerance = 1e-9;                 // strictness required to pass

  double worst_stability() const;
  double worst() const;
  // The Lyapunov-decrease family alone (risk-sensitive stability).
  bool stability_pass() const { return worst_stability() < -tolerance; }
  // All four condition families strictly satisfied.
  bool pass() const { return worst() < -tolerance; }
};

// Assembled synthesis program plus the variable handles needed to read a
// solution back, and structural metadata used by diagnostics and tests.
struct PeProgram {
  conic::ConicProgram program;
  conic::SymMatrixVar shape_var;        // ellipsoid shape
  conic::SymMatrixVar cost_inverse_var;  // inverse terminal cost
  conic::RectMatrixVar slack_var;       // invertible slack factor
  conic::RectMatrixVar gain_factor_var;  // gain times slack factor
  conic::Var volume_var;  // det-root of the shape (maximized)
  int stability_block_size = 0;
  int stability_lmi_count = 0;
  int constraint_lmi_count = 0;
};

// Builds the linear-matrix-inequality synthesis program: one stability
// block per envelope vertex, plus one control-constraint block, one
// state-constraint block per branch, and one invariance block per branch,
// maximizing the determinant root of the ellipsoid shape. Throws
// std::invalid_argument on dimension mismatches or an empty vertex list.
PeProgram build_pe_program(const SystemModel& model,
                           const CostWeights& weights,
                           const ConstraintSet& constraints,
                           const std::vector<Vector>& vertices);

// Solves the synthesis program and recovers the design. Throws
// SynthesisInfeasibleError when the program is infeasible and
// SolverFailureError on numerical breakdown.
TerminalDesign solve_pe(const SystemModel& model, const CostWeights& weights,
                        const ConstraintSet& constraints,
                        const std::vector<Vector>& vertices,
                        const conic::SolveOptions& options = {});

// Directly evaluates the bilinear design conditions at a concrete design
// and reports per-condition margins. Never throws on a failing design.
VerificationReport verify_terminal(const SystemModel& model,
                                   const CostWeights& weights,
                                   const ConstraintSet& constraints,
                                   const std::vector<Vector>& vertices,
                                   const TerminalDesign& design);

// Degenerate one-shot design: a static linear policy with a certified
// quadratic cost bound at the given initial state.
struct StaticPolicyDesign {
  TerminalDesign design;
  double cost_bound = 0.0;  // minimized bound on x0' cost x0
};

// Solves the synthesis inequalities augmented with membership of x0 in the
// terminal ellipsoid and an epigraph on the quadratic cost at x0,
// minimizing that bound. The returned gain is a stabilizing static policy
// on the ellipsoid. Throws SynthesisInfeasibleError when x0 cannot be
// covered.
StaticPolicyDesign mpc0_design(const SystemModel& model,
                               const CostWeights& weights,
                               const ConstraintSet& constraints,
                               const std::vector<Vector>& vertices,
                               const Vector& x0,
                               const conic::SolveOptions& options = {});

}  // namespace riskmpc
