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

#include "riskmpc/conic/program.hpp"

namespace riskmpc::conic {

struct SolveOptions {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  int max_iters = 100;
  double regularization = 1e-8;
  // Fallback tolerances applied to the best iterate when the iteration
  // stalls before the strict targets are met (the scaled system grows
  // singular as the complementarity gap vanishes, which is routine at
  // degenerate optima).  A stalled run whose best iterate meets these
  // is reported optimal with `reduced_accuracy` set.
  double feastol_relaxed = 1e-6;
  double abstol_relaxed = 1e-6;
  double reltol_relaxed = 1e-6;
};

enum class SolveStatus {
  kOptimal,
  kPrimalInfeasible,  // certificate of infeasible constraints
  kDualInfeasible,    // certificate of an unbounded objective
  kNumericalFailure,
};

const char* to_string(SolveStatus status);

struct Solution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  // Normalized primal/dual variables on optimal exit; on infeasibility
  // statuses they carry the scaled certificate instead.
  Vector x, y, z, s;
  double primal_objective = 0.0;  // includes the builder's constant offset
  double dual_objective = 0.0;
  double gap = 0.0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  // True when the run stalled and the result was accepted under the
  // relaxed tolerances; the reported residuals and gap still apply.
  bool reduced_accuracy = false;

  bool optimal() const { return status == SolveStatus::kOptimal; }
};

// Homogeneous self-dual interior-point solve of a standard-form program.
Solution solve(const StandardForm& sf, const SolveOptions& opts = {});

}  // namespace riskmpc::conic
