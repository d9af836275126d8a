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

#include "riskmpc/conic/solver.hpp"

namespace riskmpc::conic {

// Residuals of a claimed optimal solution, recomputed directly from the
// problem data with code independent of the solver internals.
struct ResidualReport {
  double equality_violation = 0.0;     // || A x - b ||_inf
  double cone_equation_violation = 0;  // || G x + s - h ||_inf
  double stationarity_violation = 0;   // || c + A'y + G'z ||_inf
  double primal_cone_violation = 0;    // how far s is outside K
  double dual_cone_violation = 0;      // how far z is outside K
  double complementarity = 0.0;        // |s . z|
  double objective_mismatch = 0.0;     // |c'x + off - reported primal|

  double worst() const;
  bool within(double tol) const { return worst() <= tol; }
};

ResidualReport check_solution(const StandardForm& sf, const Solution& sol);

}  // namespace riskmpc::conic
