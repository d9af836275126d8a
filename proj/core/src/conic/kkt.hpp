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

#include <memory>
#include <vector>

#include "riskmpc/conic/program.hpp"

namespace riskmpc::conic {

// Solves the scaled Newton system
//   [ 0   A'   G'  ] [x]   [bx]
//   [ A   0    0   ] [y] = [by]
//   [ G   0  -W'W  ] [z]   [bz]
// for the current Nesterov-Todd scaling. Implementations regularize and
// iteratively refine against the unregularized system.
class KktSolver {
 public:
  virtual ~KktSolver() = default;
  virtual bool factor(const std::vector<BlockScaling>& scalings) = 0;
  virtual void solve(Vector& x, Vector& y, Vector& z) const = 0;
};

// Chooses a dense Schur-complement engine when semidefinite blocks are
// present (synthesis programs: few variables, dense couplings) and a sparse
// quasidefinite LDLT engine otherwise (scenario programs: large and sparse).
std::unique_ptr<KktSolver> make_kkt_solver(const StandardForm& sf,
                                           const ConeLayout& layout,
                                           double regularization = 1e-8);

}  // namespace riskmpc::conic
