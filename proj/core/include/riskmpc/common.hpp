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

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace riskmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = std::int64_t;

// An offline synthesis program was reported infeasible (the caller may relax
// constraints or shrink the risk envelope and retry).
class SynthesisInfeasibleError : public std::runtime_error {
 public:
  explicit SynthesisInfeasibleError(const std::string& what)
      : std::runtime_error(what) {}
};

// The conic backend failed to converge or hit a numerical breakdown.
class SolverFailureError : public std::runtime_error {
 public:
  explicit SolverFailureError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace riskmpc
