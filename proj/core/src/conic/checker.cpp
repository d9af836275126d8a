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

#include "riskmpc/conic/checker.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace riskmpc::conic {

namespace {

// Deliberately re-derives the outside-the-cone distance with plain loops so
// the check shares nothing with the solver's cone machinery.
double outside_cone(const std::vector<ConeBlock>& cones, const Vector& u) {
  double worst = 0.0;
  int off = 0;
  for (const ConeBlock& blk : cones) {
    switch (blk.kind) {
      case ConeKind::kNonneg: {
        for (int i = 0; i < blk.size; ++i) {
          worst = std::max(worst, -u(off + i));
        }
        off += blk.size;
        break;
      }
      case ConeKind::kSoc: {
        double sq = 0.0;
        for (int i = 1; i < blk.size; ++i) {
          sq += u(off + i) * u(off + i);
        }
        worst = std::max(worst, std::sqrt(sq) - u(off));
        off += blk.size;
        break;
      }
      case ConeKind::kPsd: {
        const int n = blk.size;
        Matrix mat(n, n);
        int k = off;
        for (int j = 0; j < n; ++j) {
          mat(j, j) = u(k++);
          for (int i = j + 1; i < n; ++i) {
            mat(i, j) = u(k++) / std::sqrt(2.0);
            mat(j, i) = mat(i, j);
          }
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(mat, Eigen::EigenvaluesOnly);
        worst = std::max(worst, -eig.eigenvalues().minCoeff());
        off += n * (n + 1) / 2;
        break;
      }
    }
  }
  return worst;
}

double inf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

double ResidualReport::worst() const {
  return std::max({equality_violation, cone_equation_violation,
                   stationarity_violation, primal_cone_violation,
                   dual_cone_violation, complementarity,
                   objective_mismatch});
}

ResidualReport check_solution(const StandardForm& sf, const Solution& sol) {
  ResidualReport rep;
  rep.equality_violation = inf_norm(sf.a * sol.x - sf.b);
  rep.cone_equation_violation = inf_norm(sf.g * sol.x + sol.s - sf.h);
  rep.stationarity_violation =
      inf_norm(sf.c + sf.a.transpose() * sol.y + sf.g.transpose() * sol.z);
  rep.primal_cone_violation = outside_cone(sf.cones, sol.s);
  rep.dual_cone_violation = outside_cone(sf.cones, sol.z);
  rep.complementarity =
      sol.s.size() > 0 ? std::abs(sol.s.dot(sol.z)) : 0.0;
  rep.objective_mismatch = std::abs(sf.c.dot(sol.x) + sf.objective_offset -
                                    sol.primal_objective);
  return rep;
}

}  // namespace riskmpc::conic
