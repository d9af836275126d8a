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

#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <nlohmann/json_fwd.hpp>

#include "riskmpc/conic/cone_ops.hpp"
#include "riskmpc/conic/expr.hpp"

namespace riskmpc::conic {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Cone program in standard primal form:
//   minimize    c'x + objective_offset
//   subject to  A x = b,  G x + s = h,  s in K,
// where K is the product of the cone blocks (nonnegative rows first, then
// second-order blocks, then semidefinite blocks).
struct StandardForm {
  Vector c;
  SparseMatrix a;  // p x n
  Vector b;
  SparseMatrix g;  // m x n
  Vector h;
  std::vector<ConeBlock> cones;
  double objective_offset = 0.0;
  std::vector<std::string> var_names;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_eq() const { return static_cast<int>(b.size()); }
  int num_cone_rows() const { return static_cast<int>(h.size()); }

  nlohmann::json debug_json(bool include_data = false) const;
};

// Incremental builder for cone programs. Variables are scalars; helpers
// allocate vector/matrix groupings on top. Constraints accept affine
// expressions of those variables.
class ConicProgram {
 public:
  Var add_scalar(const std::string& name = "");
  RectMatrixVar add_rect(int rows, int cols, const std::string& name = "");
  SymMatrixVar add_symmetric(int n, const std::string& name = "");

  // Objective: minimize the expression (accumulates across calls).
  void minimize(const LinExpr& objective);

  // expr == 0.
  void add_equality(const LinExpr& expr);
  // expr >= 0.
  void add_nonneg(const LinExpr& expr);
  // entries[0] >= || entries[1:] ||_2.
  void add_soc(std::vector<LinExpr> entries);
  // m symmetric (checked structurally), m(x) positive semidefinite.
  void add_psd(const AffineMatrix& m);
  // sum_i w_i^2 <= bound, encoded as one second-order block.
  void add_quadratic_leq(const std::vector<LinExpr>& w, const LinExpr& bound);
  // Returns t constrained to t <= det(W)^(1/n) on the cone W >= 0 (epigraph
  // of the concave determinant root, via a triangular factor block and a
  // geometric-mean tower).
  Var add_detroot_epigraph(const SymMatrixVar& w);

  int num_vars() const { return next_var_; }
  const std::string& var_name(int index) const { return names_[index]; }

  StandardForm build() const;

 private:
  int next_var_ = 0;
  std::vector<std::string> names_;
  std::vector<std::pair<int, double>> objective_;  // merged at build
  double objective_offset_ = 0.0;
  std::vector<LinExpr> equalities_;
  std::vector<LinExpr> nonneg_;
  std::vector<std::vector<LinExpr>> soc_blocks_;
  std::vector<AffineMatrix> psd_blocks_;
};

}  // namespace riskmpc::conic
