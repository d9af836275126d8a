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

namespace riskmpc::conic {

// Cone families of the product cone K: componentwise nonnegative entries,
// second-order (Lorentz) blocks, and positive semidefinite blocks in packed
// symmetric (svec) coordinates.
enum class ConeKind { kNonneg, kSoc, kPsd };

struct ConeBlock {
  ConeKind kind;
  // Entry count for kNonneg, vector dimension for kSoc, matrix order for
  // kPsd (which occupies size*(size+1)/2 packed rows).
  int size;
  int rows() const;
};

// Packed-row layout of a list of cone blocks within the slack vector.
struct ConeLayout {
  std::vector<ConeBlock> blocks;
  std::vector<int> offsets;  // blocks.size() + 1 entries
  int total_rows = 0;
  // Barrier degree: 1 per nonnegative entry, 1 per second-order block,
  // matrix order per semidefinite block.
  int degree = 0;
};

ConeLayout make_layout(const std::vector<ConeBlock>& blocks);

// Symmetric packing: lower triangle, column-major, off-diagonal entries
// scaled by sqrt(2) so that svec(X) . svec(Y) equals the Frobenius inner
// product <X, Y>.
int svec_length(int n);
Vector svec(const Matrix& x);
Matrix smat(const Vector& v, int n);

// Nesterov-Todd scaling of one cone block, with the scaled point
// lambda = W z = W^{-T} s.
struct BlockScaling {
  ConeKind kind = ConeKind::kNonneg;
  int size = 0;
  Vector d;        // nonneg: W = diag(d)
  double beta = 0; // soc: W = beta (2 v v' - J)
  Vector v;
  Matrix r, rti;   // psd: W z = svec(r' Z r), W^{-T} s = svec(rti' S rti)
  Vector lambda;   // scaled point (svec for psd; diagonal matrix)
};

// Computes all block scalings for strictly feasible s, z (throws
// SolverFailureError if a block is not in the interior).
std::vector<BlockScaling> compute_scalings(const ConeLayout& layout,
                                           const Vector& s, const Vector& z);

// Identity scalings (W = I), used before the first iterate exists.
std::vector<BlockScaling> identity_scalings(const ConeLayout& layout);

// Linear maps defined by the scaling. All operate on full stacked vectors.
Vector apply_w(const ConeLayout& layout,
               const std::vector<BlockScaling>& scal, const Vector& x);
Vector apply_w_transpose(const ConeLayout& layout,
                         const std::vector<BlockScaling>& scal,
                         const Vector& x);
Vector apply_w_inverse_transpose(const ConeLayout& layout,
                                 const std::vector<BlockScaling>& scal,
                                 const Vector& x);
Vector apply_wtw(const ConeLayout& layout,
                 const std::vector<BlockScaling>& scal, const Vector& x);
Vector apply_wtw_inverse(const ConeLayout& layout,
                         const std::vector<BlockScaling>& scal,
                         const Vector& x);
// Dense materialization of the W'W block for one cone block (used by the
// sparse KKT assembly).
Matrix dense_wtw_block(const BlockScaling& scal);

// Jordan-algebra operations in the scaled space.
Vector cone_identity(const ConeLayout& layout);       // e
Vector jordan_product(const ConeLayout& layout, const Vector& a,
                      const Vector& b);               // a o b
// Solves lambda o g = v for g; lambda must be the scaled point (psd blocks
// diagonal).
Vector jordan_solve(const ConeLayout& layout, const Vector& lambda,
                    const Vector& v);

// Largest t such that u + (1/t) d leaves the cone, measured against the
// scaled point lambda (d and lambda in scaled coordinates); nonpositive
// values mean d points into the cone. With lambda empty, measures the step
// of u itself against the cone identity (used at initialization).
double max_step(const ConeLayout& layout, const Vector& lambda,
                const Vector& d);
double max_step_to_cone(const ConeLayout& layout, const Vector& u);

// Adds a * e blockwise (all entries of nonneg blocks, first entry of soc
// blocks, diagonal of psd blocks).
void add_identity_multiple(const ConeLayout& layout, Vector& u, double a);

// Smallest blockwise interiority measure of u: min entry for nonneg,
// u0 - |u1| for soc, smallest eigenvalue for psd. Nonnegative means u in K.
double cone_margin(const ConeLayout& layout, const Vector& u);

}  // namespace riskmpc::conic
