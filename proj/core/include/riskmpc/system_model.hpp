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

#include "riskmpc/pmf.hpp"

namespace riskmpc {

// Discrete-time linear system with finite-support multiplicative uncertainty:
// x+ = A[j] x + B[j] u, where branch j is drawn from the pmf p.
class SystemModel {
 public:
  SystemModel(std::vector<Matrix> A, std::vector<Matrix> B, Pmf p);

  int nx() const { return static_cast<int>(A_[0].rows()); }
  int nu() const { return static_cast<int>(B_[0].cols()); }
  int branches() const { return static_cast<int>(A_.size()); }
  const Matrix& A(int j) const { return A_[j]; }
  const Matrix& B(int j) const { return B_[j]; }
  const Pmf& pmf() const { return p_; }

 private:
  std::vector<Matrix> A_, B_;
  Pmf p_;
};

// One-step update x+ = A[j] x + B[j] u.
Vector step(const SystemModel& m, const Vector& x, const Vector& u, int j);

// Quadratic stage cost x'Qx + u'Ru with Q, R symmetric positive definite
// (validated at construction).
class CostWeights {
 public:
  CostWeights(Matrix Q, Matrix R);
  const Matrix& Q() const { return Q_; }
  const Matrix& R() const { return R_; }

 private:
  Matrix Q_, R_;
};

double stage_cost(const CostWeights& w, const Vector& x, const Vector& u);

// Norm-ball state and control constraints ||Tx x|| <= x_max, ||Tu u|| <= u_max.
class ConstraintSet {
 public:
  ConstraintSet(Matrix Tx, double x_max, Matrix Tu, double u_max);
  const Matrix& Tx() const { return Tx_; }
  const Matrix& Tu() const { return Tu_; }
  double x_max() const { return x_max_; }
  double u_max() const { return u_max_; }

 private:
  Matrix Tx_, Tu_;
  double x_max_, u_max_;
};

// Membership verdict with a signed margin (constraint value minus bound;
// negative inside, positive outside).
struct Membership {
  bool inside;
  double margin;
};

Membership in_state_set(const ConstraintSet& c, const Vector& x,
                        double tol = 1e-6);
Membership in_control_set(const ConstraintSet& c, const Vector& u,
                          double tol = 1e-6);

// Ellipsoid { x : x' W^{-1} x <= 1 } with W symmetric positive definite.
class Ellipsoid {
 public:
  explicit Ellipsoid(Matrix shape);
  const Matrix& shape() const { return W_; }
  int dim() const { return static_cast<int>(W_.rows()); }
  // Lower-triangular C with C C' = W; maps the unit ball onto the ellipsoid.
  const Matrix& cholesky_factor() const { return chol_; }
  double quadratic_form(const Vector& x) const;  // x' W^{-1} x

 private:
  Matrix W_;
  Matrix chol_;
  Eigen::LLT<Matrix> llt_;
};

Membership in_ellipsoid(const Ellipsoid& e, const Vector& x,
                        double tol = 1e-6);

}  // namespace riskmpc
