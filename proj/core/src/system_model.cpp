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

#include "riskmpc/system_model.hpp"

#include <cmath>

namespace riskmpc {

namespace {

void require_symmetric_positive_definite(const Matrix& M, const char* name) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw std::invalid_argument(std::string(name) + ": must be square");
  }
  if ((M - M.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string(name) + ": must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument(std::string(name) +
                                ": must be positive definite");
  }
}

}  // namespace

SystemModel::SystemModel(std::vector<Matrix> A, std::vector<Matrix> B, Pmf p)
    : A_(std::move(A)), B_(std::move(B)), p_(std::move(p)) {
  if (A_.empty() || A_.size() != B_.size()) {
    throw std::invalid_argument("SystemModel: need matching A/B lists");
  }
  if (static_cast<int>(A_.size()) != p_.size()) {
    throw std::invalid_argument("SystemModel: pmf size must match branches");
  }
  const Eigen::Index nx = A_[0].rows();
  const Eigen::Index nu = B_[0].cols();
  if (nx == 0 || nu == 0) {
    throw std::invalid_argument("SystemModel: empty state or input");
  }
  for (std::size_t j = 0; j < A_.size(); ++j) {
    if (A_[j].rows() != nx || A_[j].cols() != nx || B_[j].rows() != nx ||
        B_[j].cols() != nu) {
      throw std::invalid_argument("SystemModel: inconsistent matrix shapes");
    }
  }
}

Vector step(const SystemModel& m, const Vector& x, const Vector& u, int j) {
  if (j < 0 || j >= m.branches()) {
    throw std::out_of_range("step: branch index out of range");
  }
  if (x.size() != m.nx() || u.size() != m.nu()) {
    throw std::invalid_argument("step: dimension mismatch");
  }
  return m.A(j) * x + m.B(j) * u;
}

CostWeights::CostWeights(Matrix Q, Matrix R)
    : Q_(std::move(Q)), R_(std::move(R)) {
  require_symmetric_positive_definite(Q_, "CostWeights Q");
  require_symmetric_positive_definite(R_, "CostWeights R");
}

double stage_cost(const CostWeights& w, const Vector& x, const Vector& u) {
  if (x.size() != w.Q().rows() || u.size() != w.R().rows()) {
    throw std::invalid_argument("stage_cost: dimension mismatch");
  }
  return x.dot(w.Q() * x) + u.dot(w.R() * u);
}

ConstraintSet::ConstraintSet(Matrix Tx, double x_max, Matrix Tu, double u_max)
    : Tx_(std::move(Tx)), Tu_(std::move(Tu)), x_max_(x_max), u_max_(u_max) {
  if (Tx_.rows() == 0 || Tx_.cols() == 0 || Tu_.rows() == 0 ||
      Tu_.cols() == 0) {
    throw std::invalid_argument("ConstraintSet: empty scaling matrix");
  }
  if (!(x_max_ > 0.0) || !(u_max_ > 0.0)) {
    throw std::invalid_argument("ConstraintSet: bounds must be positive");
  }
}

Membership in_state_set(const ConstraintSet& c, const Vector& x, double tol) {
  if (x.size() != c.Tx().cols()) {
    throw std::invalid_argument("in_state_set: dimension mismatch");
  }
  const double margin = (c.Tx() * x).norm() - c.x_max();
  return {margin <= tol, margin};
}

Membership in_control_set(const ConstraintSet& c, const Vector& u,
                          double tol) {
  if (u.size() != c.Tu().cols()) {
    throw std::invalid_argument("in_control_set: dimension mismatch");
  }
  const double margin = (c.Tu() * u).norm() - c.u_max();
  return {margin <= tol, margin};
}

Ellipsoid::Ellipsoid(Matrix shape) : W_(std::move(shape)) {
  require_symmetric_positive_definite(W_, "Ellipsoid shape");
  llt_ = Eigen::LLT<Matrix>(W_);
  if (llt_.info() != Eigen::Success) {
    throw std::invalid_argument("Ellipsoid: Cholesky factorization failed");
  }
  chol_ = llt_.matrixL();
}

double Ellipsoid::quadratic_form(const Vector& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("Ellipsoid: dimension mismatch");
  }
  return x.dot(llt_.solve(x));
}

Membership in_ellipsoid(const Ellipsoid& e, const Vector& x, double tol) {
  const double margin = e.quadratic_form(x) - 1.0;
  return {margin <= tol, margin};
}

}  // namespace riskmpc
