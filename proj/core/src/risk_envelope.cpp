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

#include "riskmpc/risk_envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace riskmpc {

namespace {

// Checks q against the full constraint system of the envelope polytope.
bool feasible_point(const Vector& q, const Matrix& si, const Vector& ti,
                    const Matrix& se, const Vector& te, double tol) {
  if (q.minCoeff() < -tol) return false;
  if (std::abs(q.sum() - 1.0) > tol) return false;
  if (si.rows() > 0 && ((si * q - ti).maxCoeff() > tol)) return false;
  if (se.rows() > 0 && ((se * q - te).cwiseAbs().maxCoeff() > tol)) {
    return false;
  }
  return true;
}

}  // namespace

RiskEnvelope::RiskEnvelope(Pmf nominal, Matrix ineq_lhs, Vector ineq_rhs,
                           Matrix eq_lhs, Vector eq_rhs,
                           VertexEnumOptions opts)
    : nominal_(std::move(nominal)),
      si_(std::move(ineq_lhs)),
      se_(std::move(eq_lhs)),
      ti_(std::move(ineq_rhs)),
      te_(std::move(eq_rhs)),
      opts_(opts) {
  const int L = nominal_.size();
  if (si_.rows() != ti_.size() || (si_.rows() > 0 && si_.cols() != L)) {
    throw std::invalid_argument("RiskEnvelope: inequality data shape");
  }
  if (se_.rows() != te_.size() || (se_.rows() > 0 && se_.cols() != L)) {
    throw std::invalid_argument("RiskEnvelope: equality data shape");
  }
  if (!feasible_point(nominal_.probabilities(), si_, ti_, se_, te_,
                      opts_.feas_tol)) {
    throw std::invalid_argument("RiskEnvelope: nominal pmf is not a member");
  }
}

const std::vector<Vector>& RiskEnvelope::vertices() const {
  std::call_once(cache_->once, [this] {
    cache_->verts = enumerate_vertices(dim(), si_, ti_, se_, te_, opts_);
  });
  return cache_->verts;
}

RiskEnvelope cvar_envelope(const Pmf& p, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("cvar_envelope: alpha must lie in (0, 1]");
  }
  const int L = p.size();
  // Upper caps q(j) <= p(j)/alpha; lower bounds are the simplex constraints.
  Matrix si = Matrix::Identity(L, L);
  Vector ti = p.probabilities() / alpha;
  return RiskEnvelope(p, std::move(si), std::move(ti), Matrix(0, L),
                      Vector(0));
}

RiskEnvelope expectation_envelope(const Pmf& p) {
  const int L = p.size();
  Matrix se = Matrix::Identity(L, L);
  Vector te = p.probabilities();
  return RiskEnvelope(p, Matrix(0, L), Vector(0), std::move(se),
                      std::move(te));
}

std::vector<Vector> enumerate_vertices(int dim, const Matrix& ineq_lhs,
                                       const Vector& ineq_rhs,
                                       const Matrix& eq_lhs,
                                       const Vector& eq_rhs,
                                       const VertexEnumOptions& opts) {
  const int L = dim;
  if (L <= 0) throw std::invalid_argument("enumerate_vertices: empty dim");
  if (L > opts.max_dim) {
    throw std::invalid_argument(
        "enumerate_vertices: dimension exceeds enumeration cap");
  }

  // Full inequality list: nonnegativity rows -q(j) <= 0, then user rows.
  const int n_user = static_cast<int>(ineq_lhs.rows());
  const int n_ineq = L + n_user;
  Matrix gi(n_ineq, L);
  Vector hi(n_ineq);
  gi.topRows(L) = -Matrix::Identity(L, L);
  hi.head(L).setZero();
  if (n_user > 0) {
    gi.bottomRows(n_user) = ineq_lhs;
    hi.tail(n_user) = ineq_rhs;
  }

  // Equality block: the simplex normalization plus user equalities.
  const int n_eq = 1 + static_cast<int>(eq_lhs.rows());
  Matrix ge(n_eq, L);
  Vector he(n_eq);
  ge.row(0).setOnes();
  he(0) = 1.0;
  if (eq_lhs.rows() > 0) {
    ge.bottomRows(eq_lhs.rows()) = eq_lhs;
    he.tail(eq_rhs.size()) = eq_rhs;
  }

  const int eq_rank =
      static_cast<int>(Eigen::ColPivHouseholderQR<Matrix>(ge).rank());
  const int k = std::max(0, L - eq_rank);

  std::vector<Vector> verts;
  std::vector<int> subset(k);
  for (int i = 0; i < k; ++i) subset[i] = i;

  Matrix active(n_eq + k, L);
  Vector rhs(n_eq + k);
  active.topRows(n_eq) = ge;
  rhs.head(n_eq) = he;

  const bool any_subset = (k <= n_ineq);
  bool done = !any_subset;
  while (!done) {
    for (int i = 0; i < k; ++i) {
      active.row(n_eq + i) = gi.row(subset[i]);
      rhs(n_eq + i) = hi(subset[i]);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(active);
    if (static_cast<int>(qr.rank()) == L) {
      Vector q = qr.solve(rhs);
      if ((active * q - rhs).cwiseAbs().maxCoeff() <= opts.feas_tol &&
          feasible_point(q, ineq_lhs, ineq_rhs, eq_lhs, eq_rhs,
                         opts.feas_tol)) {
        bool dup = false;
        for (const Vector& v : verts) {
          if ((v - q).cwiseAbs().maxCoeff() <= opts.dedup_tol) {
            dup = true;
            break;
          }
        }
        if (!dup) verts.push_back(std::move(q));
      }
    }
    // Next k-subset in lexicographic order.
    if (k == 0) break;
    int i = k - 1;
    while (i >= 0 && subset[i] == n_ineq - k + i) --i;
    if (i < 0) {
      done = true;
    } else {
      ++subset[i];
      for (int j = i + 1; j < k; ++j) subset[j] = subset[j - 1] + 1;
    }
  }

  return verts;
}

double evaluate_risk(const std::vector<Vector>& vertices, const Vector& z) {
  if (vertices.empty()) {
    throw std::invalid_argument("evaluate_risk: empty vertex list");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const Vector& q : vertices) {
    if (q.size() != z.size()) {
      throw std::invalid_argument("evaluate_risk: dimension mismatch");
    }
    best = std::max(best, q.dot(z));
  }
  return best;
}

double evaluate_risk(const RiskEnvelope& env, const Vector& z) {
  if (z.size() != env.dim()) {
    throw std::invalid_argument("evaluate_risk: dimension mismatch");
  }
  return evaluate_risk(env.vertices(), z);
}

double cvar_primal(const Pmf& p, double alpha, const Vector& z) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("cvar_primal: alpha must lie in (0, 1]");
  }
  if (z.size() != p.size()) {
    throw std::invalid_argument("cvar_primal: dimension mismatch");
  }
  // y + E[(z - y)^+]/alpha is piecewise linear in y with breakpoints at the
  // entries of z; scan them all.
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double y = z(i);
    double expect_pos = 0.0;
    for (int j = 0; j < p.size(); ++j) {
      expect_pos += p(j) * std::max(z(j) - y, 0.0);
    }
    best = std::min(best, y + expect_pos / alpha);
  }
  return best;
}

}  // namespace riskmpc
