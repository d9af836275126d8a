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
#include <mutex>
#include <vector>

#include "riskmpc/pmf.hpp"

namespace riskmpc {

// Options for exact vertex enumeration of an envelope polytope.
struct VertexEnumOptions {
  int max_dim = 12;        // refuse problems above this dimension
  double feas_tol = 1e-9;  // constraint satisfaction tolerance
  double dedup_tol = 1e-9; // infinity-norm tolerance for duplicate vertices
};

// Polytopic set of pmfs on {0, ..., L-1}:
//
//     { q : q >= 0, sum(q) = 1, Si*q <= ti, Se*q = te }.
//
// The simplex constraints are implicit; Si/ti and Se/te are extra halfspace
// and equality data (either may be empty). The nominal pmf must be a member
// (checked at construction). Instances are immutable; the vertex list is
// enumerated on first use and cached, and concurrent reads are safe.
class RiskEnvelope {
 public:
  RiskEnvelope(Pmf nominal, Matrix ineq_lhs, Vector ineq_rhs, Matrix eq_lhs,
               Vector eq_rhs, VertexEnumOptions opts = {});

  int dim() const { return nominal_.size(); }
  const Pmf& nominal() const { return nominal_; }
  const Matrix& ineq_lhs() const { return si_; }
  const Vector& ineq_rhs() const { return ti_; }
  const Matrix& eq_lhs() const { return se_; }
  const Vector& eq_rhs() const { return te_; }

  // Exact vertex list of the polytope (combinatorial active-set enumeration,
  // deduplicated). Computed once, then cached; throws std::invalid_argument
  // if dim() exceeds the enumeration cap.
  const std::vector<Vector>& vertices() const;

 private:
  Pmf nominal_;
  Matrix si_, se_;
  Vector ti_, te_;
  VertexEnumOptions opts_;

  struct VertexCache {
    std::once_flag once;
    std::vector<Vector> verts;
  };
  std::shared_ptr<VertexCache> cache_ = std::make_shared<VertexCache>();
};

// CVaR envelope at level alpha in (0, 1]:
//
//     { q : 0 <= q(j) <= p(j)/alpha, sum(q) = 1 }.
//
// alpha = 1 collapses to the singleton {p}; alpha <= min_j p(j) yields the
// full simplex (worst case).
RiskEnvelope cvar_envelope(const Pmf& p, double alpha);

// Singleton envelope {p}: risk evaluation reduces to the expectation.
RiskEnvelope expectation_envelope(const Pmf& p);

// Exact vertex enumeration of { q : q >= 0, 1'q = 1, Si*q <= ti, Se*q = te }.
// All rank-completing active sets are solved and feasibility-filtered.
std::vector<Vector> enumerate_vertices(int dim, const Matrix& ineq_lhs,
                                       const Vector& ineq_rhs,
                                       const Matrix& eq_lhs,
                                       const Vector& eq_rhs,
                                       const VertexEnumOptions& opts = {});

// max_q q'z over the envelope (attained at a vertex).
double evaluate_risk(const RiskEnvelope& env, const Vector& z);
double evaluate_risk(const std::vector<Vector>& vertices, const Vector& z);

// Primal CVaR value inf_y { y + E[(z - y)^+] / alpha }; the infimum is
// attained at an entry of z. Independent of the envelope machinery (used to
// cross-check the dual/vertex route).
double cvar_primal(const Pmf& p, double alpha, const Vector& z);

}  // namespace riskmpc
