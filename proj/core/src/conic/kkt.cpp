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

#include "kkt.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/LU>
#include <Eigen/SparseCholesky>

namespace riskmpc::conic {

namespace {

// Shared helper: iterative refinement against the unregularized Newton
// matrix, reusing the engine's factorization. Bounded number of rounds with
// an early exit once the residual is at rounding level; a round that makes
// the residual worse is rolled back.
double inf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

template <typename RawSolve>
void refine_once(const StandardForm& sf, const ConeLayout& layout,
                 const std::vector<BlockScaling>& scalings,
                 const Vector& bx, const Vector& by, const Vector& bz,
                 Vector& x, Vector& y, Vector& z, RawSolve&& raw_solve) {
  constexpr int kMaxRounds = 3;
  const double rhs_scale =
      std::max({1.0, inf_norm(bx), inf_norm(by), inf_norm(bz)});
  Vector best_x = x, best_y = y, best_z = z;
  double best_norm = std::numeric_limits<double>::infinity();
  for (int round = 0; round < kMaxRounds; ++round) {
    Vector rx = bx - sf.a.transpose() * y - sf.g.transpose() * z;
    Vector ry = by - sf.a * x;
    Vector rz = bz - sf.g * x + apply_wtw(layout, scalings, z);
    const double res_norm =
        std::max({inf_norm(rx), inf_norm(ry), inf_norm(rz)});
    if (res_norm >= best_norm) {
      x = best_x;
      y = best_y;
      z = best_z;
      break;
    }
    best_x = x;
    best_y = y;
    best_z = z;
    best_norm = res_norm;
    if (res_norm <= 1e-14 * rhs_scale) {
      break;
    }
    raw_solve(rx, ry, rz);
    x += rx;
    y += ry;
    z += rz;
  }
}

// Dense engine on the full 3x3 system. Factoring the whole matrix (rather
// than a Schur reduction through (W'W)^{-1}) keeps the solve backward
// stable when the scaling degenerates near convergence, which matters for
// the tight tolerances the semidefinite synthesis programs are run at.
class DenseLuKkt final : public KktSolver {
 public:
  DenseLuKkt(const StandardForm& sf, const ConeLayout& layout, double reg)
      : sf_(sf),
        layout_(layout),
        reg_(reg),
        n_(sf.num_vars()),
        p_(sf.num_eq()),
        m_(sf.num_cone_rows()),
        kkt_(Matrix::Zero(n_ + p_ + m_, n_ + p_ + m_)) {
    const Matrix a_dense(sf.a);
    const Matrix g_dense(sf.g);
    kkt_.block(0, n_, n_, p_) = a_dense.transpose();
    kkt_.block(n_, 0, p_, n_) = a_dense;
    kkt_.block(0, n_ + p_, n_, m_) = g_dense.transpose();
    kkt_.block(n_ + p_, 0, m_, n_) = g_dense;
    kkt_.topLeftCorner(n_, n_).diagonal().array() = reg_;
    kkt_.block(n_, n_, p_, p_).diagonal().array() = -reg_;
  }

  bool factor(const std::vector<BlockScaling>& scalings) override {
    scalings_ = scalings;
    for (std::size_t bi = 0; bi < layout_.blocks.size(); ++bi) {
      const int off = n_ + p_ + layout_.offsets[bi];
      const int rows = layout_.blocks[bi].rows();
      kkt_.block(off, off, rows, rows) = -dense_wtw_block(scalings_[bi]);
      kkt_.block(off, off, rows, rows).diagonal().array() -= reg_;
    }
    lu_.compute(kkt_);
    return kkt_.rows() == 0 || lu_.matrixLU().diagonal().cwiseAbs()
                                       .minCoeff() > 0.0;
  }

  void solve(Vector& x, Vector& y, Vector& z) const override {
    const Vector bx = x, by = y, bz = z;
    raw_solve(x, y, z);
    refine_once(sf_, layout_, scalings_, bx, by, bz, x, y, z,
                [this](Vector& rx, Vector& ry, Vector& rz) {
                  raw_solve(rx, ry, rz);
                });
  }

 private:
  void raw_solve(Vector& x, Vector& y, Vector& z) const {
    Vector rhs(n_ + p_ + m_);
    rhs << x, y, z;
    const Vector sol = lu_.solve(rhs);
    x = sol.head(n_);
    y = sol.segment(n_, p_);
    z = sol.tail(m_);
  }

  const StandardForm& sf_;
  const ConeLayout& layout_;
  double reg_;
  int n_, p_, m_;
  Matrix kkt_;
  std::vector<BlockScaling> scalings_;
  Eigen::PartialPivLU<Matrix> lu_;
};

// Sparse quasidefinite engine on the full 3x3 system with +/-d diagonal
// regularization; the sparsity pattern is fixed across iterations, so the
// symbolic analysis happens once.
class SparseLdltKkt final : public KktSolver {
 public:
  SparseLdltKkt(const StandardForm& sf, const ConeLayout& layout, double reg)
      : sf_(sf), layout_(layout), reg_(reg), n_(sf.num_vars()),
        p_(sf.num_eq()), m_(sf.num_cone_rows()) {}

  bool factor(const std::vector<BlockScaling>& scalings) override {
    scalings_ = scalings;
    const int dim = n_ + p_ + m_;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(sf_.a.nonZeros() + sf_.g.nonZeros() + dim + 4 * m_);
    for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, reg_);
    for (int k = 0; k < sf_.a.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(sf_.a, k); it; ++it) {
        trip.emplace_back(n_ + static_cast<int>(it.row()),
                          static_cast<int>(it.col()), it.value());
      }
    }
    for (int i = 0; i < p_; ++i) trip.emplace_back(n_ + i, n_ + i, -reg_);
    for (int k = 0; k < sf_.g.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(sf_.g, k); it; ++it) {
        trip.emplace_back(n_ + p_ + static_cast<int>(it.row()),
                          static_cast<int>(it.col()), it.value());
      }
    }
    for (std::size_t bi = 0; bi < layout_.blocks.size(); ++bi) {
      const int off = n_ + p_ + layout_.offsets[bi];
      const Matrix wtw = dense_wtw_block(scalings_[bi]);
      for (int j = 0; j < wtw.cols(); ++j) {
        for (int i = j; i < wtw.rows(); ++i) {
          double val = -wtw(i, j);
          if (i == j) val -= reg_;
          trip.emplace_back(off + i, off + j, val);
        }
      }
    }
    SparseMatrix kkt(dim, dim);
    kkt.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed_) {
      ldlt_.analyzePattern(kkt);
      analyzed_ = true;
    }
    ldlt_.factorize(kkt);
    return ldlt_.info() == Eigen::Success;
  }

  void solve(Vector& x, Vector& y, Vector& z) const override {
    const Vector bx = x, by = y, bz = z;
    raw_solve(x, y, z);
    refine_once(sf_, layout_, scalings_, bx, by, bz, x, y, z,
                [this](Vector& rx, Vector& ry, Vector& rz) {
                  raw_solve(rx, ry, rz);
                });
  }

 private:
  void raw_solve(Vector& x, Vector& y, Vector& z) const {
    Vector rhs(n_ + p_ + m_);
    rhs << x, y, z;
    const Vector sol = ldlt_.solve(rhs);
    x = sol.head(n_);
    y = sol.segment(n_, p_);
    z = sol.tail(m_);
  }

  const StandardForm& sf_;
  const ConeLayout& layout_;
  double reg_;
  int n_, p_, m_;
  std::vector<BlockScaling> scalings_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt_;
  bool analyzed_ = false;
};

}  // namespace

std::unique_ptr<KktSolver> make_kkt_solver(const StandardForm& sf,
                                           const ConeLayout& layout,
                                           double regularization) {
  const bool has_psd =
      std::any_of(sf.cones.begin(), sf.cones.end(), [](const ConeBlock& b) {
        return b.kind == ConeKind::kPsd;
      });
  if (has_psd) {
    return std::make_unique<DenseLuKkt>(sf, layout, regularization);
  }
  return std::make_unique<SparseLdltKkt>(sf, layout, regularization);
}

}  // namespace riskmpc::conic
