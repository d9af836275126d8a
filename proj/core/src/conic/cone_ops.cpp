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

#include "riskmpc/conic/cone_ops.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace riskmpc::conic {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// J u = (u0, -u1) for second-order blocks.
Vector reflect(const Vector& u) {
  Vector out = -u;
  out(0) = u(0);
  return out;
}

Vector diagonal_of_svec(const Vector& lam, int n) {
  Vector d(n);
  int base = 0;
  for (int j = 0; j < n; ++j) {
    d(j) = lam(base);
    base += n - j;
  }
  return d;
}

}  // namespace

int ConeBlock::rows() const {
  switch (kind) {
    case ConeKind::kNonneg:
    case ConeKind::kSoc:
      return size;
    case ConeKind::kPsd:
      return svec_length(size);
  }
  return 0;
}

ConeLayout make_layout(const std::vector<ConeBlock>& blocks) {
  ConeLayout layout;
  layout.blocks = blocks;
  layout.offsets.resize(blocks.size() + 1);
  layout.offsets[0] = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ConeBlock& b = blocks[i];
    if (b.size <= 0) throw std::invalid_argument("ConeBlock: empty block");
    if (b.kind == ConeKind::kSoc && b.size < 2) {
      throw std::invalid_argument("ConeBlock: soc blocks need dimension >= 2");
    }
    layout.offsets[i + 1] = layout.offsets[i] + b.rows();
    switch (b.kind) {
      case ConeKind::kNonneg:
        layout.degree += b.size;
        break;
      case ConeKind::kSoc:
        layout.degree += 1;
        break;
      case ConeKind::kPsd:
        layout.degree += b.size;
        break;
    }
  }
  layout.total_rows = layout.offsets.back();
  return layout;
}

int svec_length(int n) { return n * (n + 1) / 2; }

Vector svec(const Matrix& x) {
  const int n = static_cast<int>(x.rows());
  Vector out(svec_length(n));
  int k = 0;
  for (int j = 0; j < n; ++j) {
    out(k++) = x(j, j);
    for (int i = j + 1; i < n; ++i) out(k++) = kSqrt2 * x(i, j);
  }
  return out;
}

Matrix smat(const Vector& v, int n) {
  Matrix out(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    out(j, j) = v(k++);
    for (int i = j + 1; i < n; ++i) {
      out(i, j) = v(k) / kSqrt2;
      out(j, i) = out(i, j);
      ++k;
    }
  }
  return out;
}

std::vector<BlockScaling> compute_scalings(const ConeLayout& layout,
                                           const Vector& s, const Vector& z) {
  std::vector<BlockScaling> scalings(layout.blocks.size());
  for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
    const ConeBlock& blk = layout.blocks[bi];
    const int off = layout.offsets[bi];
    BlockScaling& sc = scalings[bi];
    sc.kind = blk.kind;
    sc.size = blk.size;
    switch (blk.kind) {
      case ConeKind::kNonneg: {
        const auto sb = s.segment(off, blk.size);
        const auto zb = z.segment(off, blk.size);
        if (sb.minCoeff() <= 0.0 || zb.minCoeff() <= 0.0) {
          throw SolverFailureError("scaling: nonneg iterate left the cone");
        }
        sc.d = (sb.array() / zb.array()).sqrt();
        sc.lambda = (sb.array() * zb.array()).sqrt();
        break;
      }
      case ConeKind::kSoc: {
        const Vector sb = s.segment(off, blk.size);
        const Vector zb = z.segment(off, blk.size);
        const double a2 = sb(0) * sb(0) - sb.tail(blk.size - 1).squaredNorm();
        const double b2 = zb(0) * zb(0) - zb.tail(blk.size - 1).squaredNorm();
        if (a2 <= 0.0 || b2 <= 0.0 || sb(0) <= 0.0 || zb(0) <= 0.0) {
          throw SolverFailureError("scaling: soc iterate left the cone");
        }
        const double a = std::sqrt(a2);
        const double b = std::sqrt(b2);
        sc.beta = std::sqrt(a / b);
        const Vector sbar = sb / a;
        const Vector zbar = zb / b;
        const double c = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
        Vector vk = (sbar + reflect(zbar)) / (2.0 * c);
        Vector v = vk;
        v(0) += 1.0;
        v /= std::sqrt(2.0 * (vk(0) + 1.0));
        sc.v = std::move(v);
        const double gm = std::sqrt(a * b);
        Vector lam(blk.size);
        lam(0) = c * gm;
        const double denom = 2.0 * c + sbar(0) + zbar(0);
        lam.tail(blk.size - 1) =
            gm *
            ((c + zbar(0)) * sbar.tail(blk.size - 1) +
             (c + sbar(0)) * zbar.tail(blk.size - 1)) /
            denom;
        sc.lambda = std::move(lam);
        break;
      }
      case ConeKind::kPsd: {
        const int n = blk.size;
        const Matrix sm = smat(s.segment(off, blk.rows()), n);
        const Matrix zm = smat(z.segment(off, blk.rows()), n);
        Eigen::LLT<Matrix> chol_s(sm);
        Eigen::LLT<Matrix> chol_z(zm);
        if (chol_s.info() != Eigen::Success ||
            chol_z.info() != Eigen::Success) {
          throw SolverFailureError("scaling: psd iterate left the cone");
        }
        const Matrix ls = chol_s.matrixL();
        const Matrix lz = chol_z.matrixL();
        Eigen::JacobiSVD<Matrix> svd(lz.transpose() * ls,
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vector sing = svd.singularValues();
        if (sing.minCoeff() <= 0.0) {
          throw SolverFailureError("scaling: degenerate psd scaling");
        }
        const Vector sqrt_sing = sing.cwiseSqrt();
        // r = Lz^{-T} U Lam^{1/2}; rti = Lz U Lam^{-1/2}; then
        // r' Z r = W^{-T}(S) applied via rti = Lam.
        const Matrix u = svd.matrixU();
        sc.r = lz.transpose()
                   .triangularView<Eigen::Upper>()
                   .solve(u * sqrt_sing.asDiagonal());
        sc.rti = lz * (u * sqrt_sing.cwiseInverse().asDiagonal());
        Matrix lam = Matrix::Zero(n, n);
        lam.diagonal() = sing;
        sc.lambda = svec(lam);
        break;
      }
    }
  }
  return scalings;
}

std::vector<BlockScaling> identity_scalings(const ConeLayout& layout) {
  std::vector<BlockScaling> scalings(layout.blocks.size());
  for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
    const ConeBlock& blk = layout.blocks[bi];
    BlockScaling& sc = scalings[bi];
    sc.kind = blk.kind;
    sc.size = blk.size;
    switch (blk.kind) {
      case ConeKind::kNonneg:
        sc.d = Vector::Ones(blk.size);
        sc.lambda = Vector::Ones(blk.size);
        break;
      case ConeKind::kSoc:
        sc.beta = 1.0;
        sc.v = Vector::Zero(blk.size);
        sc.v(0) = 1.0;  // 2 v v' - J = I
        sc.lambda = Vector::Zero(blk.size);
        sc.lambda(0) = 1.0;
        break;
      case ConeKind::kPsd:
        sc.r = Matrix::Identity(blk.size, blk.size);
        sc.rti = Matrix::Identity(blk.size, blk.size);
        sc.lambda = svec(Matrix::Identity(blk.size, blk.size));
        break;
    }
  }
  return scalings;
}

namespace {

template <typename PerBlock>
Vector map_blocks(const ConeLayout& layout,
                  const std::vector<BlockScaling>& scal, const Vector& x,
                  PerBlock&& per_block) {
  Vector out(layout.total_rows);
  for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
    const int off = layout.offsets[bi];
    const int rows = layout.blocks[bi].rows();
    out.segment(off, rows) =
        per_block(scal[bi], Vector(x.segment(off, rows)));
  }
  return out;
}

Vector soc_householder(const Vector& v, double scale, const Vector& x) {
  // scale * (2 v (v'x) - J x)
  Vector out = -reflect(x);
  out += 2.0 * v.dot(x) * v;
  return scale * out;
}

Vector block_w(const BlockScaling& sc, const Vector& x) {
  switch (sc.kind) {
    case ConeKind::kNonneg:
      return sc.d.cwiseProduct(x);
    case ConeKind::kSoc:
      return soc_householder(sc.v, sc.beta, x);
    case ConeKind::kPsd:
      return svec(sc.r.transpose() * smat(x, sc.size) * sc.r);
  }
  return x;
}

Vector block_wt(const BlockScaling& sc, const Vector& x) {
  switch (sc.kind) {
    case ConeKind::kNonneg:
      return sc.d.cwiseProduct(x);
    case ConeKind::kSoc:
      return soc_householder(sc.v, sc.beta, x);  // symmetric
    case ConeKind::kPsd:
      return svec(sc.r * smat(x, sc.size) * sc.r.transpose());
  }
  return x;
}

Vector block_wit(const BlockScaling& sc, const Vector& x) {
  switch (sc.kind) {
    case ConeKind::kNonneg:
      return x.cwiseQuotient(sc.d);
    case ConeKind::kSoc:
      return soc_householder(reflect(sc.v), 1.0 / sc.beta, x);
    case ConeKind::kPsd:
      return svec(sc.rti.transpose() * smat(x, sc.size) * sc.rti);
  }
  return x;
}

Vector block_wtw(const BlockScaling& sc, const Vector& x) {
  switch (sc.kind) {
    case ConeKind::kNonneg:
      return sc.d.array().square().matrix().cwiseProduct(x);
    case ConeKind::kSoc:
      return soc_householder(sc.v, sc.beta,
                             soc_householder(sc.v, sc.beta, x));
    case ConeKind::kPsd: {
      const Matrix hw = sc.r * sc.r.transpose();
      return svec(hw * smat(x, sc.size) * hw);
    }
  }
  return x;
}

Vector block_wtw_inverse(const BlockScaling& sc, const Vector& x) {
  switch (sc.kind) {
    case ConeKind::kNonneg:
      return x.cwiseQuotient(sc.d.array().square().matrix());
    case ConeKind::kSoc: {
      const Vector jv = reflect(sc.v);
      return soc_householder(jv, 1.0 / sc.beta,
                             soc_householder(jv, 1.0 / sc.beta, x));
    }
    case ConeKind::kPsd: {
      const Matrix hwi = sc.rti * sc.rti.transpose();
      return svec(hwi * smat(x, sc.size) * hwi);
    }
  }
  return x;
}

}  // namespace

Vector apply_w(const ConeLayout& layout, const std::vector<BlockScaling>& scal,
               const Vector& x) {
  return map_blocks(layout, scal, x, block_w);
}

Vector apply_w_transpose(const ConeLayout& layout,
                         const std::vector<BlockScaling>& scal,
                         const Vector& x) {
  return map_blocks(layout, scal, x, block_wt);
}

Vector apply_w_inverse_transpose(const ConeLayout& layout,
                                 const std::vector<BlockScaling>& scal,
                                 const Vector& x) {
  return map_blocks(layout, scal, x, block_wit);
}

Vector apply_wtw(const ConeLayout& layout,
                 const std::vector<BlockScaling>& scal, const Vector& x) {
  return map_blocks(layout, scal, x, block_wtw);
}

Vector apply_wtw_inverse(const ConeLayout& layout,
                         const std::vector<BlockScaling>& scal,
                         const Vector& x) {
  return map_blocks(layout, scal, x, block_wtw_inverse);
}

Matrix dense_wtw_block(const BlockScaling& sc) {
  switch (sc.kind) {
    case ConeKind::kNonneg:
      return sc.d.array().square().matrix().asDiagonal();
    case ConeKind::kSoc: {
      const int n = static_cast<int>(sc.v.size());
      Matrix j = -Matrix::Identity(n, n);
      j(0, 0) = 1.0;
      const Matrix w =
          sc.beta * (2.0 * sc.v * sc.v.transpose() - j);
      return w * w;
    }
    case ConeKind::kPsd: {
      // Not needed by the sparse engine; assemble via columns if ever used.
      const int len = svec_length(sc.size);
      Matrix out(len, len);
      const Matrix hw = sc.r * sc.r.transpose();
      for (int k = 0; k < len; ++k) {
        Vector e = Vector::Zero(len);
        e(k) = 1.0;
        out.col(k) = svec(hw * smat(e, sc.size) * hw);
      }
      return out;
    }
  }
  return Matrix();
}

Vector cone_identity(const ConeLayout& layout) {
  Vector e = Vector::Zero(layout.total_rows);
  add_identity_multiple(layout, e, 1.0);
  return e;
}

Vector jordan_product(const ConeLayout& layout, const Vector& a,
                      const Vector& b) {
  Vector out(layout.total_rows);
  for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
    const ConeBlock& blk = layout.blocks[bi];
    const int off = layout.offsets[bi];
    const int rows = blk.rows();
    const auto ab = a.segment(off, rows);
    const auto bb = b.segment(off, rows);
    switch (blk.kind) {
      case ConeKind::kNonneg:
        out.segment(off, rows) = ab.cwiseProduct(bb);
        break;
      case ConeKind::kSoc: {
        out(off) = ab.dot(bb);
        out.segment(off + 1, rows - 1) =
            ab(0) * bb.tail(rows - 1) + bb(0) * ab.tail(rows - 1);
        break;
      }
      case ConeKind::kPsd: {
        const Matrix am = smat(ab, blk.size);
        const Matrix bm = smat(bb, blk.size);
        out.segment(off, rows) = svec(0.5 * (am * bm + bm * am));
        break;
      }
    }
  }
  return out;
}

Vector jordan_solve(const ConeLayout& layout, const Vector& lambda,
                    const Vector& v) {
  Vector out(layout.total_rows);
  for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
    const ConeBlock& blk = layout.blocks[bi];
    const int off = layout.offsets[bi];
    const int rows = blk.rows();
    const auto lam = lambda.segment(off, rows);
    const auto vb = v.segment(off, rows);
    switch (blk.kind) {
      case ConeKind::kNonneg:
        out.segment(off, rows) = vb.cwiseQuotient(lam);
        break;
      case ConeKind::kSoc: {
        const auto lam1 = lam.tail(rows - 1);
        const double det = lam(0) * lam(0) - lam1.squaredNorm();
        const double g0 = (lam(0) * vb(0) - lam1.dot(vb.tail(rows - 1))) / det;
        out(off) = g0;
        out.segment(off + 1, rows - 1) =
            (vb.tail(rows - 1) - g0 * lam1) / lam(0);
        break;
      }
      case ConeKind::kPsd: {
        // The scaled point is diagonal, so the Sylvester solve is entrywise.
        const Vector diag = diagonal_of_svec(lam, blk.size);
        const Matrix vm = smat(vb, blk.size);
        Matrix gm(blk.size, blk.size);
        for (int j = 0; j < blk.size; ++j) {
          for (int i = 0; i < blk.size; ++i) {
            gm(i, j) = 2.0 * vm(i, j) / (diag(i) + diag(j));
          }
        }
        out.segment(off, rows) = svec(gm);
        break;
      }
    }
  }
  return out;
}

double max_step(const ConeLayout& layout, const Vector& lambda,
                const Vector& d) {
  double t = -std::numeric_limits<double>::infinity();
  for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
    const ConeBlock& blk = layout.blocks[bi];
    const int off = layout.offsets[bi];
    const int rows = blk.rows();
    const auto lam = lambda.segment(off, rows);
    const auto db = d.segment(off, rows);
    switch (blk.kind) {
      case ConeKind::kNonneg:
        t = std::max(t, (-db.array() / lam.array()).maxCoeff());
        break;
      case ConeKind::kSoc: {
        const auto lam1 = lam.tail(rows - 1);
        const auto d1 = db.tail(rows - 1);
        const double cc = lam(0) * lam(0) - lam1.squaredNorm();
        const double bb = 2.0 * (lam(0) * db(0) - lam1.dot(d1));
        const double aa = db(0) * db(0) - d1.squaredNorm();
        const double disc = bb * bb - 4.0 * cc * aa;
        if (disc >= 0.0) {
          t = std::max(t, (-bb + std::sqrt(disc)) / (2.0 * cc));
        }
        break;
      }
      case ConeKind::kPsd: {
        const Vector diag = diagonal_of_svec(lam, blk.size);
        const Vector inv_sqrt = diag.cwiseSqrt().cwiseInverse();
        const Matrix dm = smat(db, blk.size);
        const Matrix m =
            inv_sqrt.asDiagonal() * dm * inv_sqrt.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Matrix> eig(m,
                                                  Eigen::EigenvaluesOnly);
        t = std::max(t, -eig.eigenvalues().minCoeff());
        break;
      }
    }
  }
  return t;
}

double max_step_to_cone(const ConeLayout& layout, const Vector& u) {
  double t = -std::numeric_limits<double>::infinity();
  for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
    const ConeBlock& blk = layout.blocks[bi];
    const int off = layout.offsets[bi];
    const int rows = blk.rows();
    const auto ub = u.segment(off, rows);
    switch (blk.kind) {
      case ConeKind::kNonneg:
        t = std::max(t, -ub.minCoeff());
        break;
      case ConeKind::kSoc:
        t = std::max(t, ub.tail(rows - 1).norm() - ub(0));
        break;
      case ConeKind::kPsd: {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(smat(ub, blk.size),
                                                  Eigen::EigenvaluesOnly);
        t = std::max(t, -eig.eigenvalues().minCoeff());
        break;
      }
    }
  }
  return t;
}

void add_identity_multiple(const ConeLayout& layout, Vector& u, double a) {
  for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
    const ConeBlock& blk = layout.blocks[bi];
    const int off = layout.offsets[bi];
    switch (blk.kind) {
      case ConeKind::kNonneg:
        u.segment(off, blk.size).array() += a;
        break;
      case ConeKind::kSoc:
        u(off) += a;
        break;
      case ConeKind::kPsd: {
        int base = off;
        for (int j = 0; j < blk.size; ++j) {
          u(base) += a;
          base += blk.size - j;
        }
        break;
      }
    }
  }
}

double cone_margin(const ConeLayout& layout, const Vector& u) {
  if (layout.blocks.empty()) return std::numeric_limits<double>::infinity();
  return -max_step_to_cone(layout, u);
}

}  // namespace riskmpc::conic
