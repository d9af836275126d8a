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

#include <utility>
#include <vector>

#include "riskmpc/common.hpp"

namespace riskmpc::conic {

// Handle to a scalar decision variable of a ConicProgram.
struct Var {
  int index = -1;
};

// Sparse affine expression c + sum(coef_i * x_i). Terms are appended as-is
// and merged on demand; expressions stay small in practice.
class LinExpr {
 public:
  LinExpr() = default;
  LinExpr(double constant) : constant_(constant) {}  // NOLINT(runtime/explicit)
  LinExpr(Var v) { terms_.emplace_back(v.index, 1.0); }  // NOLINT

  double constant() const { return constant_; }
  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  bool is_constant() const;

  LinExpr& operator+=(const LinExpr& rhs);
  LinExpr& operator-=(const LinExpr& rhs);
  LinExpr& operator*=(double a);

  // Merges duplicate variable terms and drops zero coefficients.
  LinExpr compressed(double drop_tol = 0.0) const;

 private:
  double constant_ = 0.0;
  std::vector<std::pair<int, double>> terms_;
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a);
LinExpr operator*(double a, LinExpr e);
LinExpr operator*(LinExpr e, double a);

// Rectangular grid of scalar variables, column-major over a contiguous
// index range.
struct RectMatrixVar {
  int rows = 0;
  int cols = 0;
  int offset = -1;
  Var operator()(int i, int j) const { return Var{offset + j * rows + i}; }
};

// Symmetric matrix variable: one scalar per lower-triangle entry, shared
// across the two mirrored positions.
struct SymMatrixVar {
  int n = 0;
  int offset = -1;
  Var operator()(int i, int j) const;
};

// Dense matrix of affine expressions; the assembly currency for linear
// matrix inequalities.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    entries_.resize(static_cast<std::size_t>(rows) * cols);
  }

  static AffineMatrix constant(const Matrix& m);
  static AffineMatrix of(const RectMatrixVar& v);
  static AffineMatrix of(const SymMatrixVar& v);
  static AffineMatrix zero(int rows, int cols) {
    return AffineMatrix(rows, cols);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  LinExpr& operator()(int i, int j) { return entries_[at(i, j)]; }
  const LinExpr& operator()(int i, int j) const { return entries_[at(i, j)]; }

  AffineMatrix transpose() const;
  void set_block(int i0, int j0, const AffineMatrix& block);
  void set_block(int i0, int j0, const Matrix& block);
  void add_in_place(const AffineMatrix& other, double scale = 1.0);

 private:
  std::size_t at(int i, int j) const;

  int rows_ = 0;
  int cols_ = 0;
  std::vector<LinExpr> entries_;
};

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a);
AffineMatrix operator*(double a, AffineMatrix m);
// Constant-times-affine and affine-times-constant matrix products.
AffineMatrix operator*(const Matrix& c, const AffineMatrix& x);
AffineMatrix operator*(const AffineMatrix& x, const Matrix& c);

// Evaluation at a solved variable vector.
double value_at(const LinExpr& e, const Vector& x);
Matrix value_at(const RectMatrixVar& v, const Vector& x);
Matrix value_at(const SymMatrixVar& v, const Vector& x);

}  // namespace riskmpc::conic
