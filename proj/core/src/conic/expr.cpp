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

#include "riskmpc/conic/expr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskmpc::conic {

bool LinExpr::is_constant() const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [](const auto& t) { return t.second == 0.0; });
}

LinExpr& LinExpr::operator+=(const LinExpr& rhs) {
  constant_ += rhs.constant_;
  terms_.insert(terms_.end(), rhs.terms_.begin(), rhs.terms_.end());
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& rhs) {
  constant_ -= rhs.constant_;
  terms_.reserve(terms_.size() + rhs.terms_.size());
  for (const auto& [idx, coef] : rhs.terms_) terms_.emplace_back(idx, -coef);
  return *this;
}

LinExpr& LinExpr::operator*=(double a) {
  constant_ *= a;
  for (auto& [idx, coef] : terms_) coef *= a;
  return *this;
}

LinExpr LinExpr::compressed(double drop_tol) const {
  LinExpr out;
  out.constant_ = constant_;
  if (terms_.empty()) return out;
  std::vector<std::pair<int, double>> sorted = terms_;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [idx, coef] : sorted) {
    if (!out.terms_.empty() && out.terms_.back().first == idx) {
      out.terms_.back().second += coef;
    } else {
      out.terms_.emplace_back(idx, coef);
    }
  }
  std::erase_if(out.terms_, [drop_tol](const auto& t) {
    return std::abs(t.second) <= drop_tol;
  });
  return out;
}

LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
LinExpr operator-(LinExpr a) { return a *= -1.0; }
LinExpr operator*(double a, LinExpr e) { return e *= a; }
LinExpr operator*(LinExpr e, double a) { return e *= a; }

Var SymMatrixVar::operator()(int i, int j) const {
  const int r = std::max(i, j);
  const int c = std::min(i, j);
  // Lower triangle, column-major: entries of column c start after the
  // c leading columns, which hold n + (n-1) + ... + (n-c+1) scalars.
  const int col_base = c * n - c * (c - 1) / 2;
  return Var{offset + col_base + (r - c)};
}

std::size_t AffineMatrix::at(int i, int j) const {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_) {
    throw std::out_of_range("AffineMatrix: index out of range");
  }
  return static_cast<std::size_t>(j) * rows_ + i;
}

AffineMatrix AffineMatrix::constant(const Matrix& m) {
  AffineMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int j = 0; j < out.cols_; ++j) {
    for (int i = 0; i < out.rows_; ++i) out(i, j) = LinExpr(m(i, j));
  }
  return out;
}

AffineMatrix AffineMatrix::of(const RectMatrixVar& v) {
  AffineMatrix out(v.rows, v.cols);
  for (int j = 0; j < v.cols; ++j) {
    for (int i = 0; i < v.rows; ++i) out(i, j) = LinExpr(v(i, j));
  }
  return out;
}

AffineMatrix AffineMatrix::of(const SymMatrixVar& v) {
  AffineMatrix out(v.n, v.n);
  for (int j = 0; j < v.n; ++j) {
    for (int i = 0; i < v.n; ++i) out(i, j) = LinExpr(v(i, j));
  }
  return out;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix out(cols_, rows_);
  for (int j = 0; j < cols_; ++j) {
    for (int i = 0; i < rows_; ++i) out(j, i) = (*this)(i, j);
  }
  return out;
}

void AffineMatrix::set_block(int i0, int j0, const AffineMatrix& block) {
  for (int j = 0; j < block.cols(); ++j) {
    for (int i = 0; i < block.rows(); ++i) {
      (*this)(i0 + i, j0 + j) = block(i, j);
    }
  }
}

void AffineMatrix::set_block(int i0, int j0, const Matrix& block) {
  for (int j = 0; j < block.cols(); ++j) {
    for (int i = 0; i < block.rows(); ++i) {
      (*this)(i0 + i, j0 + j) = LinExpr(block(i, j));
    }
  }
}

void AffineMatrix::add_in_place(const AffineMatrix& other, double scale) {
  if (other.rows() != rows_ || other.cols() != cols_) {
    throw std::invalid_argument("AffineMatrix: shape mismatch in add");
  }
  for (int j = 0; j < cols_; ++j) {
    for (int i = 0; i < rows_; ++i) {
      (*this)(i, j) += scale * other(i, j);
    }
  }
}

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) {
  a.add_in_place(b, 1.0);
  return a;
}

AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) {
  a.add_in_place(b, -1.0);
  return a;
}

AffineMatrix operator-(AffineMatrix a) { return -1.0 * std::move(a); }

AffineMatrix operator*(double a, AffineMatrix m) {
  for (int j = 0; j < m.cols(); ++j) {
    for (int i = 0; i < m.rows(); ++i) m(i, j) *= a;
  }
  return m;
}

AffineMatrix operator*(const Matrix& c, const AffineMatrix& x) {
  if (c.cols() != x.rows()) {
    throw std::invalid_argument("AffineMatrix: product shape mismatch");
  }
  AffineMatrix out(static_cast<int>(c.rows()), x.cols());
  for (int j = 0; j < out.cols(); ++j) {
    for (int i = 0; i < out.rows(); ++i) {
      LinExpr acc;
      for (int k = 0; k < x.rows(); ++k) {
        if (c(i, k) != 0.0) acc += c(i, k) * x(k, j);
      }
      out(i, j) = std::move(acc);
    }
  }
  return out;
}

AffineMatrix operator*(const AffineMatrix& x, const Matrix& c) {
  if (x.cols() != c.rows()) {
    throw std::invalid_argument("AffineMatrix: product shape mismatch");
  }
  AffineMatrix out(x.rows(), static_cast<int>(c.cols()));
  for (int j = 0; j < out.cols(); ++j) {
    for (int i = 0; i < out.rows(); ++i) {
      LinExpr acc;
      for (int k = 0; k < x.cols(); ++k) {
        if (c(k, j) != 0.0) acc += x(i, k) * c(k, j);
      }
      out(i, j) = std::move(acc);
    }
  }
  return out;
}

double value_at(const LinExpr& e, const Vector& x) {
  double v = e.constant();
  for (const auto& [idx, coef] : e.terms()) {
    v += coef * x(idx);
  }
  return v;
}

Matrix value_at(const RectMatrixVar& v, const Vector& x) {
  Matrix m(v.rows, v.cols);
  for (int j = 0; j < v.cols; ++j) {
    for (int i = 0; i < v.rows; ++i) {
      m(i, j) = x(v(i, j).index);
    }
  }
  return m;
}

Matrix value_at(const SymMatrixVar& v, const Vector& x) {
  Matrix m(v.n, v.n);
  for (int j = 0; j < v.n; ++j) {
    for (int i = 0; i < v.n; ++i) {
      m(i, j) = x(v(i, j).index);
    }
  }
  return m;
}

}  // namespace riskmpc::conic
