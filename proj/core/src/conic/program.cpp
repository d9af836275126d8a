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

#include "riskmpc/conic/program.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace riskmpc::conic {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

}  // namespace

nlohmann::json StandardForm::debug_json(bool include_data) const {
  nlohmann::json out;
  out["num_vars"] = num_vars();
  out["num_eq"] = num_eq();
  out["num_cone_rows"] = num_cone_rows();
  out["objective_offset"] = objective_offset;
  nlohmann::json cone_list = nlohmann::json::array();
  for (const ConeBlock& blk : cones) {
    const char* kind = blk.kind == ConeKind::kNonneg  ? "nonneg"
                       : blk.kind == ConeKind::kSoc   ? "soc"
                                                      : "psd";
    cone_list.push_back({{"kind", kind}, {"size", blk.size}});
  }
  out["cones"] = std::move(cone_list);
  out["nnz_a"] = a.nonZeros();
  out["nnz_g"] = g.nonZeros();
  if (include_data) {
    out["c"] = std::vector<double>(c.data(), c.data() + c.size());
    out["b"] = std::vector<double>(b.data(), b.data() + b.size());
    out["h"] = std::vector<double>(h.data(), h.data() + h.size());
    auto dump_sparse = [](const SparseMatrix& m) {
      nlohmann::json triplets = nlohmann::json::array();
      for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
          triplets.push_back({it.row(), it.col(), it.value()});
        }
      }
      return triplets;
    };
    out["a_triplets"] = dump_sparse(a);
    out["g_triplets"] = dump_sparse(g);
    out["var_names"] = var_names;
  }
  return out;
}

Var ConicProgram::add_scalar(const std::string& name) {
  names_.push_back(name.empty() ? "x" + std::to_string(next_var_) : name);
  return Var{next_var_++};
}

RectMatrixVar ConicProgram::add_rect(int rows, int cols,
                                     const std::string& name) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("ConicProgram: empty matrix variable");
  }
  RectMatrixVar v{rows, cols, next_var_};
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      add_scalar(name + "[" + std::to_string(i) + "," + std::to_string(j) +
                 "]");
    }
  }
  return v;
}

SymMatrixVar ConicProgram::add_symmetric(int n, const std::string& name) {
  if (n <= 0) {
    throw std::invalid_argument("ConicProgram: empty matrix variable");
  }
  SymMatrixVar v{n, next_var_};
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      add_scalar(name + "[" + std::to_string(i) + "," + std::to_string(j) +
                 "]");
    }
  }
  return v;
}

void ConicProgram::minimize(const LinExpr& objective) {
  const LinExpr c = objective.compressed();
  objective_offset_ += c.constant();
  for (const auto& term : c.terms()) objective_.push_back(term);
}

void ConicProgram::add_equality(const LinExpr& expr) {
  equalities_.push_back(expr);
}

void ConicProgram::add_nonneg(const LinExpr& expr) { nonneg_.push_back(expr); }

void ConicProgram::add_soc(std::vector<LinExpr> entries) {
  if (entries.size() < 2) {
    throw std::invalid_argument("ConicProgram: soc needs >= 2 entries");
  }
  soc_blocks_.push_back(std::move(entries));
}

void ConicProgram::add_psd(const AffineMatrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument("ConicProgram: psd block must be square");
  }
  // Structural symmetry check on compressed entries.
  for (int j = 0; j < m.cols(); ++j) {
    for (int i = j + 1; i < m.rows(); ++i) {
      const LinExpr diff = (m(i, j) - m(j, i)).compressed(1e-12);
      if (std::abs(diff.constant()) > 1e-12 || !diff.terms().empty()) {
        throw std::invalid_argument("ConicProgram: psd block not symmetric");
      }
    }
  }
  psd_blocks_.push_back(m);
}

void ConicProgram::add_quadratic_leq(const std::vector<LinExpr>& w,
                                     const LinExpr& bound) {
  // sum w_i^2 <= u  <=>  (u + 1/2)^2 >= (u - 1/2)^2 + 2 sum w_i^2.
  std::vector<LinExpr> entries;
  entries.reserve(w.size() + 2);
  entries.push_back(bound + 0.5);
  entries.push_back(bound - 0.5);
  for (const LinExpr& wi : w) entries.push_back(kSqrt2 * wi);
  add_soc(std::move(entries));
}

Var ConicProgram::add_detroot_epigraph(const SymMatrixVar& w) {
  const int n = w.n;
  const Var t = add_scalar("detroot_t");
  if (n == 1) {
    add_nonneg(LinExpr(w(0, 0)) - t);
    add_nonneg(LinExpr(w(0, 0)));
    add_nonneg(LinExpr(t));
    return t;
  }

  // Lower-triangular factor block: [[W, Z], [Z', diag(Z)]] >= 0 certifies
  // det(W) >= prod(diag(Z)) with diag(Z) >= 0.
  const SymMatrixVar zfac = add_symmetric(n, "detroot_z");
  AffineMatrix big(2 * n, 2 * n);
  big.set_block(0, 0, AffineMatrix::of(w));
  AffineMatrix zl(n, n);  // lower triangle of zfac; zero above the diagonal
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) zl(i, j) = LinExpr(zfac(i, j));
  }
  big.set_block(0, n, zl.transpose());
  big.set_block(n, 0, zl);
  AffineMatrix diag(n, n);
  for (int i = 0; i < n; ++i) diag(i, i) = LinExpr(zfac(i, i));
  big.set_block(n, n, diag);
  add_psd(big);

  // Geometric-mean tower over diag(Z), padded with t to a power of two:
  // t <= (prod diag * t^(M - n))^(1/M) collapses to t^n <= prod diag.
  std::vector<LinExpr> level;
  for (int i = 0; i < n; ++i) level.emplace_back(zfac(i, i));
  std::size_t mpad = 1;
  while (mpad < level.size()) mpad *= 2;
  while (level.size() < mpad) level.emplace_back(t);

  int tier = 0;
  while (level.size() > 1) {
    std::vector<LinExpr> next;
    for (std::size_t k = 0; k + 1 < level.size(); k += 2) {
      const Var u = add_scalar("geomean_t" + std::to_string(tier) + "_" +
                               std::to_string(k / 2));
      // u^2 <= a b.
      add_soc({0.5 * (level[k] + level[k + 1]),
               0.5 * (level[k] - level[k + 1]), LinExpr(u)});
      add_nonneg(LinExpr(u));
      next.emplace_back(u);
    }
    level = std::move(next);
    ++tier;
  }
  add_nonneg(level[0] - t);
  add_nonneg(LinExpr(t));
  return t;
}

StandardForm ConicProgram::build() const {
  StandardForm sf;
  const int n = next_var_;
  sf.var_names = names_;
  sf.objective_offset = objective_offset_;

  sf.c = Vector::Zero(n);
  for (const auto& [idx, coef] : objective_) sf.c(idx) += coef;

  // Equalities: sum coef x = -constant.
  const int p = static_cast<int>(equalities_.size());
  sf.b = Vector::Zero(p);
  std::vector<Eigen::Triplet<double>> a_trip;
  for (int r = 0; r < p; ++r) {
    const LinExpr e = equalities_[r].compressed();
    sf.b(r) = -e.constant();
    for (const auto& [idx, coef] : e.terms()) {
      a_trip.emplace_back(r, idx, coef);
    }
  }
  sf.a.resize(p, n);
  sf.a.setFromTriplets(a_trip.begin(), a_trip.end());

  // Cone rows: s = expr, i.e. -coef x + s = constant.
  std::vector<Eigen::Triplet<double>> g_trip;
  std::vector<double> h_rows;
  auto emit_row = [&](const LinExpr& raw, double scale) {
    const LinExpr e = raw.compressed();
    const int r = static_cast<int>(h_rows.size());
    h_rows.push_back(scale * e.constant());
    for (const auto& [idx, coef] : e.terms()) {
      g_trip.emplace_back(r, idx, -scale * coef);
    }
  };

  if (!nonneg_.empty()) {
    sf.cones.push_back(
        {ConeKind::kNonneg, static_cast<int>(nonneg_.size())});
    for (const LinExpr& e : nonneg_) emit_row(e, 1.0);
  }
  for (const auto& block : soc_blocks_) {
    sf.cones.push_back({ConeKind::kSoc, static_cast<int>(block.size())});
    for (const LinExpr& e : block) emit_row(e, 1.0);
  }
  for (const AffineMatrix& m : psd_blocks_) {
    sf.cones.push_back({ConeKind::kPsd, m.rows()});
    for (int j = 0; j < m.cols(); ++j) {
      for (int i = j; i < m.rows(); ++i) {
        emit_row(m(i, j), i == j ? 1.0 : kSqrt2);
      }
    }
  }

  const int m_rows = static_cast<int>(h_rows.size());
  sf.h = Eigen::Map<const Vector>(h_rows.data(), m_rows);
  sf.g.resize(m_rows, n);
  sf.g.setFromTriplets(g_trip.begin(), g_trip.end());
  return sf;
}

}  // namespace riskmpc::conic
