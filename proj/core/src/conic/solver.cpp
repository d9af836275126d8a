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

#include "riskmpc/conic/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "kkt.hpp"

namespace riskmpc::conic {

namespace {

constexpr double kStepBack = 0.99;
constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kPrimalInfeasible:
      return "infeasible";
    case SolveStatus::kDualInfeasible:
      return "unbounded";
    case SolveStatus::kNumericalFailure:
      return "numerical_failure";
  }
  return "unknown";
}

Solution solve(const StandardForm& sf, const SolveOptions& opts) {
  const int n = sf.num_vars();
  const int p = sf.num_eq();
  const int m = sf.num_cone_rows();
  const ConeLayout layout = make_layout(sf.cones);

  Solution sol;
  sol.x = Vector::Zero(n);
  sol.y = Vector::Zero(p);
  sol.z = Vector::Zero(m);
  sol.s = Vector::Zero(m);

  if (n == 0) {
    // Degenerate program with no unknowns: feasible iff the fixed slacks
    // satisfy everything.
    const bool feasible =
        (p == 0 || sf.b.cwiseAbs().maxCoeff() <= opts.feastol) &&
        (m == 0 || cone_margin(layout, sf.h) >= -opts.feastol);
    sol.status = feasible ? SolveStatus::kOptimal
                          : SolveStatus::kPrimalInfeasible;
    sol.s = sf.h;
    sol.primal_objective = sf.objective_offset;
    sol.dual_objective = sf.objective_offset;
    return sol;
  }

  auto kkt = make_kkt_solver(sf, layout, opts.regularization);

  // --- Initialization at the analytic center surrogate: two identity-scaled
  // KKT solves give a primal candidate (x, s) and a dual candidate (y, z),
  // each shifted into the cone interior if needed.
  std::vector<BlockScaling> scalings = identity_scalings(layout);
  if (!kkt->factor(scalings)) {
    sol.status = SolveStatus::kNumericalFailure;
    return sol;
  }

  Vector x = Vector::Zero(n), yt = sf.b, zt = sf.h;
  kkt->solve(x, yt, zt);
  Vector s = -zt;

  Vector xt = -sf.c, y = Vector::Zero(p), z = Vector::Zero(m);
  kkt->solve(xt, y, z);

  if (m > 0) {
    const double ts = max_step_to_cone(layout, s);
    if (ts >= -1e-8 * std::max(1.0, s.norm())) {
      add_identity_multiple(layout, s, 1.0 + ts);
    }
    const double tz = max_step_to_cone(layout, z);
    if (tz >= -1e-8 * std::max(1.0, z.norm())) {
      add_identity_multiple(layout, z, 1.0 + tz);
    }
  }
  double tau = 1.0, kappa = 1.0;

  const double resx0 = std::max(1.0, sf.c.norm());
  const double resy0 = std::max(1.0, sf.b.norm());
  const double resz0 = std::max(1.0, sf.h.norm());
  const Vector cone_e = cone_identity(layout);

  // Keep the most nearly converged iterate seen so far: if a late Newton
  // direction degrades (the scaled system grows singular as mu -> 0) the
  // returned point should be the best one, not whatever the stall left.
  Solution best_sol = sol;
  double best_merit = kInfinity;

  for (int iter = 0; iter <= opts.max_iters; ++iter) {
    // Residuals of the homogeneous embedding; all vanish at a solution.
    const Vector rx = sf.a.transpose() * y + sf.g.transpose() * z + sf.c * tau;
    const Vector ry = sf.a * x - sf.b * tau;
    const Vector rz = sf.g * x + s - sf.h * tau;
    const double cx = sf.c.dot(x);
    const double by = sf.b.dot(y);
    const double hz = sf.h.dot(z);
    const double rt = kappa + cx + by + hz;

    const double pcost = cx / tau;
    const double dcost = -(by + hz) / tau;
    const double gap = (m > 0 ? s.dot(z) : 0.0) / (tau * tau);
    double relgap = kInfinity;
    if (pcost < 0.0) {
      relgap = gap / -pcost;
    } else if (dcost > 0.0) {
      relgap = gap / dcost;
    }
    const double pres =
        std::max(ry.norm() / resy0, rz.norm() / resz0) / tau;
    const double dres = rx.norm() / (resx0 * tau);

    sol.primal_objective = pcost + sf.objective_offset;
    sol.dual_objective = dcost + sf.objective_offset;
    sol.gap = gap;
    sol.relative_gap = relgap;
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.iterations = iter;

    // Diagnostics hook for development; inert unless the variable is set.
    if (std::getenv("RISKMPC_IPM_TRACE") != nullptr) {
      std::fprintf(stderr,
                   "ipm %3d pcost=% .6e pres=%.2e dres=%.2e gap=%.2e "
                   "tau=%.2e kappa=%.2e\n",
                   iter, pcost, pres, dres, gap, tau, kappa);
    }

    const double merit =
        std::max({pres / opts.feastol, dres / opts.feastol,
                  std::min(gap / opts.abstol, relgap / opts.reltol)});
    if (std::isfinite(merit) && merit < best_merit) {
      best_merit = merit;
      best_sol = sol;
      best_sol.x = x / tau;
      best_sol.y = y / tau;
      best_sol.z = z / tau;
      best_sol.s = s / tau;
    }

    if (pres <= opts.feastol && dres <= opts.feastol &&
        (gap <= opts.abstol || relgap <= opts.reltol)) {
      sol.status = SolveStatus::kOptimal;
      sol.x = x / tau;
      sol.y = y / tau;
      sol.z = z / tau;
      sol.s = s / tau;
      return sol;
    }
    if (by + hz < 0.0) {
      // Candidate Farkas certificate of primal infeasibility.
      const double scale = -1.0 / (by + hz);
      const double pinfres =
          (sf.a.transpose() * y + sf.g.transpose() * z).norm() * scale /
          resx0;
      if (pinfres <= opts.feastol) {
        sol.status = SolveStatus::kPrimalInfeasible;
        sol.x.setZero();
        sol.s.setZero();
        sol.y = y * scale;
        sol.z = z * scale;
        sol.primal_residual = pinfres;
        return sol;
      }
    }
    if (cx < 0.0) {
      // Candidate certificate of dual infeasibility (unbounded objective).
      const double scale = -1.0 / cx;
      const double dinfres =
          std::max((sf.a * x).norm() * scale / resy0,
                   (m > 0 ? (sf.g * x + s).norm() : 0.0) * scale / resz0);
      if (dinfres <= opts.feastol) {
        sol.status = SolveStatus::kDualInfeasible;
        sol.x = x * scale;
        sol.s = s * scale;
        sol.y.setZero();
        sol.z.setZero();
        sol.dual_residual = dinfres;
        return sol;
      }
    }
    if (iter == opts.max_iters) break;

    try {
      scalings = compute_scalings(layout, s, z);
    } catch (const SolverFailureError&) {
      break;
    }
    Vector lambda(m);
    for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
      lambda.segment(layout.offsets[bi], layout.blocks[bi].rows()) =
          scalings[bi].lambda;
    }
    const double mu =
        ((m > 0 ? s.dot(z) : 0.0) + tau * kappa) / (layout.degree + 1);

    if (!kkt->factor(scalings)) {
      break;
    }

    // Constant-rhs solve shared by both passes.
    Vector u1x = -sf.c, u1y = sf.b, u1z = sf.h;
    kkt->solve(u1x, u1y, u1z);
    const Vector w_u1z = apply_w(layout, scalings, u1z);
    const double denom = -w_u1z.squaredNorm() - kappa / tau;

    const Vector lam_sq = jordan_product(layout, lambda, lambda);

    double sigma = 0.0, corr_kappa = 0.0;
    Vector corr = Vector::Zero(m);
    bool failed = false;
    for (int pass = 0; pass < 2; ++pass) {
      Vector g_vec, bz3;
      double vk;  // target of the tau-kappa centering row
      if (pass == 0) {
        g_vec = -lambda;
        bz3 = -rz + s;
        vk = tau * kappa;
      } else {
        g_vec = jordan_solve(layout, lambda,
                             sigma * mu * cone_e - lam_sq - corr);
        bz3 = -(1.0 - sigma) * rz -
              apply_w_transpose(layout, scalings, g_vec);
        vk = tau * kappa + corr_kappa - sigma * mu;
      }

      Vector u2x = -(1.0 - sigma) * rx;
      Vector u2y = -(1.0 - sigma) * ry;
      Vector u2z = bz3;
      kkt->solve(u2x, u2y, u2z);

      const double dtau =
          (-(1.0 - sigma) * rt + vk / tau -
           (sf.c.dot(u2x) + sf.b.dot(u2y) + sf.h.dot(u2z))) /
          denom;
      const Vector dx = u2x + dtau * u1x;
      const Vector dy = u2y + dtau * u1y;
      const Vector dz = u2z + dtau * u1z;
      const Vector w_dz = apply_w(layout, scalings, dz);
      const Vector ds = apply_w_transpose(layout, scalings, g_vec - w_dz);
      const double dkappa = -vk / tau - (kappa / tau) * dtau;

      const Vector scaled_ds =
          apply_w_inverse_transpose(layout, scalings, ds);
      double t = std::max(max_step(layout, lambda, w_dz),
                          max_step(layout, lambda, scaled_ds));
      t = std::max({t, -dtau / tau, -dkappa / kappa});

      if (const char* lvl = std::getenv("RISKMPC_IPM_TRACE");
          lvl != nullptr && lvl[0] == '2') {
        const Vector nres_x = sf.a.transpose() * dy + sf.g.transpose() * dz +
                              sf.c * dtau + (1.0 - sigma) * rx;
        const Vector nres_y = sf.a * dx - sf.b * dtau + (1.0 - sigma) * ry;
        const Vector nres_z =
            sf.g * dx + ds - sf.h * dtau + (1.0 - sigma) * rz;
        std::fprintf(stderr,
                     "  pass%d sigma=%.2e t=%.2e dtau=%.2e dkappa=%.2e "
                     "nres=(%.1e,%.1e,%.1e)\n",
                     pass, sigma, t, dtau, dkappa,
                     nres_x.size() ? nres_x.cwiseAbs().maxCoeff() : 0.0,
                     nres_y.size() ? nres_y.cwiseAbs().maxCoeff() : 0.0,
                     nres_z.size() ? nres_z.cwiseAbs().maxCoeff() : 0.0);
      }

      if (pass == 0) {
        const double alpha = t <= 0.0 ? 1.0 : std::min(1.0, 1.0 / t);
        sigma = std::clamp(std::pow(1.0 - alpha, 3.0), 0.0, 1.0);
        corr = jordan_product(layout, scaled_ds, w_dz);
        corr_kappa = dtau * dkappa;
      } else {
        // Reject the step when the direction stops satisfying the Newton
        // equations it was solved from (factorization breakdown at small
        // mu); finishing from the best iterate beats wrecking it.
        const Vector nres_x = sf.a.transpose() * dy + sf.g.transpose() * dz +
                              sf.c * dtau + (1.0 - sigma) * rx;
        const Vector nres_y = sf.a * dx - sf.b * dtau + (1.0 - sigma) * ry;
        const Vector nres_z =
            sf.g * dx + ds - sf.h * dtau + (1.0 - sigma) * rz;
        const double nres =
            std::max({nres_x.size() ? nres_x.cwiseAbs().maxCoeff() : 0.0,
                      nres_y.size() ? nres_y.cwiseAbs().maxCoeff() : 0.0,
                      nres_z.size() ? nres_z.cwiseAbs().maxCoeff() : 0.0});
        const double iterate_scale = std::max(
            {1.0, x.cwiseAbs().maxCoeff(),
             m > 0 ? s.cwiseAbs().maxCoeff() : 0.0,
             m > 0 ? z.cwiseAbs().maxCoeff() : 0.0});
        if (!std::isfinite(nres) || nres > 1e-4 * iterate_scale) {
          failed = true;
          break;
        }
        const double step = t <= 0.0 ? 1.0 : std::min(1.0, kStepBack / t);
        x += step * dx;
        y += step * dy;
        z += step * dz;
        s += step * ds;
        tau += step * dtau;
        kappa += step * dkappa;
        if (!(tau > 0.0) || !(kappa > 0.0) || !std::isfinite(tau)) {
          failed = true;
        }
      }
    }
    if (failed) break;
  }

  // Stalled (rejected direction, lost positivity, or iteration budget).
  // The best iterate is often already an excellent solution whose last
  // digit of gap could not be certified; accept it under the relaxed
  // tolerances rather than discarding a usable answer.
  if (best_merit < kInfinity &&
      best_sol.primal_residual <= opts.feastol_relaxed &&
      best_sol.dual_residual <= opts.feastol_relaxed &&
      (best_sol.gap <= opts.abstol_relaxed ||
       best_sol.relative_gap <= opts.reltol_relaxed)) {
    best_sol.status = SolveStatus::kOptimal;
    best_sol.reduced_accuracy = true;
    return best_sol;
  }
  best_sol.status = SolveStatus::kNumericalFailure;
  return best_sol;
}

}  // namespace riskmpc::conic
