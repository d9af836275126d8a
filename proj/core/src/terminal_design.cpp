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

#include "riskmpc/terminal_design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace riskmpc {

namespace {

// Strictness shift turning open inequalities into closed, solver-friendly
// ones: every strict matrix inequality is required to clear this margin.
constexpr double kStrictShift = 1e-6;

using conic::AffineMatrix;
using conic::LinExpr;

Matrix symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

// Symmetric positive-definite inverse with symmetry scrubbed.
Matrix spd_inverse(const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) {
    throw SolverFailureError(
        "design recovery: matrix expected positive definite is not");
  }
  return symmetrized(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

// Symmetric square root of an SPD matrix.
Matrix spd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

double max_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

void subtract_shift_on_diagonal(AffineMatrix& m, double shift) {
  for (int k = 0; k < m.rows(); ++k) {
    m(k, k) -= shift;
  }
}

void check_inputs(const SystemModel& model, const ConstraintSet& constraints,
                  const std::vector<Vector>& vertices) {
  if (vertices.empty()) {
    throw std::invalid_argument("terminal synthesis: empty vertex list");
  }
  for (const Vector& q : vertices) {
    if (q.size() != model.branches()) {
      throw std::invalid_argument(
          "terminal synthesis: vertex length does not match branch count");
    }
  }
  if (constraints.Tx().cols() != model.nx() ||
      constraints.Tu().cols() != model.nu()) {
    throw std::invalid_argument(
        "terminal synthesis: constraint maps do not match model dimensions");
  }
}

struct CoreVariables {
  conic::SymMatrixVar shape;
  conic::SymMatrixVar cost_inverse;
  conic::RectMatrixVar slack;
  conic::RectMatrixVar gain_factor;
  int stability_block_size = 0;
  int stability_lmi_count = 0;
  int constraint_lmi_count = 0;
};

// Adds the factorized design inequalities:
//   - per envelope vertex, a Lyapunov-decrease block coupling the inverse
//     cost, the slack factor, and the gain factor across all branches;
//   - a control-norm block, and per branch a state-norm block and an
//     ellipsoid-invariance block.
// All are shifted to enforce strict feasibility.
CoreVariables add_design_inequalities(conic::ConicProgram& prog,
                                      const SystemModel& model,
                                      const CostWeights& weights,
                                      const ConstraintSet& constraints,
                                      const std::vector<Vector>& vertices) {
  const int nx = model.nx();
  const int nu = model.nu();
  const int nb = model.branches();

  CoreVariables vars;
  vars.shape = prog.add_symmetric(nx, "shape");
  vars.cost_inverse = prog.add_symmetric(nx, "cost_inv");
  vars.slack = prog.add_rect(nx, nx, "slack");
  vars.gain_factor = prog.add_rect(nu, nx, "gain_factor");

  const AffineMatrix shape_aff = AffineMatrix::of(vars.shape);
  const AffineMatrix cost_inv_aff = AffineMatrix::of(vars.cost_inverse);
  const AffineMatrix slack_aff = AffineMatrix::of(vars.slack);
  const AffineMatrix gain_aff = AffineMatrix::of(vars.gain_factor);

  const Matrix r_inv = spd_inverse(weights.R());
  const Matrix q_sqrt = spd_sqrt(weights.Q());

  // Closed-loop maps per branch in factor form.
  std::vector<AffineMatrix> closed_loop;
  closed_loop.reserve(nb);
  for (int j = 0; j < nb; ++j) {
    closed_loop.push_back(model.A(j) * slack_aff + model.B(j) * gain_aff);
  }

  const AffineMatrix slack_sym = slack_aff + slack_aff.transpose();

  // Lyapunov-decrease block per envelope vertex.
  const int stab_size = nb * nx + nu + nx + nx;
  vars.stability_block_size = stab_size;
  for (const Vector& q : vertices) {
    AffineMatrix m = AffineMatrix::zero(stab_size, stab_size);
    const int o_ctrl = nb * nx;
    const int o_state = o_ctrl + nu;
    const int o_corner = o_state + nx;
    for (int j = 0; j < nb; ++j) {
      m.set_block(j * nx, j * nx, cost_inv_aff);
      const AffineMatrix coupled =
          (-std::sqrt(std::max(q(j), 0.0))) * closed_loop[j];
      m.set_block(j * nx, o_corner, coupled);
      m.set_block(o_corner, j * nx, coupled.transpose());
    }
    m.set_block(o_ctrl, o_ctrl, r_inv);
    m.set_block(o_ctrl, o_corner, -1.0 * gain_aff);
    m.set_block(o_corner, o_ctrl, (-1.0 * gain_aff).transpose());
    m.set_block(o_state, o_state, Matrix::Identity(nx, nx));
    const AffineMatrix weighted_slack = -1.0 * (q_sqrt * slack_aff);
    m.set_block(o_state, o_corner, weighted_slack);
    m.set_block(o_corner, o_state, weighted_slack.transpose());
    m.set_block(o_corner, o_corner, slack_sym - cost_inv_aff);
    subtract_shift_on_diagonal(m, kStrictShift);
    prog.add_psd(m);
    ++vars.stability_lmi_count;
  }

  // Shared lower-right corner of the constraint blocks.
  const AffineMatrix corner = slack_sym - shape_aff;

  // Control-norm block.
  {
    const int ru = static_cast<int>(constraints.Tu().rows());
    AffineMatrix m = AffineMatrix::zero(ru + nx, ru + nx);
    m.set_block(0, 0,
                constraints.u_max() * constraints.u_max() *
                    Matrix::Identity(ru, ru));
    const AffineMatrix mapped = -1.0 * (constraints.Tu() * gain_aff);
    m.set_block(0, ru, mapped);
    m.set_block(ru, 0, mapped.transpose());
    m.set_block(ru, ru, corner);
    subtract_shift_on_diagonal(m, kStrictShift);
    prog.add_psd(m);
    ++vars.constraint_lmi_count;
  }

  // State-norm block per branch.
  const int rx = static_cast<int>(constraints.Tx().rows());
  for (int j = 0; j < nb; ++j) {
    AffineMatrix m = AffineMatrix::zero(rx + nx, rx + nx);
    m.set_block(0, 0,
                constraints.x_max() * constraints.x_max() *
                    Matrix::Identity(rx, rx));
    const AffineMatrix mapped = -1.0 * (constraints.Tx() * closed_loop[j]);
    m.set_block(0, rx, mapped);
    m.set_block(rx, 0, mapped.transpose());
    m.set_block(rx, rx, corner);
    subtract_shift_on_diagonal(m, kStrictShift);
    prog.add_psd(m);
    ++vars.constraint_lmi_count;
  }

  // Ellipsoid-invariance block per branch.
  for (int j = 0; j < nb; ++j) {
    AffineMatrix m = AffineMatrix::zero(2 * nx, 2 * nx);
    m.set_block(0, 0, shape_aff);
    const AffineMatrix mapped = -1.0 * closed_loop[j];
    m.set_block(0, nx, mapped);
    m.set_block(nx, 0, mapped.transpose());
    m.set_block(nx, nx, corner);
    subtract_shift_on_diagonal(m, kStrictShift);
    prog.add_psd(m);
    ++vars.constraint_lmi_count;
  }

  return vars;
}

// Relative strictness for the shape-refinement pass.  The refined
// conditions are stated after a congruence by the shape itself, so an
// additive shift would scale away with the shape; shrinking the shape
// blocks by this factor instead yields verified margins proportional to
// the smallest eigenvalue of the inverse shape, independent of its scale,
// at a volume cost of well under a tenth of a percent.
constexpr double kRefineShrink = 1e-4;

// The factorized one-shot program shares a single slack factor between the
// Lyapunov-decrease blocks (living at the scale of the inverse cost) and
// the set blocks (living at the scale of the shape).  That coupling caps
// the recovered shape far below the largest ellipsoid the gain actually
// admits.  With the gain frozen the exact set conditions become linear in
// the shape after a congruence by the shape, so a second pass re-maximizes
// the ellipsoid volume without touching the certified (cost, gain) pair.
// `cover`, when given, keeps a designated state inside the ellipsoid.
// Returns the refined shape, or the original one when the pass does not
// reach optimality or does not improve the volume.
Matrix refine_shape_for_gain(const SystemModel& model,
                             const ConstraintSet& constraints,
                             const TerminalDesign& design, const Vector* cover,
                             const conic::SolveOptions& options) {
  const int nx = model.nx();
  const int nb = model.branches();

  conic::ConicProgram prog;
  conic::SymMatrixVar shape = prog.add_symmetric(nx, "shape");
  const AffineMatrix shape_aff = AffineMatrix::of(shape);
  const AffineMatrix shape_strict = (1.0 - kRefineShrink) * shape_aff;

  for (int j = 0; j < nb; ++j) {
    const Matrix cl = model.A(j) + model.B(j) * design.gain;
    {
      // Invariance: the one-step image of the ellipsoid stays inside it.
      AffineMatrix m = AffineMatrix::zero(2 * nx, 2 * nx);
      const AffineMatrix mapped = cl * shape_aff;
      m.set_block(0, 0, shape_strict);
      m.set_block(0, nx, mapped.transpose());
      m.set_block(nx, 0, mapped);
      m.set_block(nx, nx, shape_strict);
      prog.add_psd(m);
    }
    {
      // One-step image stays inside the state norm ball.
      const int rx = static_cast<int>(constraints.Tx().rows());
      AffineMatrix m = AffineMatrix::zero(rx + nx, rx + nx);
      const AffineMatrix mapped = (constraints.Tx() * cl) * shape_aff;
      m.set_block(0, 0,
                  constraints.x_max() * constraints.x_max() *
                      Matrix::Identity(rx, rx));
      m.set_block(0, rx, mapped);
      m.set_block(rx, 0, mapped.transpose());
      m.set_block(rx, rx, shape_strict);
      prog.add_psd(m);
    }
  }
  {
    // The gain keeps the ellipsoid inside the control norm ball.
    const int ru = static_cast<int>(constraints.Tu().rows());
    AffineMatrix m = AffineMatrix::zero(ru + nx, ru + nx);
    const AffineMatrix mapped =
        (constraints.Tu() * design.gain) * shape_aff;
    m.set_block(0, 0,
                constraints.u_max() * constraints.u_max() *
                    Matrix::Identity(ru, ru));
    m.set_block(0, ru, mapped);
    m.set_block(ru, 0, mapped.transpose());
    m.set_block(ru, ru, shape_strict);
    prog.add_psd(m);
  }
  if (cover != nullptr) {
    // Keep the designated state covered (non-strict membership block).
    AffineMatrix m = AffineMatrix::zero(1 + nx, 1 + nx);
    m(0, 0) = 1.0;
    for (int i = 0; i < nx; ++i) {
      m(0, 1 + i) = (*cover)(i);
      m(1 + i, 0) = (*cover)(i);
    }
    m.set_block(1, 1, shape_aff);
    prog.add_psd(m);
  }

  const conic::Var volume = prog.add_detroot_epigraph(shape);
  prog.minimize(-1.0 * LinExpr(volume));

  const conic::Solution sol = conic::solve(prog.build(), options);
  if (sol.status != conic::SolveStatus::kOptimal) {
    return design.shape;
  }
  const Matrix refined = symmetrized(value_at(shape, sol.x));
  Eigen::LLT<Matrix> llt(refined);
  if (llt.info() != Eigen::Success ||
      refined.determinant() <= design.shape.determinant()) {
    return design.shape;
  }
  return refined;
}

TerminalDesign recover_design(const conic::Solution& sol,
                              const CoreVariables& vars) {
  TerminalDesign d;
  d.shape = symmetrized(value_at(vars.shape, sol.x));
  d.raw_cost_inverse = symmetrized(value_at(vars.cost_inverse, sol.x));
  d.raw_slack = value_at(vars.slack, sol.x);
  d.raw_gain_factor = value_at(vars.gain_factor, sol.x);
  d.cost = spd_inverse(d.raw_cost_inverse);
  // gain * slack = gain_factor  =>  slack' * gain' = gain_factor'.
  Eigen::PartialPivLU<Matrix> lu(d.raw_slack.transpose());
  d.gain = lu.solve(d.raw_gain_factor.transpose()).transpose();
  return d;
}

[[noreturn]] void throw_for_status(const conic::Solution& sol,
                                   const std::string& what) {
  if (sol.status == conic::SolveStatus::kPrimalInfeasible) {
    throw SynthesisInfeasibleError(what + ": infeasible");
  }
  throw SolverFailureError(what + ": solver failed (" +
                           conic::to_string(sol.status) + ")");
}

}  // namespace

double VerificationReport::worst_stability() const {
  return stability_margins.empty()
             ? -std::numeric_limits<double>::infinity()
             : *std::max_element(stability_margins.begin(),
                                 stability_margins.end());
}

double VerificationReport::worst() const {
  double w = std::max(worst_stability(), control_margin);
  for (double m : state_margins) w = std::max(w, m);
  for (double m : invariance_margins) w = std::max(w, m);
  return w;
}

PeProgram build_pe_program(const SystemModel& model,
                           const CostWeights& weights,
                           const ConstraintSet& constraints,
                           const std::vector<Vector>& vertices) {
  check_inputs(model, constraints, vertices);
  PeProgram out;
  CoreVariables vars = add_design_inequalities(out.program, model, weights,
                                               constraints, vertices);
  out.volume_var = out.program.add_detroot_epigraph(vars.shape);
  out.program.minimize(-1.0 * LinExpr(out.volume_var));
  out.shape_var = vars.shape;
  out.cost_inverse_var = vars.cost_inverse;
  out.slack_var = vars.slack;
  out.gain_factor_var = vars.gain_factor;
  out.stability_block_size = vars.stability_block_size;
  out.stability_lmi_count = vars.stability_lmi_count;
  out.constraint_lmi_count = vars.constraint_lmi_count;
  return out;
}

TerminalDesign solve_pe(const SystemModel& model, const CostWeights& weights,
                        const ConstraintSet& constraints,
                        const std::vector<Vector>& vertices,
                        const conic::SolveOptions& options) {
  PeProgram built = build_pe_program(model, weights, constraints, vertices);
  const conic::Solution sol = conic::solve(built.program.build(), options);
  if (sol.status != conic::SolveStatus::kOptimal) {
    throw_for_status(sol, "terminal synthesis");
  }
  CoreVariables vars;
  vars.shape = built.shape_var;
  vars.cost_inverse = built.cost_inverse_var;
  vars.slack = built.slack_var;
  vars.gain_factor = built.gain_factor_var;
  TerminalDesign design = recover_design(sol, vars);
  design.shape = refine_shape_for_gain(model, constraints, design,
                                       /*cover=*/nullptr, options);
  return design;
}

VerificationReport verify_terminal(const SystemModel& model,
                                   const CostWeights& weights,
                                   const ConstraintSet& constraints,
                                   const std::vector<Vector>& vertices,
                                   const TerminalDesign& design) {
  check_inputs(model, constraints, vertices);
  const int nx = model.nx();
  if (design.gain.rows() != model.nu() || design.gain.cols() != nx ||
      design.cost.rows() != nx || design.shape.rows() != nx) {
    throw std::invalid_argument("verify_terminal: design dimension mismatch");
  }
  const int nb = model.branches();

  std::vector<Matrix> closed_loop(nb);
  for (int j = 0; j < nb; ++j) {
    closed_loop[j] = model.A(j) + model.B(j) * design.gain;
  }
  const Matrix shape_inv = spd_inverse(design.shape);

  VerificationReport report;

  // Risk-sensitive Lyapunov decrease, worst case over the envelope.
  for (const Vector& q : vertices) {
    Matrix m = -design.cost + design.gain.transpose() * weights.R() *
                                  design.gain +
               weights.Q();
    for (int j = 0; j < nb; ++j) {
      m += q(j) * closed_loop[j].transpose() * design.cost * closed_loop[j];
    }
    report.stability_margins.push_back(max_eigenvalue(m));
  }

  // Control norm-ball containment of the ellipsoid under the gain.
  const Matrix tu_gram = constraints.Tu().transpose() * constraints.Tu() /
                         (constraints.u_max() * constraints.u_max());
  report.control_margin = max_eigenvalue(
      design.gain.transpose() * tu_gram * design.gain - shape_inv);

  // One-step state constraint and ellipsoid invariance per branch.
  const Matrix tx_gram = constraints.Tx().transpose() * constraints.Tx() /
                         (constraints.x_max() * constraints.x_max());
  for (int j = 0; j < nb; ++j) {
    report.state_margins.push_back(max_eigenvalue(
        closed_loop[j].transpose() * tx_gram * closed_loop[j] - shape_inv));
    report.invariance_margins.push_back(max_eigenvalue(
        closed_loop[j].transpose() * shape_inv * closed_loop[j] - shape_inv));
  }
  return report;
}

StaticPolicyDesign mpc0_design(const SystemModel& model,
                               const CostWeights& weights,
                               const ConstraintSet& constraints,
                               const std::vector<Vector>& vertices,
                               const Vector& x0,
                               const conic::SolveOptions& options) {
  check_inputs(model, constraints, vertices);
  const int nx = model.nx();
  if (x0.size() != nx || !x0.allFinite()) {
    throw std::invalid_argument("mpc0_design: bad initial state");
  }

  conic::ConicProgram prog;
  CoreVariables vars =
      add_design_inequalities(prog, model, weights, constraints, vertices);
  const conic::Var bound = prog.add_scalar("cost_bound");

  // Initial state inside the terminal ellipsoid (non-strict).
  {
    AffineMatrix m = AffineMatrix::zero(1 + nx, 1 + nx);
    m(0, 0) = 1.0;
    for (int i = 0; i < nx; ++i) {
      m(0, 1 + i) = x0(i);
      m(1 + i, 0) = x0(i);
    }
    m.set_block(1, 1, AffineMatrix::of(vars.shape));
    prog.add_psd(m);
  }
  // Epigraph of the quadratic cost at the initial state (non-strict).
  {
    AffineMatrix m = AffineMatrix::zero(1 + nx, 1 + nx);
    m(0, 0) = LinExpr(bound);
    for (int i = 0; i < nx; ++i) {
      m(0, 1 + i) = x0(i);
      m(1 + i, 0) = x0(i);
    }
    m.set_block(1, 1, AffineMatrix::of(vars.cost_inverse));
    prog.add_psd(m);
  }
  prog.minimize(LinExpr(bound));

  const conic::Solution sol = conic::solve(prog.build(), options);
  if (sol.status != conic::SolveStatus::kOptimal) {
    throw_for_status(sol, "static policy design");
  }
  StaticPolicyDesign out;
  out.design = recover_design(sol, vars);
  out.design.shape = refine_shape_for_gain(model, constraints, out.design,
                                           /*cover=*/&x0, options);
  out.cost_bound = value_at(LinExpr(bound), sol.x);
  return out;
}

}  // namespace riskmpc
