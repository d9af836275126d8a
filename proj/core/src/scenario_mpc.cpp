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

#include "riskmpc/scenario_mpc.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "riskmpc/cost_tree.hpp"

namespace riskmpc {

namespace {

using conic::AffineMatrix;
using conic::LinExpr;

Matrix symmetric_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Matrix symmetric_inv_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument(
        "scenario mpc: matrix expected positive definite is not");
  }
  return es.eigenvectors() *
         es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Portable uniform draw in [0, 1) from one generator step.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

ScenarioTree::ScenarioTree(int branching, int horizon, Index node_cap)
    : branching_(branching), horizon_(horizon) {
  if (branching < 1) {
    throw std::invalid_argument("ScenarioTree: branching must be >= 1");
  }
  if (horizon < 1) {
    throw std::invalid_argument("ScenarioTree: horizon must be >= 1");
  }
  offsets_.resize(horizon_ + 2);
  offsets_[0] = 0;
  Index level_size = 1;
  for (int h = 0; h <= horizon_; ++h) {
    offsets_[h + 1] = offsets_[h] + level_size;
    if (offsets_[h + 1] > node_cap) {
      throw std::length_error("ScenarioTree: node cap exceeded");
    }
    if (h < horizon_) {
      // A level that alone exceeds the cap would overflow before the sum
      // check sees it; reject it ahead of the multiply.
      if (level_size > node_cap / branching_) {
        throw std::length_error("ScenarioTree: node cap exceeded");
      }
      level_size *= branching_;
    }
  }
}

int ScenarioTree::level_of(Index node) const {
  if (node < 0 || node >= node_count()) {
    throw std::out_of_range("ScenarioTree: node out of range");
  }
  int level = 0;
  while (offsets_[level + 1] <= node) ++level;
  return level;
}

Index ScenarioTree::child(Index node, int branch) const {
  if (branch < 0 || branch >= branching_) {
    throw std::out_of_range("ScenarioTree: branch out of range");
  }
  const int level = level_of(node);
  if (level >= horizon_) {
    throw std::out_of_range("ScenarioTree: leaves have no children");
  }
  return offsets_[level + 1] + (node - offsets_[level]) * branching_ + branch;
}

Index ScenarioTree::parent(Index node) const {
  const int level = level_of(node);
  if (level == 0) {
    throw std::out_of_range("ScenarioTree: root has no parent");
  }
  return offsets_[level - 1] + (node - offsets_[level]) / branching_;
}

std::vector<int> ScenarioTree::history(Index node) const {
  const int level = level_of(node);
  std::vector<int> out(level);
  Index rank = node - offsets_[level];
  for (int h = level - 1; h >= 0; --h) {
    out[h] = static_cast<int>(rank % branching_);
    rank /= branching_;
  }
  return out;
}

Index ScenarioTree::node_at(std::span<const int> history) const {
  if (static_cast<int>(history.size()) > horizon_) {
    throw std::invalid_argument("ScenarioTree: history too long");
  }
  Index node = 0;
  for (int j : history) node = child(node, j);
  return node;
}

ScenarioMpc::ScenarioMpc(SystemModel model, CostWeights weights,
                         ConstraintSet constraints, TerminalDesign design,
                         RiskEnvelope envelope, int horizon, Index node_cap)
    : model_(std::move(model)),
      weights_(std::move(weights)),
      constraints_(std::move(constraints)),
      design_(std::move(design)),
      envelope_(std::move(envelope)),
      tree_(model_.branches(), horizon, node_cap),
      terminal_set_(design_.shape),
      stage_state_sqrt_(symmetric_sqrt(weights_.Q())),
      stage_control_sqrt_(symmetric_sqrt(weights_.R())),
      terminal_cost_sqrt_(symmetric_sqrt(design_.cost)),
      shape_inv_sqrt_(symmetric_inv_sqrt(design_.shape)) {
  if (static_cast<int>(envelope_.dim()) != model_.branches()) {
    throw std::invalid_argument(
        "scenario mpc: envelope dimension does not match branch count");
  }
  if (design_.gain.cols() != model_.nx()) {
    throw std::invalid_argument(
        "scenario mpc: design dimension does not match the model");
  }
}

CmpcProgram ScenarioMpc::build_program(const Vector& x,
                                       double leaf_cost_offset) const {
  const int nx = model_.nx();
  const int nu = model_.nu();
  const int nb = model_.branches();
  const int horizon = tree_.horizon();
  const Index nodes = tree_.node_count();
  const Index interior = tree_.interior_count();
  const auto& vertices = envelope_.vertices();

  CmpcProgram out;
  conic::ConicProgram& prog = out.program;

  out.node_controls.reserve(interior);
  out.node_epigraphs.reserve(interior);
  out.node_costs.reserve(nodes);
  for (Index m = 0; m < interior; ++m) {
    out.node_controls.push_back(prog.add_rect(nu, 1));
    out.node_epigraphs.push_back(prog.add_scalar());
  }
  for (Index m = 0; m < nodes; ++m) {
    out.node_costs.push_back(prog.add_scalar());
  }

  // States by affine substitution down the tree.
  std::vector<AffineMatrix> states(nodes);
  states[0] = AffineMatrix::constant(x);
  std::vector<AffineMatrix> controls(interior);
  for (Index m = 0; m < interior; ++m) {
    controls[m] = AffineMatrix::of(out.node_controls[m]);
    for (int j = 0; j < nb; ++j) {
      states[tree_.child(m, j)] =
          model_.A(j) * states[m] + model_.B(j) * controls[m];
    }
  }

  // Norm constraints: control ball at every control node, state ball at
  // every non-root node, terminal ellipsoid at every leaf.
  for (Index m = 0; m < interior; ++m) {
    std::vector<LinExpr> entries;
    entries.emplace_back(constraints_.u_max());
    const AffineMatrix mapped = constraints_.Tu() * controls[m];
    for (int i = 0; i < mapped.rows(); ++i) entries.push_back(mapped(i, 0));
    prog.add_soc(std::move(entries));
    ++out.stats.norm_constraints;
  }
  for (Index m = 1; m < nodes; ++m) {
    std::vector<LinExpr> entries;
    entries.emplace_back(constraints_.x_max());
    const AffineMatrix mapped = constraints_.Tx() * states[m];
    for (int i = 0; i < mapped.rows(); ++i) entries.push_back(mapped(i, 0));
    prog.add_soc(std::move(entries));
    ++out.stats.norm_constraints;
  }
  for (Index m = tree_.level_offset(horizon); m < nodes; ++m) {
    std::vector<LinExpr> entries;
    entries.emplace_back(1.0);
    const AffineMatrix mapped = shape_inv_sqrt_ * states[m];
    for (int i = 0; i < nx; ++i) entries.push_back(mapped(i, 0));
    prog.add_soc(std::move(entries));
    ++out.stats.norm_constraints;
  }

  // Per-node cost epigraphs: stage cost at control nodes (the root's state
  // part is a constant), terminal cost at leaves.
  {
    std::vector<LinExpr> w;
    const AffineMatrix mapped = stage_control_sqrt_ * controls[0];
    for (int i = 0; i < nu; ++i) w.push_back(mapped(i, 0));
    const double root_state_cost = x.dot(weights_.Q() * x);
    prog.add_quadratic_leq(w, LinExpr(out.node_costs[0]) - root_state_cost);
    ++out.stats.quadratic_epigraphs;
  }
  for (Index m = 1; m < nodes; ++m) {
    std::vector<LinExpr> w;
    if (m < interior) {
      const AffineMatrix sx = stage_state_sqrt_ * states[m];
      for (int i = 0; i < nx; ++i) w.push_back(sx(i, 0));
      const AffineMatrix su = stage_control_sqrt_ * controls[m];
      for (int i = 0; i < nu; ++i) w.push_back(su(i, 0));
      prog.add_quadratic_leq(w, LinExpr(out.node_costs[m]));
    } else {
      const AffineMatrix tx = terminal_cost_sqrt_ * states[m];
      for (int i = 0; i < nx; ++i) w.push_back(tx(i, 0));
      prog.add_quadratic_leq(w,
                             LinExpr(out.node_costs[m]) - leaf_cost_offset);
    }
    ++out.stats.quadratic_epigraphs;
  }

  // Nested-risk epigraph: at every interior node the epigraph dominates
  // every envelope vertex's weighting of child cost-to-go.
  for (Index m = 0; m < interior; ++m) {
    for (const Vector& q : vertices) {
      LinExpr expr(out.node_epigraphs[m]);
      for (int j = 0; j < nb; ++j) {
        const Index c = tree_.child(m, j);
        if (q(j) == 0.0) continue;
        expr -= q(j) * LinExpr(out.node_costs[c]);
        if (c < interior) {
          expr -= q(j) * LinExpr(out.node_epigraphs[c]);
        }
      }
      prog.add_nonneg(expr);
      ++out.stats.vertex_inequalities;
    }
  }

  prog.minimize(LinExpr(out.node_costs[0]) + LinExpr(out.node_epigraphs[0]));

  out.stats.epigraph_variables = interior;
  out.stats.variables = prog.num_vars();
  return out;
}

MpcStepResult ScenarioMpc::solve_step(const Vector& x,
                                      const conic::SolveOptions& options)
    const {
  MpcStepResult result;
  if (x.size() != model_.nx() || !x.allFinite()) {
    throw std::invalid_argument("solve_step: bad state vector");
  }
  if (!in_state_set(constraints_, x).inside) {
    result.status = conic::SolveStatus::kPrimalInfeasible;
    result.note = "state outside the state constraint set";
    return result;
  }

  const auto t_build = std::chrono::steady_clock::now();
  CmpcProgram built = build_program(x);
  const conic::StandardForm sf = built.program.build();
  result.stats = built.stats;
  result.build_seconds = seconds_since(t_build);

  const auto t_solve = std::chrono::steady_clock::now();
  const conic::Solution sol = conic::solve(sf, options);
  result.solve_seconds = seconds_since(t_solve);
  result.status = sol.status;
  if (sol.status != conic::SolveStatus::kOptimal) {
    result.note = "lookahead program not solved to optimality";
    return result;
  }

  result.control = value_at(built.node_controls[0], sol.x).col(0);
  result.objective = sol.primal_objective;

  // Recompose the nested risk of the realized cost tree under the solved
  // policy; at an exact optimum this reproduces the objective.
  const Index nodes = tree_.node_count();
  const Index interior = tree_.interior_count();
  std::vector<Vector> xs(nodes);
  xs[0] = x;
  CostSequenceTree costs(tree_.branching(), tree_.horizon());
  for (Index m = 0; m < nodes; ++m) {
    if (m < interior) {
      const Vector u = value_at(built.node_controls[m], sol.x).col(0);
      costs.cost(m) = stage_cost(weights_, xs[m], u);
      for (int j = 0; j < tree_.branching(); ++j) {
        xs[tree_.child(m, j)] = step(model_, xs[m], u, j);
      }
    } else {
      costs.cost(m) = xs[m].dot(design_.cost * xs[m]);
    }
  }
  result.risk_consistency_gap =
      std::abs(compose_risk(costs, envelope_) - result.objective);
  return result;
}

TrajectoryRecord closed_loop(const ScenarioMpc& mpc, const Vector& x0,
                             int steps, std::uint64_t seed,
                             const conic::SolveOptions& options) {
  if (steps < 1) {
    throw std::invalid_argument("closed_loop: steps must be >= 1");
  }
  std::mt19937_64 rng(seed);
  TrajectoryRecord record;
  record.steps.reserve(steps);

  Vector x = x0;
  double cumulative = 0.0;
  for (int k = 0; k < steps; ++k) {
    TrajectoryStep entry;
    entry.state = x;
    const MpcStepResult sol = mpc.solve_step(x, options);
    entry.solve_seconds = sol.solve_seconds;
    entry.mpc_optimal = sol.optimal();
    if (sol.optimal()) {
      entry.control = sol.control;
      entry.objective = sol.objective;
    } else if (k == 0) {
      throw std::domain_error(
          "closed_loop: initial state is not feasible for the lookahead "
          "program (" + sol.note + ")");
    } else if (in_ellipsoid(mpc.terminal_set(), x).inside) {
      entry.control = mpc.design().gain * x;
      entry.used_fallback = true;
    } else {
      record.abort_reason =
          "lookahead infeasible outside the terminal set at step " +
          std::to_string(k);
      record.final_state = x;
      return record;
    }

    entry.stage_cost = stage_cost(mpc.weights(), x, entry.control);
    cumulative += entry.stage_cost;
    entry.cumulative_cost = cumulative;
    entry.state_margin = in_state_set(mpc.constraints(), x).margin;
    entry.control_margin = in_control_set(mpc.constraints(), entry.control)
                               .margin;
    entry.branch = sample_branch(mpc.model().pmf(), uniform01(rng));
    x = step(mpc.model(), x, entry.control, entry.branch);
    record.steps.push_back(std::move(entry));
  }
  record.final_state = x;
  record.completed = true;
  return record;
}

}  // namespace riskmpc
