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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "riskmpc/conic/solver.hpp"
#include "riskmpc/cost_tree.hpp"
#include "riskmpc/risk_envelope.hpp"
#include "riskmpc/terminal_design.hpp"
#include "test_fixtures.hpp"

namespace {

using riskmpc::CostSequenceTree;
using riskmpc::Index;
using riskmpc::Matrix;
using riskmpc::Pmf;
using riskmpc::RiskEnvelope;
using riskmpc::ScenarioMpc;
using riskmpc::ScenarioTree;
using riskmpc::TerminalDesign;
using riskmpc::Vector;

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

// The demo plant with a CVaR envelope and its synthesized terminal
// ingredients, cached per risk level because the synthesis SDP dominates
// the suite's runtime.
struct DemoKit {
  fixtures::ModelBundle bundle;
  RiskEnvelope envelope;
  TerminalDesign design;

  explicit DemoKit(double alpha)
      : bundle(fixtures::demo_2x3()),
        envelope(riskmpc::cvar_envelope(bundle.model.pmf(), alpha)),
        design(riskmpc::solve_pe(bundle.model, bundle.weights,
                                 bundle.constraints, envelope.vertices())) {}
};

const DemoKit& demo_kit(double alpha) {
  static std::map<double, DemoKit> cache;
  auto it = cache.find(alpha);
  if (it == cache.end()) it = cache.emplace(alpha, DemoKit(alpha)).first;
  return it->second;
}

ScenarioMpc make_demo_mpc(double alpha, int horizon) {
  const DemoKit& kit = demo_kit(alpha);
  return ScenarioMpc(kit.bundle.model, kit.bundle.weights,
                     kit.bundle.constraints, kit.design, kit.envelope,
                     horizon);
}

Index geometric_node_count(int branching, int horizon) {
  Index total = 0;
  Index level = 1;
  for (int h = 0; h <= horizon; ++h) {
    total += level;
    level *= branching;
  }
  return total;
}

}  // namespace

TEST_SUITE_BEGIN("scenario_mpc");

TEST_CASE("tree node counts match the closed form") {
  // Pinned control-node counts for a six-branch tree.
  CHECK(ScenarioTree(6, 2).interior_count() == 7);
  CHECK(ScenarioTree(6, 3).interior_count() == 43);
  CHECK(ScenarioTree(6, 4).interior_count() == 259);
  CHECK(ScenarioTree(6, 5).interior_count() == 1555);

  for (int branching = 1; branching <= 8; ++branching) {
    for (int horizon = 1; horizon <= 6; ++horizon) {
      const ScenarioTree tree(branching, horizon);
      CHECK(tree.node_count() == geometric_node_count(branching, horizon));
      CHECK(tree.interior_count() ==
            geometric_node_count(branching, horizon - 1));
      CHECK(tree.leaf_count() ==
            tree.node_count() - tree.interior_count());
      Index offset = 0;
      Index width = 1;
      for (int h = 0; h <= horizon; ++h) {
        CHECK(tree.level_offset(h) == offset);
        CHECK(tree.level_size(h) == width);
        offset += width;
        width *= branching;
      }
    }
  }

  // A single-branch tree degenerates to one path.
  const ScenarioTree path(1, 5);
  CHECK(path.node_count() == 6);
  CHECK(path.interior_count() == 5);
  CHECK(path.leaf_count() == 1);
}

TEST_CASE("tree indexing round-trips") {
  const ScenarioTree tree(3, 4);
  for (Index m = 0; m < tree.node_count(); ++m) {
    const int level = tree.level_of(m);
    const std::vector<int> history = tree.history(m);
    CHECK(static_cast<int>(history.size()) == level);
    CHECK(tree.node_at(history) == m);

    // Walking the recorded branches from the root reaches the node.
    Index walked = 0;
    for (int j : history) walked = tree.child(walked, j);
    CHECK(walked == m);

    if (m > 0) {
      const Index up = tree.parent(m);
      CHECK(tree.level_of(up) == level - 1);
      bool found = false;
      for (int j = 0; j < tree.branching(); ++j) {
        if (tree.child(up, j) == m) found = true;
      }
      CHECK(found);
    }
  }

  CHECK_THROWS_AS(tree.parent(0), std::out_of_range);
  CHECK_THROWS_AS(tree.child(tree.level_offset(4), 0), std::out_of_range);
  CHECK_THROWS_AS(tree.child(0, -1), std::out_of_range);
  CHECK_THROWS_AS(tree.child(0, 3), std::out_of_range);
  CHECK_THROWS_AS(tree.level_of(-1), std::out_of_range);
  CHECK_THROWS_AS(tree.level_of(tree.node_count()), std::out_of_range);
  const std::vector<int> too_long(5, 0);
  CHECK_THROWS_AS(tree.node_at(too_long), std::invalid_argument);
}

TEST_CASE("construction guards reject bad shapes") {
  CHECK_THROWS_AS(ScenarioTree(0, 2), std::invalid_argument);
  CHECK_THROWS_AS(ScenarioTree(2, 0), std::invalid_argument);

  // The default cap refuses trees in the tens of millions of nodes.
  CHECK_THROWS_AS(ScenarioTree(6, 9), std::length_error);
  // An explicit cap binds exactly: a 3-ary depth-2 tree has 13 nodes.
  CHECK_THROWS_AS(ScenarioTree(3, 2, 12), std::length_error);
  CHECK_NOTHROW(ScenarioTree(3, 2, 13));

  const DemoKit& kit = demo_kit(0.5);
  // Envelope over the wrong number of branches.
  const RiskEnvelope bad_env =
      riskmpc::cvar_envelope(fixtures::scalar_2branch().pmf(), 0.5);
  CHECK_THROWS_AS(ScenarioMpc(kit.bundle.model, kit.bundle.weights,
                              kit.bundle.constraints, kit.design, bad_env, 2),
                  std::invalid_argument);

  // Terminal ingredients sized for a different state dimension.
  TerminalDesign scalar_design = kit.design;
  scalar_design.gain = Matrix::Zero(1, 1);
  scalar_design.shape = Matrix::Identity(1, 1);
  scalar_design.cost = Matrix::Identity(1, 1);
  CHECK_THROWS_AS(ScenarioMpc(kit.bundle.model, kit.bundle.weights,
                              kit.bundle.constraints, scalar_design,
                              kit.envelope, 2),
                  std::invalid_argument);
}

TEST_CASE("program statistics follow the tree shape") {
  const DemoKit& kit = demo_kit(0.5);
  const Index m_vertices = static_cast<Index>(kit.envelope.vertices().size());
  REQUIRE(m_vertices == 4);
  const Vector x = vec2(0.5, 0.2);

  for (int horizon = 1; horizon <= 3; ++horizon) {
    CAPTURE(horizon);
    const ScenarioMpc mpc = make_demo_mpc(0.5, horizon);
    const riskmpc::CmpcProgram built = mpc.build_program(x);

    const Index interior = geometric_node_count(3, horizon - 1);
    const Index nodes = geometric_node_count(3, horizon);
    const Index leaves = nodes - interior;

    CHECK(built.stats.epigraph_variables == interior);
    CHECK(built.stats.quadratic_epigraphs == nodes);
    CHECK(built.stats.vertex_inequalities == interior * m_vertices);
    CHECK(built.stats.norm_constraints == interior + (nodes - 1) + leaves);
    // One control (nu = 1) and one risk epigraph per interior node plus one
    // cost epigraph per node.
    CHECK(built.stats.variables == 2 * interior + nodes);

    // Cross-check against the assembled standard form: one nonnegative
    // block carrying every vertex inequality, one second-order cone per
    // norm constraint and per quadratic epigraph, no semidefinite blocks,
    // no equalities (states are eliminated, not constrained).
    const riskmpc::conic::StandardForm sf = built.program.build();
    CHECK(sf.num_eq() == 0);
    CHECK(sf.num_vars() == built.stats.variables);
    Index nonneg_rows = 0;
    Index soc_blocks = 0;
    Index psd_blocks = 0;
    std::map<int, Index> soc_sizes;
    for (const auto& block : sf.cones) {
      switch (block.kind) {
        case riskmpc::conic::ConeKind::kNonneg:
          nonneg_rows += block.size;
          break;
        case riskmpc::conic::ConeKind::kSoc:
          ++soc_blocks;
          ++soc_sizes[block.size];
          break;
        case riskmpc::conic::ConeKind::kPsd:
          ++psd_blocks;
          break;
      }
    }
    CHECK(nonneg_rows == built.stats.vertex_inequalities);
    CHECK(soc_blocks ==
          built.stats.norm_constraints + built.stats.quadratic_epigraphs);
    CHECK(psd_blocks == 0);

    // Block-size census: control balls are 2-vectors; state balls,
    // terminal ellipsoids, and the root cost epigraph are 3-vectors; leaf
    // cost epigraphs are 4-vectors; interior stage-cost epigraphs are
    // 5-vectors.
    CHECK(soc_sizes[2] == interior);
    CHECK(soc_sizes[3] == (nodes - 1) + leaves + 1);
    CHECK(soc_sizes[4] == leaves);
    CHECK(soc_sizes[5] == interior - 1);
  }
}

TEST_CASE("demo lookahead is feasible and risk-consistent") {
  const ScenarioMpc mpc = make_demo_mpc(0.5, 4);
  const Vector x0 = vec2(6.0, 1.0);

  const riskmpc::MpcStepResult res = mpc.solve_step(x0);
  REQUIRE(res.optimal());

  CHECK(res.stats.epigraph_variables == 40);
  CHECK(res.stats.vertex_inequalities == 40 * 4);
  CHECK(res.stats.variables == 2 * 40 + 121);

  // The objective dominates the unavoidable first stage cost.
  const double first_stage = x0.dot(mpc.weights().Q() * x0);
  CHECK(res.objective >= first_stage - 1e-6);

  // Recomposing the nested risk of the realized cost tree reproduces the
  // reported optimum.
  CHECK(res.risk_consistency_gap <= 1e-6);

  CHECK(riskmpc::in_control_set(mpc.constraints(), res.control).inside);
  CHECK(res.solve_seconds > 0.0);
  CHECK(res.build_seconds > 0.0);
}

TEST_CASE("terminal-set states are feasible at every horizon") {
  const ScenarioMpc probe = make_demo_mpc(0.5, 1);
  const Matrix chol = probe.terminal_set().cholesky_factor();

  std::vector<Vector> points;
  for (int i = 0; i < 6; ++i) {
    const double angle = 2.0 * M_PI * i / 6.0;
    const Vector dir = vec2(std::cos(angle), std::sin(angle));
    points.push_back(0.5 * (chol * dir));
  }

  for (int horizon = 1; horizon <= 3; ++horizon) {
    const ScenarioMpc mpc = make_demo_mpc(0.5, horizon);
    for (const Vector& x : points) {
      CAPTURE(horizon);
      CAPTURE(x(0));
      CAPTURE(x(1));
      REQUIRE(riskmpc::in_state_set(mpc.constraints(), x).inside);
      REQUIRE(riskmpc::in_ellipsoid(mpc.terminal_set(), x).inside);
      const riskmpc::MpcStepResult res = mpc.solve_step(x);
      CHECK(res.optimal());
    }
  }
}

TEST_CASE("infeasible states are reported, bad inputs throw") {
  const ScenarioMpc mpc = make_demo_mpc(0.5, 2);

  // Outside the state set: rejected before any program is assembled.
  const riskmpc::MpcStepResult outside = mpc.solve_step(vec2(20.0, 0.0));
  CHECK_FALSE(outside.optimal());
  CHECK(outside.status == riskmpc::conic::SolveStatus::kPrimalInfeasible);
  CHECK(outside.note == "state outside the state constraint set");

  // Inside the state set but with a control authority too small to keep
  // the expanding branch inside the state ball one step ahead: the solver
  // must certify infeasibility. With |u| <= 0.01, the branch with gain 1.2
  // maps x2 = 1.99 to at least 2.378, violating |x2| <= 2.
  const DemoKit& kit = demo_kit(0.5);
  const riskmpc::ConstraintSet tight(kit.bundle.constraints.Tx(), 1.0,
                                     kit.bundle.constraints.Tu(), 0.01);
  const ScenarioMpc starved(kit.bundle.model, kit.bundle.weights, tight,
                            kit.design, kit.envelope, 1);
  const riskmpc::MpcStepResult res = starved.solve_step(vec2(0.0, 1.99));
  REQUIRE_FALSE(res.optimal());
  CHECK(res.status == riskmpc::conic::SolveStatus::kPrimalInfeasible);

  CHECK_THROWS_AS(mpc.solve_step(vec1(1.0)), std::invalid_argument);
  Vector bad = vec2(1.0, std::nan(""));
  CHECK_THROWS_AS(mpc.solve_step(bad), std::invalid_argument);
}

TEST_CASE("a fine control grid brackets the two-branch optimum") {
  // Scalar two-branch plant; three decision scalars at a horizon of two
  // (root control plus one control per first-level node) make exhaustive
  // search practical.
  riskmpc::SystemModel model = fixtures::scalar_2branch(true);
  const riskmpc::CostWeights weights(Matrix::Identity(1, 1),
                                     Matrix::Identity(1, 1));
  const riskmpc::ConstraintSet constraints(Matrix::Identity(1, 1), 10.0,
                                           Matrix::Identity(1, 1), 10.0);
  const RiskEnvelope envelope = riskmpc::cvar_envelope(model.pmf(), 0.5);
  const TerminalDesign design =
      riskmpc::solve_pe(model, weights, constraints, envelope.vertices());

  const ScenarioMpc mpc(model, weights, constraints, design, envelope, 2);
  const Vector x0 = vec1(1.0);
  const riskmpc::MpcStepResult res = mpc.solve_step(x0);
  REQUIRE(res.optimal());

  const double a0 = model.A(0)(0, 0);
  const double a1 = model.A(1)(0, 0);
  const double shape = design.shape(0, 0);
  const double terminal_cost = design.cost(0, 0);

  CostSequenceTree costs(2, 2);
  const int grid = 61;
  auto knot = [&](int i) { return -2.0 + 4.0 * i / (grid - 1); };

  double best = std::numeric_limits<double>::infinity();
  Index feasible_count = 0;
  for (int i0 = 0; i0 < grid; ++i0) {
    const double u0 = knot(i0);
    const double x10 = a0 * x0(0) + u0;
    const double x11 = a1 * x0(0) + u0;
    costs.cost(0) = x0(0) * x0(0) + u0 * u0;
    for (int i1 = 0; i1 < grid; ++i1) {
      const double u10 = knot(i1);
      costs.cost(1) = x10 * x10 + u10 * u10;
      const double x20 = a0 * x10 + u10;
      const double x21 = a1 * x10 + u10;
      if (x20 * x20 > shape || x21 * x21 > shape) continue;
      costs.cost(3) = terminal_cost * x20 * x20;
      costs.cost(4) = terminal_cost * x21 * x21;
      for (int i2 = 0; i2 < grid; ++i2) {
        const double u11 = knot(i2);
        costs.cost(2) = x11 * x11 + u11 * u11;
        const double x22 = a0 * x11 + u11;
        const double x23 = a1 * x11 + u11;
        if (x22 * x22 > shape || x23 * x23 > shape) continue;
        costs.cost(5) = terminal_cost * x22 * x22;
        costs.cost(6) = terminal_cost * x23 * x23;
        ++feasible_count;
        best = std::min(best, riskmpc::compose_risk(costs, envelope));
      }
    }
  }

  REQUIRE(feasible_count > 0);
  // Every grid policy is feasible for the lookahead program, so the grid
  // minimum can never undercut the reported optimum; a fine enough grid
  // must also come close to it from above.
  CHECK(best >= res.objective - 1e-6);
  CHECK(best <= res.objective * 1.02);
}

TEST_CASE("nested envelopes order the optimal values") {
  // One conservative terminal design shared by all three controllers so the
  // feasible sets coincide and only the risk recursion differs.
  const DemoKit& kit = demo_kit(0.2);
  const Pmf& pmf = kit.bundle.model.pmf();
  const Vector x0 = vec2(2.0, 0.5);

  std::vector<double> values;
  for (double alpha : {1.0, 0.5, 0.2}) {
    const RiskEnvelope envelope = riskmpc::cvar_envelope(pmf, alpha);
    const ScenarioMpc mpc(kit.bundle.model, kit.bundle.weights,
                          kit.bundle.constraints, kit.design, envelope, 3);
    const riskmpc::MpcStepResult res = mpc.solve_step(x0);
    REQUIRE(res.optimal());
    values.push_back(res.objective);
  }

  // A larger envelope can only increase the worst-case reweighting.
  CHECK(values[0] <= values[1] + 1e-7);
  CHECK(values[1] <= values[2] + 1e-7);
}

TEST_CASE("a constant on every leaf cost shifts the optimum by it") {
  const ScenarioMpc mpc = make_demo_mpc(0.5, 3);
  const Vector x0 = vec2(1.0, 0.3);
  const double offset = 0.75;

  riskmpc::CmpcProgram plain = mpc.build_program(x0);
  riskmpc::CmpcProgram shifted = mpc.build_program(x0, offset);

  const riskmpc::conic::Solution sol_plain =
      riskmpc::conic::solve(plain.program.build());
  const riskmpc::conic::Solution sol_shifted =
      riskmpc::conic::solve(shifted.program.build());
  REQUIRE(sol_plain.optimal());
  REQUIRE(sol_shifted.optimal());

  // Normalization and monotonicity make the recursion translate constants
  // through every level untouched.
  CHECK(std::abs(sol_shifted.primal_objective -
                 (sol_plain.primal_objective + offset)) <= 1e-7);
}

TEST_CASE("a singleton envelope reproduces the risk-neutral expectation") {
  const fixtures::ModelBundle bundle = fixtures::demo_2x3();
  const RiskEnvelope envelope =
      riskmpc::expectation_envelope(bundle.model.pmf());
  REQUIRE(envelope.vertices().size() == 1);
  const TerminalDesign design = riskmpc::solve_pe(
      bundle.model, bundle.weights, bundle.constraints, envelope.vertices());
  const ScenarioMpc mpc(bundle.model, bundle.weights, bundle.constraints,
                        design, envelope, 3);

  const Vector x0 = vec2(2.0, 1.0);
  const riskmpc::MpcStepResult res = mpc.solve_step(x0);
  REQUIRE(res.optimal());
  CHECK(res.risk_consistency_gap <= 1e-6);

  // Independent route: evaluate the solved policy's expected cost by raw
  // probability-weighted recursion over the tree (no risk machinery).
  const riskmpc::CmpcProgram built = mpc.build_program(x0);
  const riskmpc::conic::Solution sol =
      riskmpc::conic::solve(built.program.build());
  REQUIRE(sol.optimal());

  const ScenarioTree& tree = mpc.tree();
  const Index nodes = tree.node_count();
  const Index interior = tree.interior_count();
  std::vector<Vector> states(nodes);
  states[0] = x0;
  std::vector<double> node_cost(nodes, 0.0);
  for (Index m = 0; m < nodes; ++m) {
    if (m < interior) {
      const Vector u =
          riskmpc::conic::value_at(built.node_controls[m], sol.x).col(0);
      node_cost[m] = riskmpc::stage_cost(bundle.weights, states[m], u);
      for (int j = 0; j < tree.branching(); ++j) {
        states[tree.child(m, j)] = riskmpc::step(bundle.model, states[m], u, j);
      }
    } else {
      node_cost[m] = states[m].dot(design.cost * states[m]);
    }
  }
  std::vector<double> value(nodes, 0.0);
  const Vector& p = bundle.model.pmf().probabilities();
  for (Index m = nodes - 1; m >= 0; --m) {
    value[m] = node_cost[m];
    if (m < interior) {
      for (int j = 0; j < tree.branching(); ++j) {
        value[m] += p(j) * value[tree.child(m, j)];
      }
    }
  }
  CHECK(std::abs(value[0] - sol.primal_objective) <= 1e-6);
}

TEST_CASE("closed loop from the origin stays at rest") {
  const ScenarioMpc mpc = make_demo_mpc(0.5, 2);
  const riskmpc::TrajectoryRecord record =
      riskmpc::closed_loop(mpc, Vector::Zero(2), 6, 7);

  REQUIRE(record.completed);
  REQUIRE(record.steps.size() == 6);
  for (const riskmpc::TrajectoryStep& entry : record.steps) {
    CHECK(entry.mpc_optimal);
    CHECK_FALSE(entry.used_fallback);
    CHECK(entry.state.norm() <= 1e-6);
    CHECK(entry.stage_cost <= 1e-10);
  }
  CHECK(record.steps.back().cumulative_cost <= 1e-9);
  CHECK(record.final_state.norm() <= 1e-6);
}

TEST_CASE("closed loop on a single-branch plant decays geometrically") {
  std::vector<Matrix> A(1, Matrix(1, 1));
  std::vector<Matrix> B(1, Matrix(1, 1));
  A[0] << 0.9;
  B[0] << 1.0;
  riskmpc::SystemModel model(std::move(A), std::move(B), Pmf(vec1(1.0)));
  const riskmpc::CostWeights weights(Matrix::Identity(1, 1),
                                     Matrix::Identity(1, 1));
  const riskmpc::ConstraintSet constraints(0.1 * Matrix::Identity(1, 1), 1.0,
                                           Matrix::Identity(1, 1), 10.0);
  const RiskEnvelope envelope = riskmpc::expectation_envelope(model.pmf());
  const TerminalDesign design =
      riskmpc::solve_pe(model, weights, constraints, envelope.vertices());
  const ScenarioMpc mpc(model, weights, constraints, design, envelope, 3);

  const riskmpc::TrajectoryRecord record =
      riskmpc::closed_loop(mpc, vec1(5.0), 12, 3);
  REQUIRE(record.completed);

  double prev = std::abs(record.steps.front().state(0));
  for (std::size_t k = 1; k < record.steps.size(); ++k) {
    const double cur = std::abs(record.steps[k].state(0));
    CHECK(record.steps[k].mpc_optimal);
    CHECK(cur <= 0.7 * prev + 1e-9);
    prev = cur;
  }
  CHECK(std::abs(record.final_state(0)) <= 1e-3);

  // Deterministic telescoping: each step's certificate absorbs the stage
  // cost, so the realized total never exceeds the first certificate.
  CHECK(record.steps.back().cumulative_cost <=
        record.steps.front().objective + 1e-6);
}

TEST_CASE("closed loop on the demo plant stays feasible and deterministic") {
  const ScenarioMpc mpc = make_demo_mpc(0.5, 4);
  const Vector x0 = vec2(6.0, 1.0);
  const int steps = 10;

  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    CAPTURE(seed);
    const riskmpc::TrajectoryRecord record =
        riskmpc::closed_loop(mpc, x0, steps, seed);
    REQUIRE(record.completed);
    REQUIRE(record.steps.size() == static_cast<std::size_t>(steps));

    for (std::size_t k = 0; k < record.steps.size(); ++k) {
      const riskmpc::TrajectoryStep& entry = record.steps[k];
      CAPTURE(k);
      CHECK(entry.mpc_optimal);
      CHECK_FALSE(entry.used_fallback);
      CHECK(entry.state_margin <= 1e-6);
      CHECK(entry.control_margin <= 1e-6);
      CHECK(entry.branch >= 0);
      CHECK(entry.branch < 3);
    }
  }

  // Byte-identical determinism for a fixed seed.
  const riskmpc::TrajectoryRecord a = riskmpc::closed_loop(mpc, x0, steps, 1);
  const riskmpc::TrajectoryRecord b = riskmpc::closed_loop(mpc, x0, steps, 1);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    CHECK(a.steps[k].branch == b.steps[k].branch);
    CHECK((a.steps[k].state.array() == b.steps[k].state.array()).all());
    CHECK((a.steps[k].control.array() == b.steps[k].control.array()).all());
    CHECK(a.steps[k].objective == b.steps[k].objective);
  }
  CHECK((a.final_state.array() == b.final_state.array()).all());
}

TEST_CASE("certificates decrease along realizations under a full envelope") {
  // When the envelope contains every unit mass vector (here alpha at the
  // smallest branch probability turns the CVaR envelope into the whole
  // simplex), the lookahead value dominates each realized continuation, so
  // the certificate must fall by at least the realized stage's state cost.
  const ScenarioMpc mpc = make_demo_mpc(0.2, 4);
  const Vector x0 = vec2(6.0, 1.0);
  const double lambda_min_q = 1.0;  // smallest state-cost eigenvalue

  for (std::uint64_t seed = 11; seed < 14; ++seed) {
    CAPTURE(seed);
    const riskmpc::TrajectoryRecord record =
        riskmpc::closed_loop(mpc, x0, 10, seed);
    REQUIRE(record.completed);
    for (std::size_t k = 1; k < record.steps.size(); ++k) {
      CAPTURE(k);
      const riskmpc::TrajectoryStep& last = record.steps[k - 1];
      CHECK(record.steps[k].mpc_optimal);
      CHECK(record.steps[k].objective <=
            last.objective - lambda_min_q * last.state.squaredNorm() + 1e-5);
    }
  }
}

TEST_CASE("an infeasible start throws on the first step") {
  const ScenarioMpc mpc = make_demo_mpc(0.5, 2);
  CHECK_THROWS_AS(riskmpc::closed_loop(mpc, vec2(20.0, 0.0), 5, 0),
                  std::domain_error);
  CHECK_THROWS_AS(riskmpc::closed_loop(mpc, vec2(0.1, 0.1), 0, 0),
                  std::invalid_argument);
}

TEST_SUITE_END();
