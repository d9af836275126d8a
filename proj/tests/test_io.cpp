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

#include "riskmpc/io.hpp"

#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "riskmpc/terminal_design.hpp"
#include "test_fixtures.hpp"

namespace {

using riskmpc::Matrix;
using riskmpc::Vector;
using riskmpc::io::DesignFile;
using riskmpc::io::FileFormatError;
using riskmpc::io::ModelFile;

std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir =
      std::filesystem::temp_directory_path() / ("riskmpc_io_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path write_text(const std::filesystem::path& path,
                                 const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(bool(out));
  out << text;
  return path;
}

ModelFile demo_model_file() {
  fixtures::ModelBundle bundle = fixtures::demo_2x3();
  return ModelFile{std::move(bundle.model), std::move(bundle.weights),
                   std::move(bundle.constraints)};
}

// A syntactically minimal valid scalar model document.
const char* kScalarModel = R"({
  "nx": 1, "nu": 1, "L": 2,
  "A": [[[0.5]], [[1.1]]],
  "B": [[[1.0]], [[1.0]]],
  "p": [0.3, 0.7],
  "Q": [[1.0]],
  "R": [[1.0]],
  "Tx": [[1.0]],
  "x_max": 2.0,
  "Tu": [[1.0]],
  "u_max": 1.0
})";

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("model file round trip preserves every entry exactly") {
  const auto dir = scratch_dir("model");
  const ModelFile saved = demo_model_file();
  save_model(saved, dir / "model.json");
  const ModelFile loaded = riskmpc::io::load_model(dir / "model.json");

  REQUIRE(loaded.model.nx() == 2);
  REQUIRE(loaded.model.nu() == 1);
  REQUIRE(loaded.model.branches() == 3);
  for (int j = 0; j < 3; ++j) {
    CHECK(loaded.model.A(j) == saved.model.A(j));
    CHECK(loaded.model.B(j) == saved.model.B(j));
  }
  CHECK(loaded.model.pmf().probabilities() ==
        saved.model.pmf().probabilities());
  CHECK(loaded.weights.Q() == saved.weights.Q());
  CHECK(loaded.weights.R() == saved.weights.R());
  CHECK(loaded.constraints.Tx() == saved.constraints.Tx());
  CHECK(loaded.constraints.Tu() == saved.constraints.Tu());
  CHECK(loaded.constraints.x_max() == saved.constraints.x_max());
  CHECK(loaded.constraints.u_max() == saved.constraints.u_max());
  std::filesystem::remove_all(dir);
}

TEST_CASE("model parsing validates shape and semantics") {
  const auto dir = scratch_dir("badmodel");

  SUBCASE("missing field") {
    const auto path = write_text(dir / "m.json", R"({
      "nx": 1, "nu": 1, "L": 1,
      "A": [[[0.5]]], "B": [[[1.0]]], "p": [1.0],
      "R": [[1.0]], "Tx": [[1.0]], "x_max": 1.0,
      "Tu": [[1.0]], "u_max": 1.0
    })");
    CHECK_THROWS_AS(riskmpc::io::load_model(path), FileFormatError);
  }
  SUBCASE("unknown field") {
    std::string doc = kScalarModel;
    doc.insert(1, "\"QQ\": 1,");
    CHECK_THROWS_AS(riskmpc::io::load_model(write_text(dir / "m.json", doc)),
                    FileFormatError);
  }
  SUBCASE("wrong matrix dimensions") {
    std::string doc = kScalarModel;
    const auto pos = doc.find("\"Q\": [[1.0]]");
    REQUIRE(pos != std::string::npos);
    doc.replace(pos, 12, "\"Q\": [[1.0, 0.0]]");
    CHECK_THROWS_AS(riskmpc::io::load_model(write_text(dir / "m.json", doc)),
                    FileFormatError);
  }
  SUBCASE("ragged rows") {
    const auto path = write_text(dir / "m.json", R"({
      "nx": 2, "nu": 1, "L": 1,
      "A": [[[0.5, 0.0], [0.0]]],
      "B": [[[1.0], [0.0]]],
      "p": [1.0],
      "Q": [[1.0, 0.0], [0.0, 1.0]],
      "R": [[1.0]],
      "Tx": [[1.0, 0.0], [0.0, 1.0]], "x_max": 1.0,
      "Tu": [[1.0]], "u_max": 1.0
    })");
    CHECK_THROWS_AS(riskmpc::io::load_model(path), FileFormatError);
  }
  SUBCASE("branch count mismatch") {
    std::string doc = kScalarModel;
    const auto pos = doc.find("\"p\": [0.3, 0.7]");
    REQUIRE(pos != std::string::npos);
    doc.replace(pos, 15, "\"p\": [0.3, 0.3, 0.4]");
    CHECK_THROWS_AS(riskmpc::io::load_model(write_text(dir / "m.json", doc)),
                    FileFormatError);
  }
  SUBCASE("semantic rejection is wrapped") {
    std::string doc = kScalarModel;
    const auto pos = doc.find("\"Q\": [[1.0]]");
    REQUIRE(pos != std::string::npos);
    doc.replace(pos, 12, "\"Q\": [[-1.0]]");  // not positive definite
    CHECK_THROWS_AS(riskmpc::io::load_model(write_text(dir / "m.json", doc)),
                    FileFormatError);
  }
  SUBCASE("malformed document") {
    CHECK_THROWS_AS(
        riskmpc::io::load_model(write_text(dir / "m.json", "{ not json")),
        FileFormatError);
    CHECK_THROWS_AS(riskmpc::io::load_model(dir / "absent.json"),
                    FileFormatError);
  }
  SUBCASE("comments are tolerated") {
    std::string doc = kScalarModel;
    doc.insert(1, "\n  // scalar two-branch plant\n");
    const ModelFile loaded =
        riskmpc::io::load_model(write_text(dir / "m.json", doc));
    CHECK(loaded.model.branches() == 2);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("design file round trip preserves the synthesis output") {
  const auto dir = scratch_dir("design");
  const ModelFile problem = demo_model_file();
  const riskmpc::RiskEnvelope envelope =
      riskmpc::cvar_envelope(problem.model.pmf(), 0.5);
  const riskmpc::TerminalDesign design =
      riskmpc::solve_pe(problem.model, problem.weights, problem.constraints,
                        envelope.vertices());
  const riskmpc::VerificationReport margins = riskmpc::verify_terminal(
      problem.model, problem.weights, problem.constraints,
      envelope.vertices(), design);
  REQUIRE(margins.pass());

  const DesignFile saved{problem, {"cvar", 0.5}, design, margins};
  save_design(saved, dir / "design.json");
  const DesignFile loaded = riskmpc::io::load_design(dir / "design.json");

  CHECK(loaded.envelope.kind == "cvar");
  CHECK(loaded.envelope.alpha == 0.5);
  CHECK(loaded.design.shape == design.shape);
  CHECK(loaded.design.cost == design.cost);
  CHECK(loaded.design.gain == design.gain);
  CHECK(loaded.design.raw_gain_factor == design.raw_gain_factor);
  CHECK(loaded.design.raw_slack == design.raw_slack);
  CHECK(loaded.design.raw_cost_inverse == design.raw_cost_inverse);
  CHECK(loaded.margins.stability_margins == margins.stability_margins);
  CHECK(loaded.margins.control_margin == margins.control_margin);
  CHECK(loaded.margins.state_margins == margins.state_margins);
  CHECK(loaded.margins.invariance_margins == margins.invariance_margins);
  CHECK(loaded.margins.tolerance == margins.tolerance);
  CHECK(loaded.problem.model.A(1) == problem.model.A(1));

  // The reloaded design still verifies against the reloaded plant.
  const riskmpc::RiskEnvelope reloaded_envelope = riskmpc::io::make_envelope(
      loaded.envelope, loaded.problem.model.pmf());
  const riskmpc::VerificationReport replay = riskmpc::verify_terminal(
      loaded.problem.model, loaded.problem.weights,
      loaded.problem.constraints, reloaded_envelope.vertices(),
      loaded.design);
  CHECK(replay.pass());
  std::filesystem::remove_all(dir);
}

TEST_CASE("envelope specifications map onto envelope constructors") {
  const riskmpc::Pmf pmf = fixtures::demo_2x3().model.pmf();

  const riskmpc::RiskEnvelope tail =
      riskmpc::io::make_envelope({"cvar", 0.5}, pmf);
  CHECK(tail.vertices().size() == 4);

  const riskmpc::RiskEnvelope mean =
      riskmpc::io::make_envelope({"expectation", 1.0}, pmf);
  REQUIRE(mean.vertices().size() == 1);
  CHECK((mean.vertices()[0] - pmf.probabilities()).norm() < 1e-12);

  CHECK_THROWS_AS(riskmpc::io::make_envelope({"cvar", 0.0}, pmf),
                  FileFormatError);
  CHECK_THROWS_AS(riskmpc::io::make_envelope({"cvar", 1.5}, pmf),
                  FileFormatError);
  CHECK_THROWS_AS(riskmpc::io::make_envelope({"total", 0.5}, pmf),
                  FileFormatError);
}

TEST_CASE("sweep config parses inline and referenced models") {
  const auto dir = scratch_dir("sweep");
  write_text(dir / "model.json", kScalarModel);
  const auto config_path = write_text(dir / "sweep.json", R"({
    "model": "model.json",
    "envelope": {"kind": "cvar", "alpha": 0.2},
    "experiment": {
      "alphas": [0.2, 1.0],
      "horizon": 3,
      "steps": 10,
      "runs": 25,
      "master_seed": 99,
      "initial_state": [0.5],
      "snapshots": [2, 9],
      "quantile_levels": [0.9],
      "jobs": 2,
      "violation_tolerance": 1e-7
    },
    "out_dir": "results"
  })");

  const auto config = riskmpc::io::load_sweep_config(config_path);
  REQUIRE(config.model_path.has_value());
  CHECK_FALSE(config.model_inline.has_value());
  CHECK(config.envelope.alpha == 0.2);
  CHECK(config.experiment.alphas == std::vector<double>{0.2, 1.0});
  CHECK(config.experiment.horizon == 3);
  CHECK(config.experiment.steps == 10);
  CHECK(config.experiment.runs == 25);
  CHECK(config.experiment.master_seed == 99);
  CHECK(config.experiment.initial_state.size() == 1);
  CHECK(config.experiment.snapshots == std::vector<int>{2, 9});
  CHECK(config.experiment.quantile_levels == std::vector<double>{0.9});
  CHECK(config.experiment.jobs == 2);
  CHECK(config.experiment.violation_tolerance == 1e-7);
  REQUIRE(config.out_dir.has_value());
  CHECK(*config.out_dir == "results");

  // Relative model paths resolve against the config's directory.
  const ModelFile resolved = riskmpc::io::resolve_model(config, config_path);
  CHECK(resolved.model.branches() == 2);

  // Inline models bypass resolution.
  const auto inline_path = write_text(dir / "inline.json",
                                      std::string(R"({"model": )") +
                                          kScalarModel + "}");
  const auto inline_config = riskmpc::io::load_sweep_config(inline_path);
  REQUIRE(inline_config.model_inline.has_value());
  CHECK(riskmpc::io::resolve_model(inline_config, inline_path)
            .model.branches() == 2);

  // Defaults survive an empty experiment block; a config with no model
  // fails resolution, and typos are rejected at parse time.
  const auto bare_path = write_text(dir / "bare.json", R"({})");
  const auto bare = riskmpc::io::load_sweep_config(bare_path);
  CHECK(bare.experiment.horizon == riskmpc::ExperimentConfig{}.horizon);
  CHECK_THROWS_AS(riskmpc::io::resolve_model(bare, bare_path),
                  FileFormatError);
  const auto typo_path = write_text(
      dir / "typo.json", R"({"experiment": {"step": 10}})");
  CHECK_THROWS_AS(riskmpc::io::load_sweep_config(typo_path),
                  FileFormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("scaling config parses with defaults") {
  const auto dir = scratch_dir("scaling");
  const auto path = write_text(dir / "bench.json", R"({
    "branches": 4,
    "nx": 3,
    "nu": 2,
    "alpha": 0.3,
    "horizons": [2, 3],
    "runs": 5,
    "master_seed": 11,
    "out_dir": "bench_out"
  })");
  const auto config = riskmpc::io::load_scaling_config(path);
  CHECK(config.scaling.branches == 4);
  CHECK(config.scaling.nx == 3);
  CHECK(config.scaling.nu == 2);
  CHECK(config.scaling.alpha == 0.3);
  CHECK(config.scaling.horizons == std::vector<int>{2, 3});
  CHECK(config.scaling.runs == 5);
  CHECK(config.scaling.steps == riskmpc::ScalingConfig{}.steps);
  CHECK(config.scaling.master_seed == 11);
  CHECK(config.scaling.node_cap == riskmpc::ScalingConfig{}.node_cap);
  REQUIRE(config.out_dir.has_value());
  CHECK(*config.out_dir == "bench_out");

  CHECK_THROWS_AS(riskmpc::io::load_scaling_config(
                      write_text(dir / "typo.json", R"({"branch": 4})")),
                  FileFormatError);
  std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
