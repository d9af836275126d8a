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

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "riskmpc/risk_envelope.hpp"
#include "riskmpc/sim_harness.hpp"
#include "riskmpc/system_model.hpp"
#include "riskmpc/terminal_design.hpp"

// On-disk formats shared by every tool: a structured-text (JSON) model
// file, a design file that embeds its model so verification can replay
// stand-alone, and the experiment configurations.  Matrices are stored as
// arrays of rows; dimensions are validated against the declared nx/nu/L.
namespace riskmpc::io {

// Parse failures and schema violations raise this.
class FileFormatError : public std::runtime_error {
 public:
  explicit FileFormatError(const std::string& what)
      : std::runtime_error(what) {}
};

// A complete plant description: dynamics, weights, constraint sets.
struct ModelFile {
  SystemModel model;
  CostWeights weights;
  ConstraintSet constraints;
};

ModelFile load_model(const std::filesystem::path& path);
void save_model(const ModelFile& file, const std::filesystem::path& path);

// Envelope specification: the expectation envelope or a tail level.
struct EnvelopeSpec {
  std::string kind = "cvar";  // "cvar" | "expectation"
  double alpha = 1.0;         // used by the cvar kind
};

RiskEnvelope make_envelope(const EnvelopeSpec& spec, const Pmf& pmf);

// Saved synthesis output.  Embeds the plant and envelope it was built for.
struct DesignFile {
  ModelFile problem;
  EnvelopeSpec envelope;
  TerminalDesign design;
  VerificationReport margins;
};

DesignFile load_design(const std::filesystem::path& path);
void save_design(const DesignFile& file, const std::filesystem::path& path);

// Configuration of a closed-loop experiment (`run` and `sweep`).  The model
// is given by path (resolved relative to the config file) or inline.
struct SweepConfigFile {
  std::optional<std::filesystem::path> model_path;
  std::optional<ModelFile> model_inline;
  std::optional<std::filesystem::path> design_path;  // `run` only
  EnvelopeSpec envelope;                             // `run` only
  ExperimentConfig experiment;
  std::optional<std::filesystem::path> out_dir;
};

SweepConfigFile load_sweep_config(const std::filesystem::path& path);

// Configuration of the horizon-scaling study (`bench`).
struct ScalingConfigFile {
  ScalingConfig scaling;
  std::optional<std::filesystem::path> out_dir;
};

ScalingConfigFile load_scaling_config(const std::filesystem::path& path);

// Resolves the model referenced by a sweep config (inline or by path).
ModelFile resolve_model(const SweepConfigFile& config,
                        const std::filesystem::path& config_path);

}  // namespace riskmpc::io
