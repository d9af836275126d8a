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

#include <fstream>
#include <initializer_list>
#include <string_view>

#include <nlohmann/json.hpp>

namespace riskmpc::io {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

Json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FileFormatError("cannot open file: " + path.string());
  }
  try {
    return Json::parse(in, /*cb=*/nullptr, /*allow_exceptions=*/true,
                       /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw FileFormatError(path.string() + ": " + e.what());
  }
}

void write_file(const OrderedJson& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FileFormatError("cannot open file for writing: " + path.string());
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw FileFormatError("write failed: " + path.string());
  }
}

// Typo guard: every object must contain only keys the schema names.
void check_keys(const Json& obj, const std::string& where,
                std::initializer_list<std::string_view> known) {
  if (!obj.is_object()) {
    throw FileFormatError(where + ": expected an object");
  }
  for (const auto& item : obj.items()) {
    bool found = false;
    for (std::string_view k : known) {
      if (item.key() == k) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw FileFormatError(where + ": unknown field '" + item.key() + "'");
    }
  }
}

const Json& require(const Json& obj, const char* key,
                    const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw FileFormatError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double as_number(const Json& j, const std::string& where) {
  if (!j.is_number()) {
    throw FileFormatError(where + ": expected a number");
  }
  return j.get<double>();
}

int as_int(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) {
    throw FileFormatError(where + ": expected an integer");
  }
  return j.get<int>();
}

std::uint64_t as_u64(const Json& j, const std::string& where) {
  if (!(j.is_number_unsigned() ||
        (j.is_number_integer() && j.get<std::int64_t>() >= 0))) {
    throw FileFormatError(where + ": expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

Vector as_vector(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw FileFormatError(where + ": expected a non-empty array of numbers");
  }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) =
        as_number(j[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

// A matrix is an array of rows; all rows must have the same length.
Matrix as_matrix(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
    throw FileFormatError(where + ": expected a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw FileFormatError(where + ": ragged rows (row " +
                            std::to_string(r) + ")");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = as_number(row[static_cast<std::size_t>(c)],
                          where + "[" + std::to_string(r) + "][" +
                              std::to_string(c) + "]");
    }
  }
  return m;
}

Matrix as_matrix_sized(const Json& j, Eigen::Index rows, Eigen::Index cols,
                       const std::string& where) {
  Matrix m = as_matrix(j, where);
  if (m.rows() != rows || m.cols() != cols) {
    throw FileFormatError(where + ": expected " + std::to_string(rows) +
                          "x" + std::to_string(cols) + ", got " +
                          std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
  }
  return m;
}

OrderedJson matrix_to_json(const Matrix& m) {
  OrderedJson rows = OrderedJson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    OrderedJson row = OrderedJson::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

OrderedJson vector_to_json(const Vector& v) {
  OrderedJson arr = OrderedJson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

ModelFile parse_model_object(const Json& j, const std::string& where) {
  check_keys(j, where,
             {"nx", "nu", "L", "A", "B", "p", "Q", "R", "Tx", "x_max", "Tu",
              "u_max"});
  const int nx = as_int(require(j, "nx", where), where + ".nx");
  const int nu = as_int(require(j, "nu", where), where + ".nu");
  const int branches = as_int(require(j, "L", where), where + ".L");
  if (nx < 1 || nu < 1 || branches < 1) {
    throw FileFormatError(where + ": nx, nu, and L must be positive");
  }

  const Json& a_list = require(j, "A", where);
  const Json& b_list = require(j, "B", where);
  if (!a_list.is_array() ||
      static_cast<int>(a_list.size()) != branches ||
      !b_list.is_array() || static_cast<int>(b_list.size()) != branches) {
    throw FileFormatError(where + ": A and B must list exactly L matrices");
  }
  std::vector<Matrix> A;
  std::vector<Matrix> B;
  A.reserve(branches);
  B.reserve(branches);
  for (int jj = 0; jj < branches; ++jj) {
    A.push_back(as_matrix_sized(a_list[jj], nx, nx,
                                where + ".A[" + std::to_string(jj) + "]"));
    B.push_back(as_matrix_sized(b_list[jj], nx, nu,
                                where + ".B[" + std::to_string(jj) + "]"));
  }

  Vector p = as_vector(require(j, "p", where), where + ".p");
  if (static_cast<int>(p.size()) != branches) {
    throw FileFormatError(where + ".p: expected " +
                          std::to_string(branches) + " entries");
  }

  Matrix Q = as_matrix_sized(require(j, "Q", where), nx, nx, where + ".Q");
  Matrix R = as_matrix_sized(require(j, "R", where), nu, nu, where + ".R");

  Matrix Tx = as_matrix(require(j, "Tx", where), where + ".Tx");
  if (Tx.cols() != nx) {
    throw FileFormatError(where + ".Tx: expected " + std::to_string(nx) +
                          " columns");
  }
  Matrix Tu = as_matrix(require(j, "Tu", where), where + ".Tu");
  if (Tu.cols() != nu) {
    throw FileFormatError(where + ".Tu: expected " + std::to_string(nu) +
                          " columns");
  }
  const double x_max = as_number(require(j, "x_max", where),
                                 where + ".x_max");
  const double u_max = as_number(require(j, "u_max", where),
                                 where + ".u_max");

  try {
    return ModelFile{SystemModel(std::move(A), std::move(B), Pmf(p)),
                     CostWeights(std::move(Q), std::move(R)),
                     ConstraintSet(std::move(Tx), x_max, std::move(Tu),
                                   u_max)};
  } catch (const std::invalid_argument& e) {
    // Dimension-consistent but semantically invalid (e.g. Q not positive
    // definite, probabilities not a distribution).
    throw FileFormatError(where + ": " + e.what());
  }
}

OrderedJson model_to_json(const ModelFile& file) {
  const SystemModel& m = file.model;
  OrderedJson j;
  j["nx"] = m.nx();
  j["nu"] = m.nu();
  j["L"] = m.branches();
  j["A"] = OrderedJson::array();
  j["B"] = OrderedJson::array();
  for (int jj = 0; jj < m.branches(); ++jj) {
    j["A"].push_back(matrix_to_json(m.A(jj)));
    j["B"].push_back(matrix_to_json(m.B(jj)));
  }
  j["p"] = vector_to_json(m.pmf().probabilities());
  j["Q"] = matrix_to_json(file.weights.Q());
  j["R"] = matrix_to_json(file.weights.R());
  j["Tx"] = matrix_to_json(file.constraints.Tx());
  j["x_max"] = file.constraints.x_max();
  j["Tu"] = matrix_to_json(file.constraints.Tu());
  j["u_max"] = file.constraints.u_max();
  return j;
}

EnvelopeSpec parse_envelope_spec(const Json& j, const std::string& where) {
  check_keys(j, where, {"kind", "alpha"});
  EnvelopeSpec spec;
  if (j.contains("kind")) {
    if (!j.at("kind").is_string()) {
      throw FileFormatError(where + ".kind: expected a string");
    }
    spec.kind = j.at("kind").get<std::string>();
  }
  if (j.contains("alpha")) {
    spec.alpha = as_number(j.at("alpha"), where + ".alpha");
  }
  if (spec.kind != "cvar" && spec.kind != "expectation") {
    throw FileFormatError(where + ".kind: expected 'cvar' or 'expectation'");
  }
  return spec;
}

OrderedJson envelope_to_json(const EnvelopeSpec& spec) {
  OrderedJson j;
  j["kind"] = spec.kind;
  j["alpha"] = spec.alpha;
  return j;
}

std::vector<double> as_double_list(const Json& j, const std::string& where) {
  if (!j.is_array()) {
    throw FileFormatError(where + ": expected an array of numbers");
  }
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<int> as_int_list(const Json& j, const std::string& where) {
  if (!j.is_array()) {
    throw FileFormatError(where + ": expected an array of integers");
  }
  std::vector<int> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_int(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

ExperimentConfig parse_experiment(const Json& j, const std::string& where) {
  check_keys(j, where,
             {"alphas", "horizon", "steps", "runs", "master_seed",
              "initial_state", "snapshots", "quantile_levels", "jobs",
              "violation_tolerance"});
  ExperimentConfig c;
  if (j.contains("alphas")) {
    c.alphas = as_double_list(j.at("alphas"), where + ".alphas");
  }
  if (j.contains("horizon")) {
    c.horizon = as_int(j.at("horizon"), where + ".horizon");
  }
  if (j.contains("steps")) {
    c.steps = as_int(j.at("steps"), where + ".steps");
  }
  if (j.contains("runs")) {
    c.runs = as_int(j.at("runs"), where + ".runs");
  }
  if (j.contains("master_seed")) {
    c.master_seed = as_u64(j.at("master_seed"), where + ".master_seed");
  }
  if (j.contains("initial_state")) {
    c.initial_state =
        as_vector(j.at("initial_state"), where + ".initial_state");
  }
  if (j.contains("snapshots")) {
    c.snapshots = as_int_list(j.at("snapshots"), where + ".snapshots");
  }
  if (j.contains("quantile_levels")) {
    c.quantile_levels =
        as_double_list(j.at("quantile_levels"), where + ".quantile_levels");
  }
  if (j.contains("jobs")) {
    c.jobs = as_int(j.at("jobs"), where + ".jobs");
  }
  if (j.contains("violation_tolerance")) {
    c.violation_tolerance = as_number(j.at("violation_tolerance"),
                                      where + ".violation_tolerance");
  }
  return c;
}

}  // namespace

ModelFile load_model(const std::filesystem::path& path) {
  return parse_model_object(parse_file(path), path.filename().string());
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
  write_file(model_to_json(file), path);
}

RiskEnvelope make_envelope(const EnvelopeSpec& spec, const Pmf& pmf) {
  if (spec.kind == "expectation") {
    return expectation_envelope(pmf);
  }
  if (spec.kind == "cvar") {
    if (!(spec.alpha > 0.0) || spec.alpha > 1.0) {
      throw FileFormatError("envelope: alpha must lie in (0, 1]");
    }
    return cvar_envelope(pmf, spec.alpha);
  }
  throw FileFormatError("envelope: unknown kind '" + spec.kind + "'");
}

DesignFile load_design(const std::filesystem::path& path) {
  const Json j = parse_file(path);
  const std::string where = path.filename().string();
  check_keys(j, where, {"problem", "envelope", "design", "margins"});

  ModelFile problem =
      parse_model_object(require(j, "problem", where), where + ".problem");
  const int nx = problem.model.nx();
  const int nu = problem.model.nu();

  EnvelopeSpec spec = parse_envelope_spec(require(j, "envelope", where),
                                          where + ".envelope");

  const Json& d = require(j, "design", where);
  const std::string dw = where + ".design";
  check_keys(d, dw,
             {"shape", "cost", "gain", "raw_gain_factor", "raw_slack",
              "raw_cost_inverse"});
  TerminalDesign design;
  design.shape = as_matrix_sized(require(d, "shape", dw), nx, nx,
                                 dw + ".shape");
  design.cost = as_matrix_sized(require(d, "cost", dw), nx, nx,
                                dw + ".cost");
  design.gain = as_matrix_sized(require(d, "gain", dw), nu, nx,
                                dw + ".gain");
  design.raw_gain_factor = as_matrix_sized(
      require(d, "raw_gain_factor", dw), nu, nx, dw + ".raw_gain_factor");
  design.raw_slack = as_matrix_sized(require(d, "raw_slack", dw), nx, nx,
                                     dw + ".raw_slack");
  design.raw_cost_inverse =
      as_matrix_sized(require(d, "raw_cost_inverse", dw), nx, nx,
                      dw + ".raw_cost_inverse");

  VerificationReport margins;
  if (j.contains("margins")) {
    const Json& m = j.at("margins");
    const std::string mw = where + ".margins";
    check_keys(m, mw,
               {"stability", "control", "state", "invariance", "tolerance"});
    if (m.contains("stability")) {
      margins.stability_margins =
          as_double_list(m.at("stability"), mw + ".stability");
    }
    if (m.contains("control")) {
      margins.control_margin = as_number(m.at("control"), mw + ".control");
    }
    if (m.contains("state")) {
      margins.state_margins = as_double_list(m.at("state"), mw + ".state");
    }
    if (m.contains("invariance")) {
      margins.invariance_margins =
          as_double_list(m.at("invariance"), mw + ".invariance");
    }
    if (m.contains("tolerance")) {
      margins.tolerance = as_number(m.at("tolerance"), mw + ".tolerance");
    }
  }

  return DesignFile{std::move(problem), std::move(spec), std::move(design),
                    std::move(margins)};
}

void save_design(const DesignFile& file, const std::filesystem::path& path) {
  OrderedJson j;
  j["problem"] = model_to_json(file.problem);
  j["envelope"] = envelope_to_json(file.envelope);
  OrderedJson d;
  d["shape"] = matrix_to_json(file.design.shape);
  d["cost"] = matrix_to_json(file.design.cost);
  d["gain"] = matrix_to_json(file.design.gain);
  d["raw_gain_factor"] = matrix_to_json(file.design.raw_gain_factor);
  d["raw_slack"] = matrix_to_json(file.design.raw_slack);
  d["raw_cost_inverse"] = matrix_to_json(file.design.raw_cost_inverse);
  j["design"] = std::move(d);
  OrderedJson m;
  m["stability"] = file.margins.stability_margins;
  m["control"] = file.margins.control_margin;
  m["state"] = file.margins.state_margins;
  m["invariance"] = file.margins.invariance_margins;
  m["tolerance"] = file.margins.tolerance;
  j["margins"] = std::move(m);
  write_file(j, path);
}

SweepConfigFile load_sweep_config(const std::filesystem::path& path) {
  const Json j = parse_file(path);
  const std::string where = path.filename().string();
  check_keys(j, where,
             {"model", "design", "envelope", "experiment", "out_dir"});

  SweepConfigFile config;
  if (j.contains("model")) {
    const Json& m = j.at("model");
    if (m.is_string()) {
      config.model_path = m.get<std::string>();
    } else {
      config.model_inline = parse_model_object(m, where + ".model");
    }
  }
  if (j.contains("design")) {
    if (!j.at("design").is_string()) {
      throw FileFormatError(where + ".design: expected a path string");
    }
    config.design_path = j.at("design").get<std::string>();
  }
  if (j.contains("envelope")) {
    config.envelope =
        parse_envelope_spec(j.at("envelope"), where + ".envelope");
  }
  if (j.contains("experiment")) {
    config.experiment =
        parse_experiment(j.at("experiment"), where + ".experiment");
  }
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string()) {
      throw FileFormatError(where + ".out_dir: expected a path string");
    }
    config.out_dir = j.at("out_dir").get<std::string>();
  }
  return config;
}

ScalingConfigFile load_scaling_config(const std::filesystem::path& path) {
  const Json j = parse_file(path);
  const std::string where = path.filename().string();
  check_keys(j, where,
             {"branches", "nx", "nu", "alpha", "horizons", "runs", "steps",
              "master_seed", "node_cap", "out_dir"});

  ScalingConfigFile config;
  ScalingConfig& s = config.scaling;
  if (j.contains("branches")) {
    s.branches = as_int(j.at("branches"), where + ".branches");
  }
  if (j.contains("nx")) s.nx = as_int(j.at("nx"), where + ".nx");
  if (j.contains("nu")) s.nu = as_int(j.at("nu"), where + ".nu");
  if (j.contains("alpha")) {
    s.alpha = as_number(j.at("alpha"), where + ".alpha");
  }
  if (j.contains("horizons")) {
    s.horizons = as_int_list(j.at("horizons"), where + ".horizons");
  }
  if (j.contains("runs")) s.runs = as_int(j.at("runs"), where + ".runs");
  if (j.contains("steps")) s.steps = as_int(j.at("steps"), where + ".steps");
  if (j.contains("master_seed")) {
    s.master_seed = as_u64(j.at("master_seed"), where + ".master_seed");
  }
  if (j.contains("node_cap")) {
    s.node_cap = static_cast<Index>(
        as_u64(j.at("node_cap"), where + ".node_cap"));
  }
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string()) {
      throw FileFormatError(where + ".out_dir: expected a path string");
    }
    config.out_dir = j.at("out_dir").get<std::string>();
  }
  return config;
}

ModelFile resolve_model(const SweepConfigFile& config,
                        const std::filesystem::path& config_path) {
  if (config.model_inline.has_value()) {
    return *config.model_inline;
  }
  if (config.model_path.has_value()) {
    std::filesystem::path p = *config.model_path;
    if (p.is_relative()) {
      p = config_path.parent_path() / p;
    }
    return load_model(p);
  }
  throw FileFormatError(config_path.string() + ": no model given");
}

}  // namespace riskmpc::io
